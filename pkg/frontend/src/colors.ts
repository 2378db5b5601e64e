import type { CloudPayload } from "./types";

/** Fixed palette indexed by part label so template and candidate viewports
 * always paint the same part the same color. */
export const PART_PALETTE: ReadonlyArray<readonly [number, number, number]> = [
  [0.906, 0.298, 0.235], // red
  [0.204, 0.596, 0.859], // blue
  [0.18, 0.8, 0.443], // green
  [0.945, 0.769, 0.059], // yellow
  [0.608, 0.349, 0.714], // purple
  [0.902, 0.494, 0.133], // orange
  [0.102, 0.737, 0.612], // teal
  [0.584, 0.647, 0.651], // slate
];

export const NEUTRAL_COLOR: readonly [number, number, number] = [0.75, 0.75, 0.78];

export function partColor(label: number): readonly [number, number, number] {
  const entry = PART_PALETTE[((label % PART_PALETTE.length) + PART_PALETTE.length) % PART_PALETTE.length];
  return entry ?? NEUTRAL_COLOR;
}

/** Flat rgb triples for a cloud: per-part palette when labels exist, the
 * shipped colors otherwise, neutral gray as a last resort. */
export function cloudColorArray(cloud: CloudPayload): Float32Array {
  const n = cloud.points.length / 3;
  const out = new Float32Array(n * 3);
  if (cloud.labels && cloud.labels.length === n) {
    for (let i = 0; i < n; i++) {
      const [r, g, b] = partColor(cloud.labels[i] ?? 0);
      out[3 * i] = r;
      out[3 * i + 1] = g;
      out[3 * i + 2] = b;
    }
  } else if (cloud.colors && cloud.colors.length === n * 3) {
    out.set(cloud.colors);
  } else {
    for (let i = 0; i < n; i++) {
      out[3 * i] = NEUTRAL_COLOR[0];
      out[3 * i + 1] = NEUTRAL_COLOR[1];
      out[3 * i + 2] = NEUTRAL_COLOR[2];
    }
  }
  return out;
}
