import {
  BufferAttribute,
  BufferGeometry,
  Points,
  PointsMaterial,
  Quaternion,
  Scene,
} from "three";
import { cloudColorArray } from "./colors";
import type { CandidatePayload, CloudPayload } from "./types";

/** Build a renderable point cloud, optionally pre-rotated by a candidate's
 * quaternion (w, x, y, z). */
export function pointsFromCloud(cloud: CloudPayload, quatWxyz?: number[]): Points {
  const geometry = new BufferGeometry();
  geometry.setAttribute("position", new BufferAttribute(new Float32Array(cloud.points), 3));
  geometry.setAttribute("color", new BufferAttribute(cloudColorArray(cloud), 3));
  const material = new PointsMaterial({ size: 0.025, vertexColors: true });
  const points = new Points(geometry, material);
  if (quatWxyz) {
    const [w, x, y, z] = quatWxyz;
    points.quaternion.copy(new Quaternion(x ?? 0, y ?? 0, z ?? 0, w ?? 1));
  }
  return points;
}

export interface ViewportSpec {
  title: string;
  subtitle: string;
  scene: Scene;
}

/** One scene per viewport: the template first, then the object under each of
 * the five candidate rotations. */
export function buildViewports(
  template: CloudPayload,
  object: CloudPayload,
  candidates: CandidatePayload[],
): ViewportSpec[] {
  const specs: ViewportSpec[] = [];
  const templateScene = new Scene();
  templateScene.add(pointsFromCloud(template));
  specs.push({ title: "template", subtitle: "reference frame", scene: templateScene });
  candidates.forEach((candidate, i) => {
    const scene = new Scene();
    scene.add(pointsFromCloud(object, candidate.quat_wxyz));
    specs.push({
      title: `${i + 1} · ${candidate.tag}`,
      subtitle: diagnosticsSummary(candidate.diagnostics),
      scene,
    });
  });
  return specs;
}

export function diagnosticsSummary(diagnostics: Record<string, unknown>): string {
  const parts: string[] = [];
  for (const [key, value] of Object.entries(diagnostics)) {
    if (typeof value === "number") parts.push(`${key}=${value.toFixed(3)}`);
    else if (typeof value === "string") parts.push(`${key}=${value}`);
  }
  return parts.join("  ");
}
