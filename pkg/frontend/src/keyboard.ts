import { DISCARD_REASONS } from "./types";
import type { SessionState } from "./session";

export type KeyAction =
  | { kind: "select"; index: number }
  | { kind: "discard-open" }
  | { kind: "discard-reason"; index: number }
  | { kind: "cancel" }
  | { kind: "reset-camera" };

/** Map a key press to a session action given the current state.
 *
 * annotating:  1-5 select that candidate, D opens the discard-reason picker,
 *              R resets the shared camera.
 * pick-reason: 1-6 choose a reason, Escape cancels.
 */
export function actionForKey(key: string, state: SessionState): KeyAction | null {
  if (state === "annotating") {
    if (key >= "1" && key <= "5") return { kind: "select", index: Number(key) - 1 };
    if (key === "d" || key === "D") return { kind: "discard-open" };
    if (key === "r" || key === "R") return { kind: "reset-camera" };
    return null;
  }
  if (state === "pick-reason") {
    const n = Number(key);
    if (key.length === 1 && n >= 1 && n <= DISCARD_REASONS.length) {
      return { kind: "discard-reason", index: n - 1 };
    }
    if (key === "Escape") return { kind: "cancel" };
    return null;
  }
  return null;
}
