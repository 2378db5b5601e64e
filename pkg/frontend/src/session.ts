import { ApiClient, StaleLeaseError } from "./api";
import type { DiscardReason, ObjectPayload } from "./types";

export type SessionState = "idle" | "loading" | "annotating" | "pick-reason" | "done";

export interface SessionEvents {
  /** A new item is ready to render. */
  onItem?(item: ObjectPayload): void;
  /** All objects are annotated; session stats attached. */
  onDone?(stats: Record<string, unknown>): void;
  /** Transient message worth surfacing (stale lease, server error). */
  onNotice?(message: string): void;
  onState?(state: SessionState): void;
}

/** Decision loop: lease an item, time from first render to the decision,
 * submit, advance. The server log is authoritative; this holds no history. */
export class AnnotationSession {
  state: SessionState = "idle";
  current: ObjectPayload | null = null;
  private renderedAt: number | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly annotatorId: string,
    private readonly events: SessionEvents = {},
    private readonly now: () => number = () => performance.now(),
  ) {}

  async start(): Promise<void> {
    await this.loadNext();
  }

  /** Called by the viewer once the item's first frame has been drawn. */
  markRendered(): void {
    if (this.renderedAt === null) this.renderedAt = this.now();
  }

  /** Keyboard 1-5 -> candidate index 0-4. */
  async select(index: number): Promise<void> {
    if (this.state !== "annotating" || !this.current) return;
    const candidate = this.current.candidates[index];
    if (!candidate) return;
    await this.submit(candidate.tag);
  }

  beginDiscard(): void {
    if (this.state !== "annotating") return;
    this.setState("pick-reason");
  }

  cancelDiscard(): void {
    if (this.state !== "pick-reason") return;
    this.setState("annotating");
  }

  async discard(reason: DiscardReason): Promise<void> {
    if (this.state !== "pick-reason" || !this.current) return;
    await this.submit("discard", reason);
  }

  private async submit(decision: string, reason?: DiscardReason): Promise<void> {
    if (!this.current) return;
    const startedAt = this.renderedAt ?? this.now();
    const elapsedMs = Math.max(this.now() - startedAt, 1e-3);
    try {
      await this.api.submit({
        annotator_id: this.annotatorId,
        object_id: this.current.object_id,
        decision,
        ...(reason ? { discard_reason: reason } : {}),
        elapsed_ms: elapsedMs,
      });
    } catch (err) {
      if (err instanceof StaleLeaseError) {
        this.events.onNotice?.("Lease expired; fetching a fresh item.");
      } else {
        this.events.onNotice?.(err instanceof Error ? err.message : String(err));
        this.setState("annotating");
        return; // keep the item on screen; the decision was not recorded
      }
    }
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    this.setState("loading");
    this.current = null;
    this.renderedAt = null;
    const next = await this.api.next(this.annotatorId);
    if (next.status === "none-remaining" || !next.object_id) {
      this.setState("done");
      this.events.onDone?.(await this.api.stats());
      return;
    }
    this.current = await this.api.object(next.object_id);
    this.setState("annotating");
    this.events.onItem?.(this.current);
  }

  private setState(state: SessionState): void {
    this.state = state;
    this.events.onState?.(state);
  }
}
