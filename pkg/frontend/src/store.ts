/** Polling session store: one active session, optimistic answer submission.
 *
 * All state lives in the service; this store only mirrors the latest snapshot
 * plus transient client-side flags, so a page refresh loses nothing.  Polling
 * runs on a bounded interval (fast while the service is computing, slower
 * while idle) and stops once the session finishes.  A conflicting submit
 * (another tab answered first) recovers by re-fetching the snapshot.
 */

import { ApiClient, ApiError, Snapshot } from "./api.js";

export interface StoreState {
  /** connecting: no snapshot yet; active: mirroring; gone: unknown session id. */
  phase: "connecting" | "active" | "gone";
  snapshot: Snapshot | null;
  submitting: boolean;
  /** Transient user-facing message: recovered conflict, rejected label, outage. */
  notice: string | null;
}

export interface PollOptions {
  busyMs: number;
  idleMs: number;
}

export type Listener = (state: StoreState) => void;

const OUTAGE_NOTICE = "service unreachable; retrying";

export class SessionStore {
  state: StoreState = { phase: "connecting", snapshot: null, submitting: false, notice: null };

  private readonly listeners = new Set<Listener>();
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private readonly client: ApiClient,
    readonly sessionId: string,
    private readonly poll: PollOptions = { busyMs: 400, idleMs: 1500 },
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    listener(this.state);
    return () => this.listeners.delete(listener);
  }

  private patch(partial: Partial<StoreState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  async start(): Promise<void> {
    this.stopped = false;
    await this.refresh();
    this.schedule();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  /** Pull the authoritative snapshot; never throws. */
  async refresh(): Promise<void> {
    try {
      const snapshot = await this.client.getSnapshot(this.sessionId);
      // Recovered outages clear their own notice; other notices stay visible.
      const notice = this.state.notice === OUTAGE_NOTICE ? null : this.state.notice;
      this.patch({ phase: "active", snapshot, notice });
    } catch (error) {
      if (error instanceof ApiError && error.code === "unknown-session") {
        this.patch({ phase: "gone" });
        this.stop();
      } else {
        this.patch({ notice: OUTAGE_NOTICE });
      }
    }
  }

  private schedule(): void {
    if (this.stopped || this.state.phase === "gone") return;
    if (this.state.snapshot?.status === "finished") return;
    const wait = this.state.snapshot?.status === "computing" ? this.poll.busyMs : this.poll.idleMs;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(async () => {
      await this.refresh();
      this.schedule();
    }, wait);
  }

  /** Submit an answer optimistically: flip to computing locally, then reconcile. */
  async submit(label: string): Promise<void> {
    const snapshot = this.state.snapshot;
    if (!snapshot || snapshot.status !== "awaiting-answer" || this.state.submitting) return;
    this.patch({
      submitting: true,
      notice: null,
      snapshot: { ...snapshot, status: "computing", pending_question: null },
    });
    try {
      const accepted = await this.client.submitAnswer(this.sessionId, label);
      this.patch({ submitting: false, snapshot: accepted });
    } catch (error) {
      if (error instanceof ApiError && error.code === "conflict") {
        await this.refresh();
        this.patch({ submitting: false, notice: "answer already recorded elsewhere; view refreshed" });
      } else if (error instanceof ApiError && error.status > 0) {
        await this.refresh();
        this.patch({ submitting: false, notice: error.message });
      } else {
        await this.refresh();
        this.patch({ submitting: false, notice: "submit failed; service unreachable" });
      }
    }
    this.schedule();
  }
}
