import { describe, expect, it, vi } from "vitest";
import { ApiClient, ApiError, Snapshot } from "../src/api.js";
import { SessionStore, StoreState } from "../src/store.js";
import { snapshot } from "./fixtures.js";

const POLL = { busyMs: 5, idleMs: 5 };

/** Scripted stand-in for ApiClient: snapshot queue repeats its last entry. */
class FakeClient {
  snapshotCalls = 0;
  submitted: string[] = [];

  constructor(
    public snapshots: Array<Snapshot | ApiError>,
    public submitResults: Array<Snapshot | ApiError> = [],
  ) {}

  async getSnapshot(_id: string): Promise<Snapshot> {
    this.snapshotCalls += 1;
    const next = this.snapshots.length > 1 ? this.snapshots.shift() : this.snapshots[0];
    if (next === undefined) throw new Error("no scripted snapshot");
    if (next instanceof ApiError) throw next;
    return next;
  }

  async submitAnswer(_id: string, label: string): Promise<Snapshot> {
    this.submitted.push(label);
    const next = this.submitResults.shift();
    if (next === undefined) throw new Error("no scripted submit result");
    if (next instanceof ApiError) throw next;
    return next;
  }
}

function makeStore(fake: FakeClient): SessionStore {
  return new SessionStore(fake as unknown as ApiClient, "s1", POLL);
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

describe("SessionStore", () => {
  it("notifies subscribers immediately and after the first snapshot", async () => {
    const fake = new FakeClient([snapshot()]);
    const store = makeStore(fake);
    const phases: string[] = [];
    store.subscribe((state: StoreState) => phases.push(state.phase));
    expect(phases).toEqual(["connecting"]);
    await store.start();
    store.stop();
    expect(store.state.phase).toBe("active");
    expect(store.state.snapshot?.id).toBe("s1");
  });

  it("polls until the service finishes the session, then stops", async () => {
    const fake = new FakeClient([
      snapshot({ status: "computing", pending_question: null }),
      snapshot({ status: "awaiting-answer" }),
      snapshot({ status: "finished", pending_question: null, outcome: "success" }),
    ]);
    const store = makeStore(fake);
    await store.start();
    expect(store.state.snapshot?.status).toBe("computing");
    await vi.waitFor(
      () => {
        expect(store.state.snapshot?.status).toBe("finished");
      },
      { timeout: 10_000, interval: 10 },
    );
    const settled = fake.snapshotCalls;
    await sleep(30);
    expect(fake.snapshotCalls).toBe(settled);
    store.stop();
  });

  it("flips to gone on unknown-session and stops polling", async () => {
    const fake = new FakeClient([new ApiError("unknown-session", 404, "no such session")]);
    const store = makeStore(fake);
    await store.start();
    expect(store.state.phase).toBe("gone");
    await sleep(30);
    expect(fake.snapshotCalls).toBe(1);
  });

  it("keeps the last snapshot through an outage and clears the notice on recovery", async () => {
    const fake = new FakeClient([
      snapshot({ turn: 1 }),
      new ApiError("network", 0, "service unreachable: down"),
      snapshot({ turn: 2 }),
    ]);
    const store = makeStore(fake);
    const seen: StoreState[] = [];
    store.subscribe((state) => seen.push(state));
    await store.start();
    expect(store.state.snapshot?.turn).toBe(1);
    await vi.waitFor(
      () => {
        expect(store.state.snapshot?.turn).toBe(2);
      },
      { timeout: 10_000, interval: 10 },
    );
    store.stop();
    const outage = seen.find((state) => state.notice === "service unreachable; retrying");
    expect(outage).toBeDefined();
    expect(outage?.snapshot?.turn).toBe(1);
    expect(store.state.notice).toBeNull();
  });

  it("submits optimistically: computing locally before the service confirms", async () => {
    const accepted = snapshot({ status: "computing", turn: 1, pending_question: null });
    const fake = new FakeClient([snapshot()], [accepted]);
    const store = makeStore(fake);
    await store.start();
    store.stop();
    const seen: StoreState[] = [];
    store.subscribe((state) => seen.push(state));
    await store.submit("Yes");
    expect(fake.submitted).toEqual(["Yes"]);
    const optimistic = seen.find((state) => state.submitting);
    expect(optimistic?.snapshot?.status).toBe("computing");
    expect(optimistic?.snapshot?.pending_question).toBeNull();
    expect(store.state.submitting).toBe(false);
    expect(store.state.snapshot).toEqual(accepted);
  });

  it("ignores submits unless a question is awaiting an answer", async () => {
    const fake = new FakeClient([snapshot({ status: "computing", pending_question: null })]);
    const store = makeStore(fake);
    await store.start();
    store.stop();
    await store.submit("Yes");
    expect(fake.submitted).toEqual([]);
  });

  it("recovers from a conflicting submit by refreshing the snapshot", async () => {
    const serverNow = snapshot({ status: "computing", turn: 1, pending_question: null });
    const fake = new FakeClient(
      [snapshot(), serverNow],
      [new ApiError("conflict", 409, "session is computing, not awaiting an answer")],
    );
    const store = makeStore(fake);
    await store.start();
    store.stop();
    await store.submit("Yes");
    expect(store.state.snapshot).toEqual(serverNow);
    expect(store.state.submitting).toBe(false);
    expect(store.state.notice).toBe("answer already recorded elsewhere; view refreshed");
  });

  it("surfaces service rejections (bad label) after refreshing", async () => {
    const fake = new FakeClient(
      [snapshot(), snapshot()],
      [new ApiError("invalid-label", 422, "unknown option 'Maybe'; expected one of: Yes, No")],
    );
    const store = makeStore(fake);
    await store.start();
    store.stop();
    await store.submit("Maybe");
    expect(store.state.notice).toContain("unknown option");
    expect(store.state.snapshot?.status).toBe("awaiting-answer");
  });

  it("recovers from a network failure during submit", async () => {
    const fake = new FakeClient(
      [snapshot(), snapshot()],
      [new ApiError("network", 0, "service unreachable: down")],
    );
    const store = makeStore(fake);
    await store.start();
    store.stop();
    await store.submit("Yes");
    expect(store.state.notice).toBe("submit failed; service unreachable");
    expect(store.state.submitting).toBe(false);
  });
});
