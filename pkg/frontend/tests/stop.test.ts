import { describe, expect, it, vi } from "vitest";
import { ApiClient, ApiError, DecisionRecord, SnapshotView } from "../src/api.js";
import { RawNumber } from "../src/json.js";
import { decisionBanner, StopFlow } from "../src/stop.js";

const raw = (s: string) => s as RawNumber;

const record: DecisionRecord = Object.freeze({
  experiment_id: "exp-a",
  alpha: raw("0.05"),
  rejected: true,
  stopped_at: 7,
  actor: "dashboard",
  reason: "e2e",
});

interface Stub {
  stop: ReturnType<typeof vi.fn>;
  snapshot: ReturnType<typeof vi.fn>;
  decisionFromSnapshot: (s: SnapshotView) => DecisionRecord | null;
}

function stubApi(overrides: Partial<Stub> = {}): { api: ApiClient; stub: Stub } {
  const stub: Stub = {
    stop: vi.fn().mockResolvedValue(record),
    snapshot: vi.fn(),
    // the real implementation reads only its argument, so borrow it
    decisionFromSnapshot: ApiClient.prototype.decisionFromSnapshot,
    ...overrides,
  };
  return { api: stub as unknown as ApiClient, stub };
}

describe("StopFlow arming", () => {
  it("requires the exact experiment id before submit is possible", () => {
    const { api } = stubApi();
    const flow = new StopFlow(api, "exp-a");

    flow.begin();
    expect(flow.state).toEqual({ kind: "confirming", typed: "", armed: false });

    flow.type("exp");
    expect(flow.state).toMatchObject({ armed: false });
    flow.type("exp-A"); // case matters
    expect(flow.state).toMatchObject({ armed: false });
    flow.type("exp-a ");
    expect(flow.state).toMatchObject({ armed: false });
    flow.type("exp-a");
    expect(flow.state).toMatchObject({ armed: true });
    flow.type("exp-ab"); // disarms again
    expect(flow.state).toMatchObject({ armed: false });
  });

  it("ignores submit while unarmed", async () => {
    const { api, stub } = stubApi();
    const flow = new StopFlow(api, "exp-a");
    flow.begin();
    flow.type("wrong");
    await flow.submit(0.05, "why");
    expect(stub.stop).not.toHaveBeenCalled();
    expect(flow.state.kind).toBe("confirming");
  });

  it("ignores typing and submit before begin", async () => {
    const { api, stub } = stubApi();
    const flow = new StopFlow(api, "exp-a");
    flow.type("exp-a");
    await flow.submit(0.05, "why");
    expect(flow.state.kind).toBe("idle");
    expect(stub.stop).not.toHaveBeenCalled();
  });

  it("cancel returns to idle from confirming", () => {
    const { api } = stubApi();
    const flow = new StopFlow(api, "exp-a");
    flow.begin();
    flow.type("exp-a");
    flow.cancel();
    expect(flow.state.kind).toBe("idle");
  });
});

describe("StopFlow submit", () => {
  async function armedFlow(stubOverrides: Partial<Stub> = {}) {
    const { api, stub } = stubApi(stubOverrides);
    const flow = new StopFlow(api, "exp-a");
    flow.begin();
    flow.type("exp-a");
    return { flow, stub };
  }

  it("posts once and lands on the returned decision", async () => {
    const { flow, stub } = await armedFlow();
    await flow.submit(0.05, "enough data");
    expect(stub.stop).toHaveBeenCalledTimes(1);
    expect(stub.stop).toHaveBeenCalledWith("exp-a", 0.05, "enough data");
    expect(flow.state).toEqual({ kind: "decided", record, via: "stop" });
  });

  it("a double click produces a single request and a single record", async () => {
    let release: (r: DecisionRecord) => void = () => {};
    const pending = new Promise<DecisionRecord>((resolve) => {
      release = resolve;
    });
    const { flow, stub } = await armedFlow({ stop: vi.fn().mockReturnValue(pending) });

    const first = flow.submit(0.05, "click");
    const second = flow.submit(0.05, "click"); // no longer confirming, drops out
    release(record);
    await Promise.all([first, second]);

    expect(stub.stop).toHaveBeenCalledTimes(1);
    expect(flow.state).toMatchObject({ kind: "decided", via: "stop" });
  });

  it("after a decision the flow is closed for good", async () => {
    const { flow, stub } = await armedFlow();
    await flow.submit(0.05, "done");
    flow.begin();
    flow.type("exp-a");
    await flow.submit(0.05, "again");
    expect(stub.stop).toHaveBeenCalledTimes(1);
    expect(flow.state.kind).toBe("decided");
  });

  it("conflict means someone already stopped it: show their record", async () => {
    const existing = {
      id: "exp-a",
      status: "stopped",
      as_of: 12,
      p_value: raw("0.001"),
      chance_to_beat: raw("0.999"),
      decision: {
        alpha: raw("0.01"),
        rejected: true,
        stopped_at: raw("9"),
        actor: "cli",
        reason: "earlier stop",
      },
    } satisfies SnapshotView;

    const { flow, stub } = await armedFlow({
      stop: vi.fn().mockRejectedValue(new ApiError(409, "already stopped")),
      snapshot: vi.fn().mockResolvedValue(existing),
    });
    await flow.submit(0.05, "late click");

    expect(stub.snapshot).toHaveBeenCalledWith("exp-a");
    expect(flow.state).toMatchObject({
      kind: "decided",
      via: "conflict",
      record: { alpha: "0.01", rejected: true, stopped_at: 9, actor: "cli" },
    });
  });

  it("non-conflict failures surface as an error state and can be retried", async () => {
    const { flow } = await armedFlow({
      stop: vi.fn().mockRejectedValue(new ApiError(400, "alpha out of range")),
    });
    await flow.submit(5, "typo");
    expect(flow.state).toEqual({ kind: "error", message: "HTTP 400: alpha out of range" });

    flow.cancel();
    expect(flow.state.kind).toBe("idle");
  });

  it("notifies listeners on every transition", async () => {
    const { flow } = await armedFlow();
    const kinds: string[] = [];
    flow.onChange((s) => kinds.push(s.kind));
    await flow.submit(0.05, "listen");
    expect(kinds).toEqual(["submitting", "decided"]);
  });
});

describe("decisionBanner", () => {
  it("names the verdict, the level, and when the stop landed", () => {
    expect(decisionBanner(record)).toBe("Rejected at alpha 0.05 (stopped at update 7)");
    expect(decisionBanner({ ...record, rejected: false, alpha: raw("0.10") })).toBe(
      "Not rejected at alpha 0.10 (stopped at update 7)",
    );
  });
});
