import { readFileSync, readdirSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { SessionView } from "../src/view.js";
import { checkSessionState } from "../src/types.js";

function snapshot(overrides: Record<string, unknown> = {}) {
  return {
    id: "abc123",
    version: 1,
    iteration: 0,
    status: "running",
    goodness: 0.42,
    best_goodness: 0.42,
    eta: 0.98,
    advisory: { r: -1, theta: 1, phi: 0 },
    lambda: [1.0, 5.0, 5.0],
    ball: {
      iso: 0.72,
      ref: { theta: -1.2, phi: 0.78, area: 1.57 },
      cur: { theta: 0.5, phi: 0.4, area: 1.1 },
      goodness: 0.42,
    },
    events: [],
    ...overrides,
  };
}

describe("session view model", () => {
  it("stores ball parameters exactly as received", () => {
    const view = new SessionView();
    const payload = snapshot();
    expect(view.applySnapshot(payload)).toBe(true);
    expect(view.ballParams).toBe(JSON.stringify(payload.ball));
    expect(view.ball()).toEqual(payload.ball);
  });

  it("ignores duplicate and stale versions so reconnects do not duplicate history", () => {
    const view = new SessionView();
    view.applySnapshot(snapshot({ version: 1 }));
    view.applySnapshot(snapshot({ version: 2, iteration: 1, goodness: 0.5 }));
    expect(view.applySnapshot(snapshot({ version: 2, iteration: 1, goodness: 0.5 }))).toBe(false);
    expect(view.applySnapshot(snapshot({ version: 1 }))).toBe(false);
    expect(view.history.map((p) => p.version)).toEqual([1, 2]);
  });

  it("raises the error banner on malformed payloads and keeps the last state", () => {
    const view = new SessionView();
    view.applySnapshot(snapshot());
    const bad = snapshot() as Record<string, unknown>;
    delete bad.ball;
    expect(view.applySnapshot(bad)).toBe(false);
    expect(view.error).toMatch(/malformed/);
    expect(view.latest?.version).toBe(1);
  });

  it("disables controls once the session terminates", () => {
    const view = new SessionView();
    view.connected = true;
    view.applySnapshot(snapshot());
    expect(view.controlsEnabled).toBe(true);
    view.applySnapshot(snapshot({ version: 2, status: "converged" }));
    expect(view.terminated).toBe(true);
    expect(view.controlsEnabled).toBe(false);
  });

  it("seeds step sizes from the first snapshot's magnitudes only", () => {
    const view = new SessionView();
    view.applySnapshot(snapshot({ lambda: [2.0, 7.0, 3.0] }));
    expect(view.stepSizes).toEqual({ r: 2.0, theta: 7.0, phi: 3.0 });
    view.applySnapshot(snapshot({ version: 2, lambda: [9.0, 9.0, 9.0] }));
    expect(view.stepSizes).toEqual({ r: 2.0, theta: 7.0, phi: 3.0 });
  });

  it("surfaces 409s as a finished-session message", () => {
    const view = new SessionView();
    view.surfaceCommandError(409, "HTTP 409: session is converged");
    expect(view.error).toMatch(/finished/);
  });

  it("maps advisory signs to arrow glyphs", () => {
    const view = new SessionView();
    view.applySnapshot(snapshot());
    expect(view.arrows()).toEqual({ r: "closer", theta: "+azimuth", phi: "·" });
  });

  it("builds a bounded sparkline", () => {
    const view = new SessionView();
    view.applySnapshot(snapshot({ version: 1, goodness: 0.2 }));
    view.applySnapshot(snapshot({ version: 2, goodness: 1.0 }));
    const pts = view.sparkline(100, 50);
    expect(pts).toHaveLength(2);
    expect(pts[0][0]).toBe(0);
    expect(pts[1]).toEqual([100, 0]);
  });
});

describe("payload validation", () => {
  it("accepts a complete snapshot", () => {
    expect(checkSessionState(snapshot())).toBeNull();
  });

  it("rejects missing circles and bad statuses", () => {
    expect(checkSessionState(snapshot({ status: "weird" }))).toMatch(/status/);
    const noRef = snapshot();
    (noRef.ball as Record<string, unknown>).ref = null;
    expect(checkSessionState(noRef)).toMatch(/reference circle/);
  });

  it("allows a null current circle (too-weak lighting)", () => {
    const payload = snapshot();
    (payload.ball as Record<string, unknown>).cur = null;
    expect(checkSessionState(payload)).toBeNull();
  });
});

describe("shell purity", () => {
  it("client code contains no circle or direction math", () => {
    const srcDir = fileURLToPath(new URL("../src", import.meta.url));
    const banned = ["Math.acos", "Math.asin", "Math.atan", "Math.sqrt", "Math.sin", "Math.cos", "Math.sign"];
    for (const file of readdirSync(srcDir)) {
      const text = readFileSync(join(srcDir, file), "utf-8");
      for (const token of banned) {
        expect(text.includes(token), `${file} uses ${token}`).toBe(false);
      }
    }
  });
});
