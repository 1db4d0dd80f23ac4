import { BallPayload, SessionState, checkSessionState } from "./types.js";

export interface HistoryPoint {
  version: number;
  iteration: number;
  goodness: number;
}

export interface StepSizes {
  r: number;
  theta: number; // degrees
  phi: number; // degrees
}

/**
 * View-model of one session panel.  Pure state transitions, no DOM: the
 * browser shell renders from it, the tests drive it directly.  It stores the
 * ball parameters exactly as the server sent them; nothing here rederives
 * circle geometry, directions, or magnitudes.
 */
export class SessionView {
  sessionId: string | null = null;
  latest: SessionState | null = null;
  ballParams: string | null = null; // canonical JSON of the latest ball payload
  history: HistoryPoint[] = [];
  stepSizes: StepSizes = { r: 0.25, theta: 1.0, phi: 1.0 };
  connected = false;
  error: string | null = null;
  private seeded = false;

  get terminated(): boolean {
    return this.latest !== null && this.latest.status !== "running";
  }

  get controlsEnabled(): boolean {
    return this.connected && this.latest !== null && !this.terminated;
  }

  /** Apply a raw snapshot payload; stale or duplicate versions are ignored. */
  applySnapshot(payload: unknown): boolean {
    const problem = checkSessionState(payload);
    if (problem !== null) {
      this.error = `malformed state payload: ${problem}`;
      return false;
    }
    const state = payload as SessionState;
    if (this.latest !== null && state.version <= this.latest.version) {
      return false; // reconnects resume from latest without duplicating rows
    }
    this.sessionId = state.id;
    this.latest = state;
    this.ballParams = JSON.stringify(state.ball);
    this.history.push({
      version: state.version,
      iteration: state.iteration,
      goodness: state.goodness,
    });
    if (!this.seeded && Array.isArray(state.lambda) && state.lambda.length === 3) {
      // sliders start from the session's initial magnitudes
      this.stepSizes = { r: state.lambda[0], theta: state.lambda[1], phi: state.lambda[2] };
      this.seeded = true;
    }
    this.error = null;
    return true;
  }

  surfaceCommandError(status: number, message: string): void {
    this.error =
      status === 409 ? `session is finished: ${message}` : `command failed: ${message}`;
  }

  ball(): BallPayload | null {
    return this.latest?.ball ?? null;
  }

  /** Advisory arrows as glyphs, one per axis (radial, azimuth, polar). */
  arrows(): { r: string; theta: string; phi: string } {
    const glyph = (v: number, neg: string, pos: string) => (v === 0 ? "·" : v > 0 ? pos : neg);
    const a = this.latest?.advisory ?? { r: 0, theta: 0, phi: 0 };
    return {
      r: glyph(a.r, "closer", "farther"),
      theta: glyph(a.theta, "−azimuth", "+azimuth"),
      phi: glyph(a.phi, "−polar", "+polar"),
    };
  }

  /** Sparkline samples normalized to [0, 1] drawing space. */
  sparkline(width: number, height: number): Array<[number, number]> {
    if (this.history.length === 0) return [];
    const n = this.history.length;
    return this.history.map((p, i) => [
      n === 1 ? 0 : (i / (n - 1)) * width,
      (1 - p.goodness) * height,
    ]);
  }
}
