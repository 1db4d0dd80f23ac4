import { SessionClient } from "./client.js";
import { SessionState } from "./types.js";

export interface FollowOptions {
  stepR: number;
  stepThetaDeg: number;
  stepPhiDeg: number;
  goal: number;
  maxSteps: number;
}

export const DEFAULT_FOLLOW: FollowOptions = {
  stepR: 0.25,
  stepThetaDeg: 1.0,
  stepPhiDeg: 1.0,
  goal: 0.95,
  maxSteps: 400,
};

/**
 * Scripted operator: keep nudging along the server's advisory direction with
 * fixed per-axis steps until the goodness goal is reached.  This is the same
 * loop a human runs with the on-screen arrows.
 */
export async function followAdvisory(
  client: SessionClient,
  sessionId: string,
  initial: SessionState,
  options: Partial<FollowOptions> = {},
): Promise<SessionState> {
  const opt = { ...DEFAULT_FOLLOW, ...options };
  let state = initial;
  for (let step = 0; step < opt.maxSteps; step += 1) {
    if (state.status !== "running" || state.goodness > opt.goal) break;
    state = await client.manual(sessionId, {
      dr: opt.stepR * state.advisory.r,
      dtheta: opt.stepThetaDeg * state.advisory.theta,
      dphi: opt.stepPhiDeg * state.advisory.phi,
    });
  }
  return state;
}
