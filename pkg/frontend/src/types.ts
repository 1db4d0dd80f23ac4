export interface SicParams {
  theta: number;
  phi: number;
  area: number;
}

export interface BallPayload {
  iso: number;
  ref: SicParams;
  cur: SicParams | null;
  goodness: number;
}

export type SessionStatus = "running" | "converged" | "stalled" | "max_iter";

export interface Advisory {
  r: number;
  theta: number;
  phi: number;
}

export interface SessionState {
  id: string;
  version: number;
  iteration: number;
  status: SessionStatus;
  goodness: number;
  best_goodness: number;
  eta: number;
  advisory: Advisory;
  lambda: number[]; // scene units, degrees, degrees
  ball: BallPayload;
  events: string[];
}

const STATUSES = new Set(["running", "converged", "stalled", "max_iter"]);

function isSic(v: unknown): v is SicParams {
  if (v === null || typeof v !== "object") return false;
  const s = v as Record<string, unknown>;
  return (
    typeof s.theta === "number" && typeof s.phi === "number" && typeof s.area === "number"
  );
}

/** Validate a raw snapshot payload; returns an error string or null. */
export function checkSessionState(v: unknown): string | null {
  if (v === null || typeof v !== "object") return "payload is not an object";
  const s = v as Record<string, unknown>;
  if (typeof s.id !== "string") return "missing session id";
  if (typeof s.version !== "number") return "missing version";
  if (typeof s.iteration !== "number") return "missing iteration";
  if (typeof s.status !== "string" || !STATUSES.has(s.status)) {
    return `bad status ${String(s.status)}`;
  }
  if (typeof s.goodness !== "number") return "missing goodness";
  const adv = s.advisory as Record<string, unknown> | undefined;
  if (!adv || typeof adv.r !== "number" || typeof adv.theta !== "number" || typeof adv.phi !== "number") {
    return "missing advisory";
  }
  const ball = s.ball as Record<string, unknown> | undefined;
  if (!ball || typeof ball.iso !== "number" || typeof ball.goodness !== "number") {
    return "missing ball parameters";
  }
  if (!isSic(ball.ref)) return "missing reference circle parameters";
  if (ball.cur !== null && !isSic(ball.cur)) return "bad current circle parameters";
  return null;
}
