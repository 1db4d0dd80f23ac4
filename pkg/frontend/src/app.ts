import { CommandError, SessionClient } from "./client.js";
import { SessionView } from "./view.js";

const API = (window as unknown as { LIGHTREC_API?: string }).LIGHTREC_API ?? "http://127.0.0.1:8321";

const client = new SessionClient(API);
const view = new SessionView();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = view.error ?? "";
  banner.style.display = view.error ? "block" : "none";

  const s = view.latest;
  el<HTMLSpanElement>("status").textContent = s
    ? `${s.status} · iteration ${s.iteration}`
    : "no session";
  el<HTMLSpanElement>("goodness").textContent = s
    ? `${s.goodness.toFixed(4)} (best ${s.best_goodness.toFixed(4)}, target ${s.eta})`
    : "–";

  const arrows = view.arrows();
  el<HTMLSpanElement>("arrow-r").textContent = arrows.r;
  el<HTMLSpanElement>("arrow-theta").textContent = arrows.theta;
  el<HTMLSpanElement>("arrow-phi").textContent = arrows.phi;

  const params = el<HTMLPreElement>("ball-params");
  params.textContent = view.ballParams ?? "";

  for (const id of ["nudge-r-up", "nudge-r-down", "nudge-theta-up", "nudge-theta-down",
                    "nudge-phi-up", "nudge-phi-down", "auto-step", "run-end"]) {
    el<HTMLButtonElement>(id).disabled = !view.controlsEnabled;
  }

  if (s && view.sessionId) {
    const img = el<HTMLImageElement>("ball");
    img.src = client.ballPngUrl(view.sessionId, s.version);
  }

  const canvas = el<HTMLCanvasElement>("sparkline");
  const ctx = canvas.getContext("2d");
  if (ctx) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const pts = view.sparkline(canvas.width, canvas.height - 2);
    ctx.strokeStyle = "#4a9";
    ctx.beginPath();
    pts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y + 1) : ctx.lineTo(x, y + 1)));
    ctx.stroke();
  }
}

function apply(payload: unknown): void {
  view.applySnapshot(payload);
  render();
}

async function command(fn: () => Promise<unknown>): Promise<void> {
  try {
    apply(await fn());
  } catch (err) {
    if (err instanceof CommandError) {
      view.surfaceCommandError(err.status, err.message);
    } else {
      view.surfaceCommandError(0, String(err));
    }
    render();
  }
}

function stepSizes() {
  return {
    r: Number(el<HTMLInputElement>("step-r").value),
    theta: Number(el<HTMLInputElement>("step-theta").value),
    phi: Number(el<HTMLInputElement>("step-phi").value),
  };
}

async function subscribe(id: string): Promise<void> {
  view.connected = true;
  render();
  for (;;) {
    try {
      await client.events(id, apply);
    } catch {
      // drop through to the retry below
    }
    if (view.terminated) break;
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  view.connected = view.latest !== null; // terminal state still renders
  render();
}

async function start(): Promise<void> {
  const preset = el<HTMLSelectElement>("preset").value;
  const oracle = preset === "flat"; // flat scenes cannot support the lighting solve
  await command(async () => {
    const state = await client.create({
      scene: { preset, resolution: 96 },
      lighting_mode: oracle ? "oracle" : "photometric",
    });
    const sizes = view.stepSizes;
    el<HTMLInputElement>("step-r").value = String(sizes.r);
    el<HTMLInputElement>("step-theta").value = String(sizes.theta);
    el<HTMLInputElement>("step-phi").value = String(sizes.phi);
    void subscribe(state.id);
    return state;
  });
}

function wire(): void {
  el<HTMLButtonElement>("start").addEventListener("click", () => void start());
  const nudges: Array<[string, (s: ReturnType<typeof stepSizes>) => [number, number, number]]> = [
    ["nudge-r-up", (s) => [s.r, 0, 0]],
    ["nudge-r-down", (s) => [-s.r, 0, 0]],
    ["nudge-theta-up", (s) => [0, s.theta, 0]],
    ["nudge-theta-down", (s) => [0, -s.theta, 0]],
    ["nudge-phi-up", (s) => [0, 0, s.phi]],
    ["nudge-phi-down", (s) => [0, 0, -s.phi]],
  ];
  for (const [id, make] of nudges) {
    el<HTMLButtonElement>(id).addEventListener("click", () => {
      const [dr, dtheta, dphi] = make(stepSizes());
      if (view.sessionId) {
        void command(() => client.manual(view.sessionId!, { dr, dtheta, dphi }));
      }
    });
  }
  el<HTMLButtonElement>("auto-step").addEventListener("click", () => {
    if (view.sessionId) void command(() => client.autoStep(view.sessionId!));
  });
  el<HTMLButtonElement>("run-end").addEventListener("click", () => {
    if (view.sessionId) void command(() => client.runToEnd(view.sessionId!));
  });
  render();
}

wire();
