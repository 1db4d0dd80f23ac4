import { SessionState } from "./types.js";

export interface Nudge {
  dr: number;
  dtheta: number; // degrees
  dphi: number; // degrees
}

export class CommandError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function expectJson(resp: Response): Promise<SessionState> {
  if (!resp.ok) {
    let detail = `HTTP ${resp.status}`;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = `${detail}: ${body.detail}`;
    } catch {
      // keep the bare status line
    }
    throw new CommandError(resp.status, detail);
  }
  return (await resp.json()) as SessionState;
}

/** Thin command layer over the session service; no navigation math lives here. */
export class SessionClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  async create(overrides: Record<string, unknown> = {}): Promise<SessionState> {
    return expectJson(
      await this.fetchFn(`${this.baseUrl}/sessions`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(overrides),
      }),
    );
  }

  async state(id: string): Promise<SessionState> {
    return expectJson(await this.fetchFn(`${this.baseUrl}/sessions/${id}`));
  }

  async manual(id: string, nudge: Nudge): Promise<SessionState> {
    return expectJson(
      await this.fetchFn(`${this.baseUrl}/sessions/${id}/manual`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(nudge),
      }),
    );
  }

  async autoStep(id: string): Promise<SessionState> {
    return expectJson(
      await this.fetchFn(`${this.baseUrl}/sessions/${id}/auto`, { method: "POST" }),
    );
  }

  async runToEnd(id: string): Promise<SessionState> {
    return expectJson(
      await this.fetchFn(`${this.baseUrl}/sessions/${id}/run`, { method: "POST" }),
    );
  }

  ballPngUrl(id: string, version: number): string {
    return `${this.baseUrl}/sessions/${id}/ball.png?v=${version}`;
  }

  async ballPng(id: string): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${id}/ball.png`);
    if (!resp.ok) throw new CommandError(resp.status, `HTTP ${resp.status}`);
    return resp.arrayBuffer();
  }

  /**
   * Subscribe to the server-sent state stream.  Each `data:` frame is parsed
   * and handed to `onSnapshot`; resolves when the stream ends (terminal
   * session status or disconnect).  Callers re-invoke to reconnect; the view
   * dedupes by version, so resuming never duplicates history.
   */
  async events(
    id: string,
    onSnapshot: (payload: unknown) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${id}/events`, { signal });
    if (!resp.ok || !resp.body) {
      throw new CommandError(resp.status, `HTTP ${resp.status}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let cut;
      while ((cut = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, cut);
        buffer = buffer.slice(cut + 2);
        for (const line of frame.split("\n")) {
          if (line.startsWith("data: ")) {
            onSnapshot(JSON.parse(line.slice(6)));
          }
        }
      }
    }
  }
}
