// Thin client over the simulation control API. The panel holds no
// authoritative state: everything here is re-derivable from /status and
// /events.

export interface PodStats {
  pod: string;
  agent_count: number;
  memory_estimate: number;
  tick_duration_ms: number;
  stale: boolean;
}

export interface Status {
  tick: number;
  state: string;
  population: number;
  tick_limit: number;
  scenario: string;
  seed: number;
  ticks_per_day: number;
  pods: PodStats[];
}

export interface AgentDoc {
  id: string;
  alive: boolean;
  pod: string | null;
  profile: Record<string, unknown>;
  state: Record<string, unknown>;
  recent_events: string[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function asJson(resp: Response): Promise<any> {
  const doc = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, doc.error ?? `http ${resp.status}`);
  }
  return doc;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async status(): Promise<Status> {
    return asJson(await fetch(this.url("/status")));
  }

  async agent(id: string): Promise<AgentDoc> {
    return asJson(await fetch(this.url(`/agents/${id}`)));
  }

  private async post(path: string, body: unknown = {}): Promise<any> {
    return asJson(
      await fetch(this.url(path), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  pause(): Promise<{ state: string; tick: number }> {
    return this.post("/pause");
  }

  resume(): Promise<{ state: string; tick: number }> {
    return this.post("/resume");
  }

  step(n = 1): Promise<{ state: string; tick: number }> {
    return this.post("/step", { n });
  }

  setRules(rules: unknown[]): Promise<{ count: number }> {
    return this.post("/rules", { rules });
  }

  rollback(target: { snapshot?: string; tick?: number }): Promise<{ tick: number }> {
    return this.post("/rollback", target);
  }

  dispatchMessage(agentId: string, text: string): Promise<{ message_id: string; deliver_tick: number }> {
    return this.post(`/agents/${agentId}/message`, { text });
  }

  broadcast(name: string, filter: Record<string, unknown>): Promise<{ delivered: number }> {
    return this.post("/broadcast", { name, filter });
  }

  /** Subscribe to the server-sent event stream; returns a disposer.
   *  Frames are either events (canonical record lines) or metric points
   *  (``event: metric`` frames). Implemented over fetch streaming so it runs
   *  in browsers and node alike. */
  subscribeEvents(
    onFrame: (frame: SseFrame) => void,
    onError?: (err: unknown) => void,
  ): () => void {
    const controller = new AbortController();
    const parser = new SseParser(onFrame);
    (async () => {
      try {
        const resp = await fetch(this.url("/events"), { signal: controller.signal });
        if (!resp.body) throw new Error("no stream body");
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          parser.feed(decoder.decode(value, { stream: true }));
        }
      } catch (err) {
        if (!controller.signal.aborted) onError?.(err);
      }
    })();
    return () => controller.abort();
  }
}

export interface SseFrame {
  type: string; // "event" unless the server named the frame (e.g. "metric")
  data: string;
}

export class SseParser {
  private buffer = "";
  private type = "event";

  constructor(private readonly onFrame: (frame: SseFrame) => void) {}

  feed(chunk: string): void {
    this.buffer += chunk;
    let nl;
    while ((nl = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, nl);
      this.buffer = this.buffer.slice(nl + 1);
      if (line.startsWith("event: ")) {
        this.type = line.slice(7).trim();
      } else if (line.startsWith("data: ")) {
        this.onFrame({ type: this.type, data: line.slice(6) });
      } else if (line.trim() === "") {
        this.type = "event"; // frame boundary resets the event name
      }
    }
  }
}

export interface MetricPoint {
  name: string;
  tick: number;
  value: number;
}

export function parseMetricLine(line: string): MetricPoint | null {
  const fields: Record<string, string> = {};
  for (const part of line.split("\t")) {
    const eq = part.indexOf("=");
    if (eq < 0) return null;
    fields[part.slice(0, eq)] = part.slice(eq + 1);
  }
  if (!fields["name"] || fields["tick"] === undefined || fields["value"] === undefined) return null;
  return { name: fields["name"], tick: parseInt(fields["tick"], 10), value: parseFloat(fields["value"]) };
}
