// Panel session: connection lifecycle plus the live event feed.
//
// Holds no authoritative state; a browser refresh reconnects and re-derives
// everything from /status polling plus the /events stream.

import { ApiClient, MetricPoint, parseMetricLine, Status } from "./api.js";
import { EventRecord, parseEventLine } from "./events.js";
import { RingBuffer } from "./ring.js";

export type ConnectionState = "connecting" | "connected" | "retrying" | "closed";

export interface SessionOptions {
  pollIntervalMs?: number;
  retryBaseMs?: number;
  retryMaxMs?: number;
  streamCapacity?: number;
}

export class PanelSession {
  readonly api: ApiClient;
  readonly events: RingBuffer<EventRecord>;
  readonly metrics: RingBuffer<MetricPoint>;
  connection: ConnectionState = "connecting";
  lastStatus: Status | null = null;
  lastError: string | null = null;

  private listeners: Array<(s: PanelSession) => void> = [];
  private disposeStream: (() => void) | null = null;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private retryMs: number;
  private closed = false;

  constructor(baseUrl: string, private readonly options: SessionOptions = {}) {
    this.api = new ApiClient(baseUrl);
    this.events = new RingBuffer<EventRecord>(options.streamCapacity ?? 10000);
    this.metrics = new RingBuffer<MetricPoint>(options.streamCapacity ?? 10000);
    this.retryMs = options.retryBaseMs ?? 500;
  }

  onChange(listener: (s: PanelSession) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this);
  }

  async connect(): Promise<void> {
    this.connection = "connecting";
    this.notify();
    try {
      this.lastStatus = await this.api.status();
      this.lastError = null;
      this.connection = "connected";
      this.retryMs = this.options.retryBaseMs ?? 500;
      this.openStream();
      this.schedulePoll();
    } catch (err) {
      this.lastError = String(err);
      this.connection = "retrying";
      this.scheduleRetry();
    }
    this.notify();
  }

  private openStream(): void {
    this.disposeStream?.();
    this.disposeStream = this.api.subscribeEvents(
      (frame) => {
        if (frame.type === "metric") {
          const point = parseMetricLine(frame.data);
          if (point) {
            this.metrics.push(point);
            this.notify();
          }
          return;
        }
        const record = parseEventLine(frame.data);
        if (record) {
          this.events.push(record);
          this.notify();
        }
      },
      () => {
        if (!this.closed) {
          this.connection = "retrying";
          this.scheduleRetry();
          this.notify();
        }
      },
    );
  }

  private schedulePoll(): void {
    if (this.pollTimer) clearTimeout(this.pollTimer);
    const interval = this.options.pollIntervalMs ?? 1000;
    this.pollTimer = setTimeout(async () => {
      if (this.closed) return;
      try {
        this.lastStatus = await this.api.status();
        this.lastError = null;
        if (this.connection !== "connected") {
          this.connection = "connected";
          this.openStream();
        }
      } catch (err) {
        this.lastError = String(err);
        this.connection = "retrying";
      }
      this.notify();
      this.schedulePoll();
    }, interval);
  }

  private scheduleRetry(): void {
    const max = this.options.retryMaxMs ?? 10000;
    const delay = Math.min(this.retryMs, max);
    this.retryMs = Math.min(this.retryMs * 2, max);
    setTimeout(() => {
      if (!this.closed) void this.connect();
    }, delay);
  }

  async refreshStatus(): Promise<Status> {
    this.lastStatus = await this.api.status();
    this.notify();
    return this.lastStatus;
  }

  close(): void {
    this.closed = true;
    this.connection = "closed";
    this.disposeStream?.();
    if (this.pollTimer) clearTimeout(this.pollTimer);
    this.notify();
  }
}
