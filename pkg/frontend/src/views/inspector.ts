// Agent inspector: profile, state vector, recent events involving the agent.

import { AgentDoc } from "../api.js";
import { describeEvent, EventRecord, involvesAgent } from "../events.js";
import { RingBuffer } from "../ring.js";

export interface InspectorModel {
  id: string;
  found: boolean;
  alive: boolean;
  deathTick: number | null;
  profileRows: Array<[string, string]>;
  stateRows: Array<[string, string]>;
  recentEvents: string[];
}

export function emptyInspector(id: string): InspectorModel {
  return {
    id,
    found: false,
    alive: false,
    deathTick: null,
    profileRows: [],
    stateRows: [],
    recentEvents: [],
  };
}

function formatValue(value: unknown): string {
  if (typeof value === "number") {
    return Number.isInteger(value) ? String(value) : value.toFixed(3);
  }
  return String(value);
}

export function inspectorModel(
  doc: AgentDoc,
  events: RingBuffer<EventRecord>,
  limit = 12,
): InspectorModel {
  const involved = events.filter((e) => involvesAgent(e, doc.id));
  const death = involved.find((e) => e.kind === "death" && e.subject === doc.id);
  return {
    id: doc.id,
    found: true,
    alive: doc.alive,
    deathTick: death ? death.tick : null,
    profileRows: Object.entries(doc.profile).map(([k, v]) => [k, formatValue(v)]),
    stateRows: Object.entries(doc.state)
      .filter(([, v]) => typeof v === "number" || typeof v === "string" || typeof v === "boolean")
      .map(([k, v]) => [k, formatValue(v)]),
    recentEvents: involved.slice(-limit).map(describeEvent),
  };
}

export class InspectorView {
  constructor(private readonly root: HTMLElement) {}

  render(model: InspectorModel): void {
    if (!model.found) {
      this.root.innerHTML = `<p class="empty" data-field="empty">no agent ${model.id || "selected"}</p>`;
      return;
    }
    const badge = model.alive
      ? '<span class="badge badge-alive" data-field="alive">alive</span>'
      : `<span class="badge badge-dead" data-field="alive">dead${model.deathTick !== null ? ` (tick ${model.deathTick})` : ""}</span>`;
    const rows = (pairs: Array<[string, string]>) =>
      pairs.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
    this.root.innerHTML = `
      <h3 data-field="agent-id">${model.id} ${badge}</h3>
      <div class="inspector-grid">
        <table class="kv" data-field="profile"><caption>profile</caption>${rows(model.profileRows)}</table>
        <table class="kv" data-field="state"><caption>state</caption>${rows(model.stateRows)}</table>
      </div>
      <ul class="events" data-field="recent">${model.recentEvents
        .map((line) => `<li>${line}</li>`)
        .join("")}</ul>`;
  }
}
