// Timeline: daily behavior-category proportions derived from the stream.

import { EventRecord } from "../events.js";
import { RingBuffer } from "../ring.js";

export interface TimelineModel {
  categories: string[];
  days: Array<{ day: number; proportions: Record<string, number> }>;
}

export function timelineModel(
  events: RingBuffer<EventRecord>,
  ticksPerDay: number,
  categoryOf: (action: string) => string,
): TimelineModel {
  const byDay = new Map<number, Map<string, number>>();
  const categories = new Set<string>();
  for (const e of events.values()) {
    if (e.kind !== "action") continue;
    const action = e.attrs["action"] ?? "";
    if (action.startsWith("env:")) continue;
    const day = Math.floor(e.tick / ticksPerDay);
    const category = categoryOf(action);
    categories.add(category);
    const counts = byDay.get(day) ?? new Map();
    counts.set(category, (counts.get(category) ?? 0) + 1);
    byDay.set(day, counts);
  }
  const sorted = [...categories].sort();
  const days = [...byDay.keys()].sort((a, b) => a - b).map((day) => {
    const counts = byDay.get(day)!;
    const total = [...counts.values()].reduce((a, b) => a + b, 0) || 1;
    const proportions: Record<string, number> = {};
    for (const c of sorted) proportions[c] = (counts.get(c) ?? 0) / total;
    return { day, proportions };
  });
  return { categories: sorted, days };
}

export class TimelineView {
  constructor(private readonly root: HTMLElement) {}

  render(model: TimelineModel): void {
    if (model.days.length === 0) {
      this.root.innerHTML = '<p class="empty">no behavior data yet</p>';
      return;
    }
    const header = model.categories.map((c) => `<th>${c}</th>`).join("");
    const rows = model.days
      .map(
        (d) =>
          `<tr><td>${d.day}</td>${model.categories
            .map((c) => `<td>${(d.proportions[c] * 100).toFixed(1)}%</td>`)
            .join("")}</tr>`,
      )
      .join("");
    this.root.innerHTML = `<table class="timeline" data-field="proportions">
      <thead><tr><th>day</th>${header}</tr></thead><tbody>${rows}</tbody></table>`;
  }
}
