// Dashboard: tick, population, run state, per-pod load.

import { MetricPoint, Status } from "../api.js";
import { EventRecord } from "../events.js";
import { RingBuffer } from "../ring.js";

export interface DashboardModel {
  tick: number;
  day: number;
  stateBadge: string;
  population: number;
  births: number;
  deaths: number;
  podLoads: Array<{ pod: string; count: number; share: number }>;
  populationSeries: Array<{ tick: number; value: number }>;
}

export function dashboardModel(
  status: Status | null,
  events: RingBuffer<EventRecord>,
  metrics?: RingBuffer<MetricPoint>,
): DashboardModel {
  const births = events.filter((e) => e.kind === "birth").length;
  const deaths = events.filter((e) => e.kind === "death").length;
  const pods = status?.pods ?? [];
  const total = Math.max(
    1,
    pods.reduce((acc, p) => acc + p.agent_count, 0),
  );
  let series: Array<{ tick: number; value: number }> =
    metrics
      ?.filter((p) => p.name === "population")
      .map((p) => ({ tick: p.tick, value: p.value })) ?? [];
  if (series.length === 0 && status) {
    // no streamed metric yet: re-derive the trajectory from birth/death
    // events via the conservation identity
    let population = status.population - births + deaths;
    const byTick = new Map<number, number>();
    for (const e of events.values()) {
      if (e.kind === "birth") byTick.set(e.tick, (byTick.get(e.tick) ?? 0) + 1);
      if (e.kind === "death") byTick.set(e.tick, (byTick.get(e.tick) ?? 0) - 1);
    }
    for (const tick of [...byTick.keys()].sort((a, b) => a - b)) {
      population += byTick.get(tick)!;
      series.push({ tick, value: population });
    }
  }
  return {
    tick: status?.tick ?? 0,
    day: status ? Math.floor(status.tick / status.ticks_per_day) : 0,
    stateBadge: status?.state ?? "unknown",
    population: status?.population ?? 0,
    births,
    deaths,
    podLoads: pods.map((p) => ({ pod: p.pod, count: p.agent_count, share: p.agent_count / total })),
    populationSeries: series,
  };
}

export class DashboardView {
  constructor(private readonly root: HTMLElement) {}

  render(model: DashboardModel): void {
    const bars = model.podLoads
      .map(
        (p) =>
          `<div class="pod-row"><span class="pod-name">${p.pod}</span>` +
          `<span class="pod-bar" style="width:${Math.round(p.share * 200)}px"></span>` +
          `<span class="pod-count">${p.count}</span></div>`,
      )
      .join("");
    this.root.innerHTML = `
      <div class="stat-grid">
        <div class="stat"><b data-field="tick">${model.tick}</b><label>tick (day ${model.day})</label></div>
        <div class="stat"><b data-field="population">${model.population}</b><label>population</label></div>
        <div class="stat"><b data-field="births">${model.births}</b><label>births seen</label></div>
        <div class="stat"><b data-field="deaths">${model.deaths}</b><label>deaths seen</label></div>
        <div class="stat"><b data-field="state" class="badge badge-${model.stateBadge}">${model.stateBadge}</b><label>state</label></div>
      </div>
      <div class="pods" data-field="pods">${bars}</div>
      <canvas data-field="population-chart" width="560" height="120"></canvas>`;
    this.drawSeries(model.populationSeries);
  }

  private drawSeries(series: Array<{ tick: number; value: number }>): void {
    const canvas = this.root.querySelector(
      'canvas[data-field="population-chart"]',
    ) as HTMLCanvasElement | null;
    const ctx = canvas?.getContext?.("2d");
    if (!canvas || !ctx || series.length < 2) return;
    const w = canvas.width;
    const h = canvas.height;
    ctx.clearRect(0, 0, w, h);
    const xs = series.map((p) => p.tick);
    const ys = series.map((p) => p.value);
    const x0 = Math.min(...xs);
    const x1 = Math.max(...xs);
    const y1 = Math.max(...ys, 1);
    ctx.beginPath();
    series.forEach((p, i) => {
      const x = ((p.tick - x0) / Math.max(1, x1 - x0)) * (w - 8) + 4;
      const y = h - 4 - (p.value / y1) * (h - 8);
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.strokeStyle = "#2b7";
    ctx.lineWidth = 2;
    ctx.stroke();
  }
}
