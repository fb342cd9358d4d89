// Panel entry point: one session, five views, updates batched per frame.

import { PanelSession } from "./session.js";
import { dashboardModel, DashboardView } from "./views/dashboard.js";
import { emptyInspector, inspectorModel, InspectorView } from "./views/inspector.js";
import { timelineModel, TimelineView } from "./views/timeline.js";
import { RulesView } from "./views/rules.js";
import { ConsoleView } from "./views/console.js";

export function mountPanel(root: HTMLElement, baseUrl: string): PanelSession {
  root.innerHTML = `
    <header><h1>society panel</h1><span data-field="connection"></span></header>
    <section id="dashboard"></section>
    <section id="console"></section>
    <section id="inspector-box">
      <input data-field="inspect-id" placeholder="agent id, e.g. a00000000">
      <button data-field="inspect-go">inspect</button>
      <div id="inspector"></div>
    </section>
    <section id="rules"></section>
    <section id="timeline"></section>`;

  const session = new PanelSession(baseUrl);
  const dashboard = new DashboardView(root.querySelector("#dashboard")!);
  const inspector = new InspectorView(root.querySelector("#inspector")!);
  const timeline = new TimelineView(root.querySelector("#timeline")!);
  const rules = new RulesView(root.querySelector("#rules")!, session.api);
  const consoleView = new ConsoleView(root.querySelector("#console")!, session.api, () => {
    void session.refreshStatus();
  });
  rules.render();
  consoleView.render();

  let inspected = "";
  let frame = 0;
  const redraw = () => {
    frame = 0;
    const badge = root.querySelector('[data-field="connection"]') as HTMLElement;
    if (badge) badge.textContent = session.connection + (session.lastError ? ` (${session.lastError})` : "");
    dashboard.render(dashboardModel(session.lastStatus, session.events, session.metrics));
    timeline.render(
      timelineModel(session.events, session.lastStatus?.ticks_per_day ?? 24, () => "all"),
    );
    if (inspected) void refreshInspector();
  };
  const scheduleRedraw = () => {
    if (frame) return;
    const raf =
      typeof requestAnimationFrame === "function"
        ? requestAnimationFrame
        : (fn: () => void) => setTimeout(fn, 33) as unknown as number;
    frame = raf(redraw) as unknown as number;
  };

  async function refreshInspector(): Promise<void> {
    try {
      const doc = await session.api.agent(inspected);
      inspector.render(inspectorModel(doc, session.events));
    } catch {
      inspector.render(emptyInspector(inspected));
    }
  }

  root.querySelector('[data-field="inspect-go"]')?.addEventListener("click", () => {
    inspected = (root.querySelector('[data-field="inspect-id"]') as HTMLInputElement).value.trim();
    void refreshInspector();
  });

  session.onChange(scheduleRedraw);
  void session.connect();
  return session;
}
