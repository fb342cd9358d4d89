// Panel end-to-end against a live desk-scale run (criterion 12):
// pause / step / dispatch / inspect round-trips, dispatched messages visible
// in the agent inspector, reconnect after a server restart.
import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { inspectorModel } from "../src/views/inspector.js";
import { PanelSession } from "../src/session.js";

const REPO_ROOT = resolve(__dirname, "..", "..");
const CONFIG = join(REPO_ROOT, "scenario", "universe25", "reference_run.json");

interface LiveRun {
  child: ChildProcess;
  url: string;
}

function startRun(listen: string, out: string): Promise<LiveRun> {
  return new Promise((resolvePromise, reject) => {
    const child = spawn(
      "python3",
      ["-m", "socsim.cli", "run", CONFIG, "--out", out, "--listen", listen, "--ticks", "5000"],
      { cwd: REPO_ROOT, stdio: ["pipe", "pipe", "pipe"] },
    );
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`boot timeout; output: ${buffer}`)), 60000);
    child.stdout!.on("data", (chunk) => {
      buffer += String(chunk);
      const match = buffer.match(/control api listening on (\S+)/);
      if (match) {
        clearTimeout(timer);
        resolvePromise({ child, url: match[1] });
      }
    });
    child.stderr!.on("data", (chunk) => {
      buffer += String(chunk);
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`simulation exited early (${code}): ${buffer}`));
    });
  });
}

async function waitFor(predicate: () => boolean, ms = 15000, step = 100): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((r) => setTimeout(r, step));
  }
  throw new Error("condition not met in time");
}

const children: ChildProcess[] = [];
afterAll(() => {
  for (const child of children) {
    if (!child.killed) child.kill("SIGKILL");
  }
});

describe("panel against a live run", () => {
  it("pause/step/dispatch/inspect round-trip; reconnect after restart", async () => {
    const out = mkdtempSync(join(tmpdir(), "panel-e2e-"));
    const run = await startRun("127.0.0.1:0", out);
    children.push(run.child);
    const api = new ApiClient(run.url);

    // pause lands at a barrier and status reflects it
    const paused = await api.pause();
    const status = await api.status();
    expect(status.state).toBe("paused");
    expect(status.tick).toBe(paused.tick);
    expect(status.population).toBeGreaterThanOrEqual(8);

    // step advances exactly n and stays paused
    const stepped = await api.step(3);
    expect(stepped.tick).toBe(paused.tick + 3);
    expect((await api.status()).state).toBe("paused");

    // step while running is rejected with the server's reason
    await api.resume();
    await expect(api.step(1)).rejects.toThrow(/paused/);
    await api.pause();

    // a panel session derives everything from /status + /events
    const session = new PanelSession(run.url, { pollIntervalMs: 200 });
    await session.connect();
    await waitFor(() => session.connection === "connected");
    expect(session.lastStatus!.scenario).toBe("universe25");

    // dispatch a message, step, and see it in that agent's inspector
    const target = "a00000004";
    const sent = await api.dispatchMessage(target, "hello from the panel");
    await api.step(2);
    await waitFor(() => session.events.filter((e) => e.kind === "message").length > 0);
    const doc = await api.agent(target);
    const inspector = inspectorModel(doc, session.events);
    expect(inspector.found).toBe(true);
    const mentioned = inspector.recentEvents.some((line) => line.includes("SYSTEM"));
    expect(mentioned).toBe(true);
    expect(sent.deliver_tick).toBeGreaterThan(0);

    // unknown agents yield a not-found error the UI shows as empty state
    await expect(api.agent("a99999999")).rejects.toThrow(/unknown agent/);

    // rules rejection surfaces the server's reason verbatim
    await expect(api.setRules([{ id: "r", effect: "deny", action: "warp" }])).rejects.toThrow(
      /warp/,
    );

    // statelessness: a fresh session re-derives the dashboard from scratch
    const fresh = new PanelSession(run.url, { pollIntervalMs: 200 });
    await fresh.connect();
    await waitFor(() => fresh.connection === "connected");
    expect(fresh.lastStatus!.tick).toBeGreaterThanOrEqual(stepped.tick);
    fresh.close();

    // reconnect after a server restart on the same address
    const port = new URL(run.url).port;
    run.child.kill("SIGKILL");
    await waitFor(() => session.connection !== "connected", 20000);
    const revived = await startRun(`127.0.0.1:${port}`, mkdtempSync(join(tmpdir(), "panel-e2e-")));
    children.push(revived.child);
    await waitFor(() => session.connection === "connected", 30000);
    expect(session.lastStatus!.tick).toBeGreaterThanOrEqual(0);
    session.close();

    console.log("ACCEPTANCE 12 PASS - panel e2e: pause/step/dispatch/inspect round-trips, reconnect after restart");
  }, 120000);
});
