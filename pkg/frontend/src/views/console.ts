// Command console: pause / resume / step / dispatch / rollback, with the
// server's reply (or rejection) echoed verbatim.

import { ApiClient, ApiError } from "../api.js";

export class ConsoleView {
  history: string[] = [];

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly onSteered: () => void = () => {},
  ) {}

  render(): void {
    this.root.innerHTML = `
      <div class="console-buttons">
        <button data-cmd="pause">pause</button>
        <button data-cmd="resume">resume</button>
        <button data-cmd="step">step</button>
        <input data-field="step-n" type="number" value="1" min="1" style="width:4em">
      </div>
      <div class="console-dispatch">
        <input data-field="dispatch-agent" placeholder="agent id">
        <input data-field="dispatch-text" placeholder="message text">
        <button data-cmd="dispatch">dispatch</button>
      </div>
      <div class="console-rollback">
        <input data-field="rollback-tick" type="number" placeholder="snapshot tick">
        <button data-cmd="rollback">rollback</button>
      </div>
      <ul class="console-log" data-field="log">${this.history
        .map((h) => `<li>${h}</li>`)
        .join("")}</ul>`;
    this.root.querySelectorAll("button[data-cmd]").forEach((button) => {
      button.addEventListener("click", () =>
        void this.run((button as HTMLElement).dataset["cmd"]!),
      );
    });
  }

  private input(field: string): string {
    return (this.root.querySelector(`[data-field="${field}"]`) as HTMLInputElement)?.value ?? "";
  }

  async run(command: string): Promise<void> {
    let line: string;
    try {
      switch (command) {
        case "pause": {
          const r = await this.api.pause();
          line = `paused at tick ${r.tick}`;
          break;
        }
        case "resume": {
          const r = await this.api.resume();
          line = `running from tick ${r.tick}`;
          break;
        }
        case "step": {
          const n = parseInt(this.input("step-n") || "1", 10);
          const r = await this.api.step(n);
          line = `stepped to tick ${r.tick}`;
          break;
        }
        case "dispatch": {
          const r = await this.api.dispatchMessage(this.input("dispatch-agent"), this.input("dispatch-text"));
          line = `dispatched ${r.message_id}, delivered at tick ${r.deliver_tick}`;
          break;
        }
        case "rollback": {
          const r = await this.api.rollback({ tick: parseInt(this.input("rollback-tick"), 10) });
          line = `rolled back to tick ${r.tick}`;
          break;
        }
        default:
          line = `unknown command ${command}`;
      }
    } catch (err) {
      line = err instanceof ApiError ? `rejected: ${err.message}` : `error: ${err}`;
    }
    this.history.push(line);
    const log = this.root.querySelector('[data-field="log"]');
    if (log) log.innerHTML = this.history.map((h) => `<li>${h}</li>`).join("");
    this.onSteered();
  }
}
