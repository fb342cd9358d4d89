// Rules editor: JSON in, server verdict out (rejections shown verbatim).

import { ApiClient, ApiError } from "../api.js";

export class RulesView {
  lastVerdict = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  render(): void {
    this.root.innerHTML = `
      <textarea data-field="rules-json" rows="8" spellcheck="false">[]</textarea>
      <button data-field="apply">apply rules</button>
      <p data-field="verdict" class="verdict">${this.lastVerdict}</p>`;
    const button = this.root.querySelector('[data-field="apply"]') as HTMLButtonElement;
    button?.addEventListener("click", () => void this.apply());
  }

  async apply(): Promise<void> {
    const area = this.root.querySelector('[data-field="rules-json"]') as HTMLTextAreaElement;
    const verdict = this.root.querySelector('[data-field="verdict"]') as HTMLElement;
    try {
      const rules = JSON.parse(area.value);
      const result = await this.api.setRules(rules);
      this.lastVerdict = `applied ${result.count} rule(s)`;
    } catch (err) {
      this.lastVerdict =
        err instanceof ApiError ? `rejected: ${err.message}` : `invalid JSON: ${err}`;
    }
    if (verdict) verdict.textContent = this.lastVerdict;
  }
}
