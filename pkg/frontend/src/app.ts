// Dashboard rendering and flows. The view is a pure function of the latest
// API payload; submitting a cohort or finalizing triggers a refresh.

import { ApiError, TrialApi, TrialPayload } from "./api.js";

export interface AppState {
  trialId: string | null;
  payload: TrialPayload | null;
  error: string | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function shadeFor(mean: number, bands: [number, number]): string {
  // bucket posterior means by the design's own decision interval
  if (mean < bands[0]) return "shade-low";
  if (mean <= bands[1]) return "shade-target";
  return "shade-high";
}

export function renderGrid(payload: TrialPayload): HTMLTableElement {
  const { state, posterior_summary, recommendation, cfg, mtc } = payload;
  const rows = cfg.grid.doses_a.length;
  const cols = cfg.grid.doses_b.length;
  const table = el("table", { class: "grid", "data-testid": "grid" });
  const header = el("tr");
  header.appendChild(el("th", {}, "A \\ B"));
  for (let j = 0; j < cols; j++) header.appendChild(el("th", {}, `${cfg.grid.doses_b[j]}`));
  table.appendChild(header);
  for (let i = rows - 1; i >= 0; i--) {
    const tr = el("tr");
    tr.appendChild(el("th", {}, `${cfg.grid.doses_a[i]}`));
    for (let j = 0; j < cols; j++) {
      const flags: string[] = [];
      if (recommendation && recommendation[0] === i + 1 && recommendation[1] === j + 1)
        flags.push("recommended");
      if (state.current[0] === i + 1 && state.current[1] === j + 1 && state.total_n > 0)
        flags.push("current");
      if (state.eliminated[i][j] || posterior_summary.barred[i][j]) flags.push("eliminated");
      if (mtc && mtc[0] === i + 1 && mtc[1] === j + 1) flags.push("mtc");
      const mean = posterior_summary.means[i][j];
      const td = el(
        "td",
        {
          class: ["cell", shadeFor(mean, payload.display_bands), ...flags].join(" "),
          "data-combo": `${i + 1},${j + 1}`,
          "data-mean": mean.toFixed(4),
        },
      );
      td.appendChild(el("div", { class: "tally" }, `${state.y[i][j]}/${state.n[i][j]}`));
      td.appendChild(el("div", { class: "mean" }, mean.toFixed(2)));
      if (flags.length) td.appendChild(el("div", { class: "flags" }, flags.join(" ")));
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  return table;
}

export function renderHistory(payload: TrialPayload): HTMLTableElement {
  const table = el("table", { class: "history", "data-testid": "history" });
  const head = el("tr");
  for (const title of ["#", "combo", "size", "DLTs"]) head.appendChild(el("th", {}, title));
  table.appendChild(head);
  payload.state.cohort_log.forEach((rec, k) => {
    const tr = el("tr");
    tr.appendChild(el("td", {}, `${k + 1}`));
    tr.appendChild(el("td", {}, `(${rec.combo[0]}, ${rec.combo[1]})`));
    tr.appendChild(el("td", {}, `${rec.size}`));
    tr.appendChild(el("td", {}, `${rec.dlts}`));
    table.appendChild(tr);
  });
  return table;
}

export class ConductApp {
  state: AppState = { trialId: null, payload: null, error: null };

  constructor(
    private root: HTMLElement,
    private api: TrialApi,
  ) {}

  async boot(): Promise<void> {
    const { designs } = await this.api.listDesigns();
    this.renderCreateForm(designs.map((d) => d.design));
  }

  renderCreateForm(designs: string[]): void {
    this.root.innerHTML = "";
    const form = el("form", { "data-testid": "create-form" });
    const select = el("select", { name: "design", "data-testid": "design-select" });
    for (const d of designs) select.appendChild(el("option", { value: d }, d));
    const seed = el("input", { name: "seed", type: "number", value: "0" });
    const submit = el("button", { type: "submit" }, "start trial");
    form.append(select, seed, submit);
    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      try {
        const created = await this.api.createTrial(select.value, Number(seed.value));
        this.state.trialId = created.id;
        await this.refresh();
      } catch (err) {
        this.showError(err);
      }
    });
    this.root.appendChild(form);
  }

  async refresh(): Promise<void> {
    if (!this.state.trialId) return;
    try {
      this.state.payload = await this.api.getTrial(this.state.trialId);
      this.state.error = null;
    } catch (err) {
      this.showError(err);
      return;
    }
    this.renderTrial();
  }

  showError(err: unknown): void {
    this.state.error = err instanceof Error ? err.message : String(err);
    let banner = this.root.querySelector('[data-testid="error"]');
    if (!banner) {
      banner = el("div", { class: "error", "data-testid": "error" });
      this.root.prepend(banner);
    }
    banner.textContent = this.state.error;
  }

  renderTrial(): void {
    const payload = this.state.payload;
    if (!payload) return;
    this.root.innerHTML = "";
    const heading = el("h2", {}, `${payload.design} trial ${payload.id}`);
    this.root.appendChild(heading);

    if (payload.status === "terminated") {
      this.root.appendChild(
        el(
          "div",
          { class: "banner terminated", "data-testid": "terminated-banner" },
          "trial terminated for safety - no combination can be dosed",
        ),
      );
    }
    if (payload.status === "finalized") {
      const text = payload.mtc
        ? `maximum tolerated combination: (${payload.mtc[0]}, ${payload.mtc[1]})`
        : "no combination selected";
      this.root.appendChild(el("div", { class: "banner mtc", "data-testid": "mtc-banner" }, text));
    }

    this.root.appendChild(renderGrid(payload));

    const status = el("p", { "data-testid": "status" });
    status.textContent =
      `status: ${payload.status}; patients: ${payload.state.total_n}/${payload.cfg.max_n}` +
      (payload.recommendation
        ? `; next recommended: (${payload.recommendation[0]}, ${payload.recommendation[1]})`
        : "");
    this.root.appendChild(status);

    this.root.appendChild(this.cohortForm(payload));
    this.root.appendChild(renderHistory(payload));

    const finalize = el(
      "button",
      { "data-testid": "finalize", type: "button" },
      "finalize trial",
    );
    if (payload.status === "finalized") finalize.setAttribute("disabled", "disabled");
    finalize.addEventListener("click", async () => {
      try {
        await this.api.finalize(payload.id);
        await this.refresh();
      } catch (err) {
        this.showError(err);
      }
    });
    this.root.appendChild(finalize);
  }

  cohortForm(payload: TrialPayload): HTMLFormElement {
    const form = el("form", { "data-testid": "cohort-form" });
    const disabled = payload.status !== "active";
    const rec = payload.recommendation;
    const comboI = el("input", {
      name: "i", type: "number", min: "1", value: rec ? `${rec[0]}` : "1",
      "data-testid": "combo-i",
    });
    const comboJ = el("input", {
      name: "j", type: "number", min: "1", value: rec ? `${rec[1]}` : "1",
      "data-testid": "combo-j",
    });
    const size = el("input", { name: "size", type: "number", value: `${payload.cfg.cohort_size}` });
    const dlts = el("input", { name: "dlts", type: "number", value: "0", "data-testid": "dlts" });
    const warning = el("span", { class: "override-warning", "data-testid": "override-warning" });
    const submit = el("button", { type: "submit", "data-testid": "submit-cohort" }, "record cohort");
    if (disabled) {
      for (const input of [comboI, comboJ, size, dlts, submit]) {
        input.setAttribute("disabled", "disabled");
      }
    }
    const updateWarning = () => {
      const offRec =
        rec !== null && (Number(comboI.value) !== rec[0] || Number(comboJ.value) !== rec[1]);
      warning.textContent = offRec
        ? "differs from the recommendation - submitting will override"
        : "";
    };
    comboI.addEventListener("input", updateWarning);
    comboJ.addEventListener("input", updateWarning);
    form.append(comboI, comboJ, size, dlts, submit, warning);
    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      const combo: [number, number] = [Number(comboI.value), Number(comboJ.value)];
      const offRec = rec !== null && (combo[0] !== rec[0] || combo[1] !== rec[1]);
      try {
        await this.api.submitCohort(
          payload.id, combo, Number(size.value), Number(dlts.value), offRec,
        );
        await this.refresh();
      } catch (err) {
        this.showError(err);
      }
    });
    return form;
  }
}
