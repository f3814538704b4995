/** Interactive forecast view: C1/C2/horizon controls, a live scenario curve,
 * and saved scenario cards overlaid on one chart.
 *
 * Control changes are debounced (sliders fire per pixel); identical control
 * settings are served from a cache and say so; at most one forecast request
 * is in flight, superseded ones are aborted. On API failure the last good
 * curve stays on screen and the error is shown inline.
 */

import { ApiClient, ForecastPayload } from "./api.js";
import { ChartSeries, renderChart } from "./chart.js";
import { Debounced, debounce } from "./debounce.js";

export const C1_RANGE = { min: 0.5, max: 2.5, step: 0.01 };
export const C2_RANGE = { min: 0.25, max: 4.0, step: 0.01 };
export const DEBOUNCE_MS = 300;

const CARD_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
const LIVE_COLOR = "#111";

export interface ScenarioControls {
  c1: number;
  c2: number;
  horizon: number;
  admissionsOverride: number[] | null;
}

export interface ScenarioCard {
  id: number;
  name: string;
  controls: ScenarioControls;
  result: ForecastPayload;
  createdAt: Date;
}

/** "1, 12 13" -> [1, 12, 13]; empty text -> null (no override). */
export function parseAdmissionsOverride(text: string): number[] | null {
  const trimmed = text.trim();
  if (!trimmed) return null;
  const values = trimmed.split(/[\s,;]+/).map((tok) => Number(tok));
  if (values.some((v) => !Number.isFinite(v) || v < 0)) {
    throw new Error("admissions override must be a list of nonnegative numbers");
  }
  return values;
}

function cloneControls(c: ScenarioControls): ScenarioControls {
  return { ...c, admissionsOverride: c.admissionsOverride ? [...c.admissionsOverride] : null };
}

function controlsKey(c: ScenarioControls): string {
  return JSON.stringify([c.c1, c.c2, c.horizon, c.admissionsOverride]);
}

export class ForecastView {
  readonly controls: ScenarioControls = { c1: 1.0, c2: 1.0, horizon: 14, admissionsOverride: null };
  cards: ScenarioCard[] = [];
  current: ForecastPayload | null = null;
  /** Optional context series (e.g. recently observed totals), drawn dashed. */
  observed: ChartSeries | null = null;
  /** Number of forecast requests actually issued (cache hits excluded). */
  forecastCalls = 0;

  private currentKey: string | null = null;
  private inflight: AbortController | null = null;
  private readonly cache = new Map<string, ForecastPayload>();
  private readonly scheduleRefresh: Debounced<[]>;
  private nextCardId = 1;

  constructor(
    private readonly api: Pick<ApiClient, "forecast">,
    private readonly modelId: string,
    readonly root: HTMLElement,
    options: { debounceMs?: number } = {},
  ) {
    this.scheduleRefresh = debounce(() => {
      void this.refreshNow();
    }, options.debounceMs ?? DEBOUNCE_MS);
    this.buildDom();
  }

  update(partial: Partial<ScenarioControls>): void {
    Object.assign(this.controls, partial);
    this.syncControlsDom();
    this.scheduleRefresh();
  }

  /** Fetch (or reuse) the forecast for the current controls and redraw. */
  async refreshNow(): Promise<void> {
    this.scheduleRefresh.cancel();
    const controls = cloneControls(this.controls);
    const key = controlsKey(controls);

    const hit = this.cache.get(key);
    if (hit) {
      this.current = hit;
      this.currentKey = key;
      this.setStatus(`cache hit (C1=${controls.c1}, C2=${controls.c2}, h=${controls.horizon})`);
      this.render();
      return;
    }

    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.forecastCalls += 1;
    this.setStatus("forecasting…");
    try {
      const payload = await this.api.forecast(
        this.modelId,
        {
          horizon: controls.horizon,
          c1: controls.c1,
          c2: controls.c2,
          ...(controls.admissionsOverride ? { admissions_override: controls.admissionsOverride } : {}),
        },
        controller.signal,
      );
      if (controller.signal.aborted) return; // superseded while awaiting
      this.cache.set(key, payload);
      this.current = payload;
      this.currentKey = key;
      this.setStatus(`forecast updated (C1=${controls.c1}, C2=${controls.c2}, h=${controls.horizon})`);
      this.render();
    } catch (err) {
      if (controller.signal.aborted) return; // cancellation is not an error
      const message = err instanceof Error ? err.message : String(err);
      this.setStatus(`error: ${message}`); // last good curve stays on screen
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  /** Snapshot the current controls + forecast into a named card. */
  async saveCard(name: string): Promise<ScenarioCard> {
    if (this.currentKey !== controlsKey(this.controls) || this.current === null) {
      await this.refreshNow();
    }
    if (this.current === null || this.currentKey !== controlsKey(this.controls)) {
      throw new Error("no forecast available for the current controls");
    }
    const card: ScenarioCard = {
      id: this.nextCardId++,
      name: name.trim() || `scenario ${this.nextCardId - 1}`,
      controls: cloneControls(this.controls),
      result: this.current,
      createdAt: new Date(),
    };
    this.cards.push(card);
    this.render();
    return card;
  }

  deleteCard(id: number): void {
    this.cards = this.cards.filter((c) => c.id !== id);
    this.render();
  }

  render(): void {
    const series: ChartSeries[] = [];
    if (this.observed) series.push(this.observed);
    this.cards.forEach((card, i) => {
      series.push({
        label: card.name,
        color: CARD_COLORS[i % CARD_COLORS.length] as string,
        points: card.result.series.deaths_total.map((y, s) => ({ x: s + 1, y })),
      });
    });
    if (this.current) {
      series.push({
        label: "current",
        color: LIVE_COLOR,
        points: this.current.series.deaths_total.map((y, s) => ({ x: s + 1, y })),
      });
    }
    renderChart(this.chartEl, series, {
      xLabel: "days ahead",
      yLabel: "daily deaths (total)",
    });
    this.renderCards();
  }

  // --- DOM plumbing ---

  private get chartEl(): HTMLElement {
    return this.root.querySelector("[data-role=chart]") as HTMLElement;
  }

  private setStatus(text: string): void {
    const el = this.root.querySelector("[data-role=status]") as HTMLElement;
    el.textContent = text;
  }

  private buildDom(): void {
    this.root.innerHTML = `
      <div class="scenario-controls">
        <label>C1 (admissions bend)
          <input type="range" data-role="c1-slider"
                 min="${C1_RANGE.min}" max="${C1_RANGE.max}" step="${C1_RANGE.step}" value="1">
          <input type="number" data-role="c1-input" step="any" value="1">
        </label>
        <label>C2 (death-ratio bend)
          <input type="range" data-role="c2-slider"
                 min="${C2_RANGE.min}" max="${C2_RANGE.max}" step="${C2_RANGE.step}" value="1">
          <input type="number" data-role="c2-input" step="any" value="1">
        </label>
        <label>horizon (days)
          <input type="number" data-role="horizon-input" min="1" max="365" step="1" value="14">
        </label>
        <label>admissions override (optional, comma-separated)
          <input type="text" data-role="admissions-input" placeholder="e.g. 120, 115, 110">
        </label>
        <span class="save-row">
          <input type="text" data-role="card-name" placeholder="scenario name">
          <button type="button" data-role="save-card">save scenario</button>
        </span>
      </div>
      <div class="status" data-role="status" role="status"></div>
      <div class="scenario-cards" data-role="cards"></div>
      <div class="chart-host" data-role="chart"></div>
    `;

    const q = <T extends Element>(sel: string) => this.root.querySelector(sel) as T;
    const c1Slider = q<HTMLInputElement>("[data-role=c1-slider]");
    const c1Input = q<HTMLInputElement>("[data-role=c1-input]");
    const c2Slider = q<HTMLInputElement>("[data-role=c2-slider]");
    const c2Input = q<HTMLInputElement>("[data-role=c2-input]");
    const horizon = q<HTMLInputElement>("[data-role=horizon-input]");
    const admissions = q<HTMLInputElement>("[data-role=admissions-input]");

    c1Slider.addEventListener("input", () => this.update({ c1: Number(c1Slider.value) }));
    c2Slider.addEventListener("input", () => this.update({ c2: Number(c2Slider.value) }));
    // free-text inputs may go outside the slider range on purpose; browsers
    // blank a number input holding garbage, so empty counts as invalid too
    const numeric = (el: HTMLInputElement) => (el.value.trim() === "" ? NaN : Number(el.value));
    c1Input.addEventListener("change", () => {
      const v = numeric(c1Input);
      if (Number.isFinite(v) && v >= 0) this.update({ c1: v });
      else this.setStatus("error: C1 must be a nonnegative number");
    });
    c2Input.addEventListener("change", () => {
      const v = numeric(c2Input);
      if (Number.isFinite(v) && v >= 0) this.update({ c2: v });
      else this.setStatus("error: C2 must be a nonnegative number");
    });
    horizon.addEventListener("change", () => {
      const v = numeric(horizon);
      if (Number.isInteger(v) && v >= 1 && v <= 365) this.update({ horizon: v });
      else this.setStatus("error: horizon must be an integer between 1 and 365");
    });
    admissions.addEventListener("change", () => {
      try {
        this.update({ admissionsOverride: parseAdmissionsOverride(admissions.value) });
      } catch (err) {
        this.setStatus(`error: ${err instanceof Error ? err.message : String(err)}`);
      }
    });
    q<HTMLButtonElement>("[data-role=save-card]").addEventListener("click", () => {
      const nameEl = q<HTMLInputElement>("[data-role=card-name]");
      void this.saveCard(nameEl.value).then(() => {
        nameEl.value = "";
      });
    });
    q<HTMLElement>("[data-role=cards]").addEventListener("click", (ev) => {
      const button = (ev.target as HTMLElement).closest("[data-card-id]");
      if (button) this.deleteCard(Number(button.getAttribute("data-card-id")));
    });
  }

  private syncControlsDom(): void {
    const q = <T extends Element>(sel: string) => this.root.querySelector(sel) as T;
    q<HTMLInputElement>("[data-role=c1-slider]").value = String(this.controls.c1);
    q<HTMLInputElement>("[data-role=c1-input]").value = String(this.controls.c1);
    q<HTMLInputElement>("[data-role=c2-slider]").value = String(this.controls.c2);
    q<HTMLInputElement>("[data-role=c2-input]").value = String(this.controls.c2);
    q<HTMLInputElement>("[data-role=horizon-input]").value = String(this.controls.horizon);
  }

  private renderCards(): void {
    const host = this.root.querySelector("[data-role=cards]") as HTMLElement;
    host.replaceChildren(
      ...this.cards.map((card, i) => {
        const el = this.root.ownerDocument.createElement("div");
        el.className = "scenario-card";
        el.style.borderLeftColor = CARD_COLORS[i % CARD_COLORS.length] as string;
        const total = card.result.series.deaths_total.reduce((a, b) => a + b, 0);
        el.innerHTML = `
          <span class="card-name"></span>
          <span class="card-params">C1=${card.controls.c1} C2=${card.controls.c2} h=${card.controls.horizon}</span>
          <span class="card-total">${total.toFixed(0)} deaths</span>
          <button type="button" data-card-id="${card.id}" title="delete">×</button>
        `;
        (el.querySelector(".card-name") as HTMLElement).textContent = card.name;
        return el;
      }),
    );
  }
}
