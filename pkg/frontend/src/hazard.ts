/** Hazard explorer: duration-hazard slices per admission date, with a
 * recovery/death/all cause toggle. Masked cells render as line gaps. */

import { ApiClient } from "./api.js";
import { ChartSeries, renderChart } from "./chart.js";

const SLICE_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

export type Cause = "all" | "recovery" | "death";

export class HazardExplorer {
  dates: string[] = [];
  cause: Cause = "death";

  constructor(
    private readonly api: Pick<ApiClient, "hazard">,
    private readonly modelId: string,
    readonly root: HTMLElement,
  ) {
    this.buildDom();
  }

  async addDate(date: string): Promise<void> {
    if (!date || this.dates.includes(date)) return;
    this.dates.push(date);
    await this.refresh();
  }

  async removeDate(date: string): Promise<void> {
    this.dates = this.dates.filter((d) => d !== date);
    await this.refresh();
  }

  async setCause(cause: Cause): Promise<void> {
    this.cause = cause;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    this.renderDateList();
    if (this.dates.length === 0) {
      renderChart(this.chartEl, [], { xLabel: "days since admission", yLabel: "daily exit probability" });
      this.setStatus("add an admission date to plot its hazard slice");
      return;
    }
    try {
      const payload = await this.api.hazard(this.modelId, this.cause, this.dates);
      const series: ChartSeries[] = payload.slices.map((slice, i) => ({
        label: slice.date,
        color: SLICE_COLORS[i % SLICE_COLORS.length] as string,
        points: slice.points.map((p) => (p.defined ? { x: p.w, y: p.value } : null)),
      }));
      renderChart(this.chartEl, series, {
        xLabel: "days since admission",
        yLabel: `daily ${this.cause === "all" ? "exit" : this.cause} probability`,
      });
      this.setStatus(`${payload.slices.length} cohort(s), cause=${payload.cause}`);
    } catch (err) {
      this.setStatus(`error: ${err instanceof Error ? err.message : String(err)}`);
    }
  }

  private get chartEl(): HTMLElement {
    return this.root.querySelector("[data-role=chart]") as HTMLElement;
  }

  private setStatus(text: string): void {
    (this.root.querySelector("[data-role=status]") as HTMLElement).textContent = text;
  }

  private buildDom(): void {
    this.root.innerHTML = `
      <div class="hazard-controls">
        <label>admission date
          <input type="date" data-role="date-input">
        </label>
        <button type="button" data-role="add-date">add cohort</button>
        <label>cause
          <select data-role="cause-select">
            <option value="death" selected>death</option>
            <option value="recovery">recovery</option>
            <option value="all">all</option>
          </select>
        </label>
      </div>
      <div class="status" data-role="status" role="status"></div>
      <div class="date-list" data-role="date-list"></div>
      <div class="chart-host" data-role="chart"></div>
    `;
    const dateInput = this.root.querySelector("[data-role=date-input]") as HTMLInputElement;
    (this.root.querySelector("[data-role=add-date]") as HTMLButtonElement).addEventListener("click", () => {
      void this.addDate(dateInput.value);
    });
    (this.root.querySelector("[data-role=cause-select]") as HTMLSelectElement).addEventListener("change", (ev) => {
      void this.setCause((ev.target as HTMLSelectElement).value as Cause);
    });
    this.root.querySelector("[data-role=date-list]")?.addEventListener("click", (ev) => {
      const chip = (ev.target as HTMLElement).closest("[data-date]");
      if (chip) void this.removeDate(chip.getAttribute("data-date") as string);
    });
  }

  private renderDateList(): void {
    const host = this.root.querySelector("[data-role=date-list]") as HTMLElement;
    host.replaceChildren(
      ...this.dates.map((d) => {
        const chip = this.root.ownerDocument.createElement("button");
        chip.type = "button";
        chip.className = "date-chip";
        chip.setAttribute("data-date", d);
        chip.textContent = `${d} ×`;
        return chip;
      }),
    );
  }
}
