/** Backtest panel: sum-of-squares error against held-out data across a C2
 * grid, with the minimizer marked on the curve. */

import { ApiClient, BacktestResponse } from "./api.js";
import { renderChart } from "./chart.js";

export class BacktestPanel {
  last: BacktestResponse | null = null;

  constructor(
    private readonly api: Pick<ApiClient, "backtest">,
    private readonly modelId: string,
    readonly root: HTMLElement,
    private readonly defaults: { cutoff: number; horizon: number },
  ) {
    this.buildDom();
  }

  async run(cutoff: number, horizon: number): Promise<void> {
    this.setStatus("backtesting… (refits on the truncated panel)");
    try {
      const payload = await this.api.backtest(this.modelId, { cutoff, horizon });
      this.last = payload;
      renderChart(
        this.chartEl,
        [
          {
            label: "SSE",
            color: "#1f77b4",
            points: payload.sse_curve.map((p) => ({ x: p.c2, y: p.sse })),
          },
        ],
        {
          xLabel: "C2",
          yLabel: "holdout SSE",
          markers: [{ x: payload.c2_star, label: `C2* = ${payload.c2_star.toFixed(2)}` }],
        },
      );
      this.setStatus(
        `best C2 = ${payload.c2_star.toFixed(2)} over days ${payload.cutoff}–${payload.cutoff + payload.horizon - 1}`,
      );
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
      <div class="backtest-controls">
        <label>cutoff day
          <input type="number" data-role="cutoff-input" min="2" step="1" value="${this.defaults.cutoff}">
        </label>
        <label>horizon
          <input type="number" data-role="horizon-input" min="1" max="365" step="1" value="${this.defaults.horizon}">
        </label>
        <button type="button" data-role="run-backtest">run backtest</button>
      </div>
      <div class="status" data-role="status" role="status"></div>
      <div class="chart-host" data-role="chart"></div>
    `;
    (this.root.querySelector("[data-role=run-backtest]") as HTMLButtonElement).addEventListener("click", () => {
      const cutoff = Number((this.root.querySelector("[data-role=cutoff-input]") as HTMLInputElement).value);
      const horizon = Number((this.root.querySelector("[data-role=horizon-input]") as HTMLInputElement).value);
      void this.run(cutoff, horizon);
    });
  }
}
