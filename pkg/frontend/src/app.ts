/** Page wiring: upload a panel CSV, fit a model, then hand the model id to
 * the forecast view, hazard explorer, indicator charts and backtest panel.
 * All estimates come from the API; the page itself only parses the uploaded
 * CSV to overlay recently observed raw totals on the forecast chart. */

import { ApiClient, FitResponse } from "./api.js";
import { BacktestPanel } from "./backtest.js";
import { ChartSeries, renderChart } from "./chart.js";
import { HazardExplorer } from "./hazard.js";
import { ForecastView } from "./scenario.js";

export type DashboardApi = Pick<
  ApiClient,
  "uploadDataset" | "fit" | "forecast" | "hazard" | "indicators" | "backtest"
>;

const OBSERVED_OVERLAY_DAYS = 28;

export interface AppHandles {
  forecastView: ForecastView | null;
  hazardExplorer: HazardExplorer | null;
  backtestPanel: BacktestPanel | null;
}

/** Observed daily totals (in-hospital + outside deaths) from the raw CSV,
 * plotted left of the forecast origin. Display-only; no estimation here. */
export function observedTotalsSeries(csv: string, lastDays: number = OBSERVED_OVERLAY_DAYS): ChartSeries | null {
  const lines = csv.trim().split(/\r?\n/);
  if (lines.length < 2) return null;
  const header = (lines[0] as string).split(",").map((h) => h.trim().toLowerCase());
  const n4Col = header.indexOf("n4");
  const outCol = header.indexOf("n_out");
  if (n4Col < 0) return null;
  const totals: number[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    const n4 = Number(cells[n4Col] ?? "");
    const out = outCol >= 0 ? Number(cells[outCol] ?? "") : 0;
    if (!Number.isFinite(n4)) return null;
    totals.push(n4 + (Number.isFinite(out) ? out : 0));
  }
  const tail = totals.slice(-lastDays);
  const offset = tail.length - 1;
  return {
    label: "observed",
    color: "#999",
    dashed: true,
    points: tail.map((y, i) => ({ x: i - offset, y })),
  };
}

export function initApp(doc: Document, api: DashboardApi): AppHandles {
  const handles: AppHandles = { forecastView: null, hazardExplorer: null, backtestPanel: null };
  const app = doc.getElementById("app");
  if (!app) throw new Error("missing #app container");

  app.innerHTML = `
    <h1>hospital-stay hazard dashboard</h1>
    <section id="dataset-section">
      <h2>1. dataset</h2>
      <textarea data-role="csv-input" rows="6" spellcheck="false"
        placeholder="date,n1,n2,n3,n4,n_out&#10;2020-03-01,,120,30,8,12&#10;..."></textarea>
      <div>
        <button type="button" data-role="upload">upload</button>
        <span class="status" data-role="dataset-status" role="status"></span>
      </div>
      <div class="fit-controls">
        <label>bandwidths
          <select data-role="bandwidth-mode">
            <option value="auto" selected>auto (cross-validated)</option>
            <option value="manual">manual</option>
          </select>
        </label>
        <label>b1 <input type="number" data-role="b1-input" min="1" step="any" value="7" disabled></label>
        <label>b2 <input type="number" data-role="b2-input" min="1" step="any" value="7" disabled></label>
        <button type="button" data-role="fit" disabled>fit model</button>
        <span class="status" data-role="fit-status" role="status"></span>
      </div>
    </section>
    <section id="forecast-section">
      <h2>2. what-if forecast</h2>
      <div id="forecast-root"></div>
    </section>
    <section id="hazard-section">
      <h2>3. hazard explorer</h2>
      <div id="hazard-root"></div>
    </section>
    <section id="indicator-section">
      <h2>4. cohort indicators</h2>
      <div class="indicator-grid">
        <div><h3>median residual stay</h3><div id="median-chart"></div></div>
        <div><h3>eventual death probability</h3><div id="exitprob-chart"></div></div>
      </div>
    </section>
    <section id="backtest-section">
      <h2>5. C2 backtest</h2>
      <div id="backtest-root"></div>
    </section>
  `;

  const q = <T extends Element>(sel: string) => app.querySelector(sel) as T;
  const csvInput = q<HTMLTextAreaElement>("[data-role=csv-input]");
  const uploadBtn = q<HTMLButtonElement>("[data-role=upload]");
  const fitBtn = q<HTMLButtonElement>("[data-role=fit]");
  const modeSelect = q<HTMLSelectElement>("[data-role=bandwidth-mode]");
  const b1Input = q<HTMLInputElement>("[data-role=b1-input]");
  const b2Input = q<HTMLInputElement>("[data-role=b2-input]");
  const datasetStatus = q<HTMLElement>("[data-role=dataset-status]");
  const fitStatus = q<HTMLElement>("[data-role=fit-status]");

  let datasetId: string | null = null;
  let panelDays = 0;

  modeSelect.addEventListener("change", () => {
    const manual = modeSelect.value === "manual";
    b1Input.disabled = !manual;
    b2Input.disabled = !manual;
  });

  uploadBtn.addEventListener("click", () => {
    void (async () => {
      datasetStatus.textContent = "uploading…";
      try {
        const res = await api.uploadDataset(csvInput.value);
        datasetId = res.dataset_id;
        panelDays = res.n_days;
        datasetStatus.textContent = `dataset ${res.dataset_id}: ${res.n_days} days from ${res.start_date}`;
        fitBtn.disabled = false;
      } catch (err) {
        datasetStatus.textContent = `error: ${err instanceof Error ? err.message : String(err)}`;
      }
    })();
  });

  fitBtn.addEventListener("click", () => {
    void (async () => {
      if (!datasetId) return;
      fitStatus.textContent = "fitting…";
      try {
        const options =
          modeSelect.value === "manual"
            ? { b1: Number(b1Input.value), b2: Number(b2Input.value) }
            : {};
        const fit = await api.fit(datasetId, options);
        fitStatus.textContent =
          `model ${fit.model_id}: b1=${fit.b1}, b2=${fit.b2}, window=${fit.window}, ` +
          `${fit.diagnostics.iterations} iterations${fit.diagnostics.converged ? "" : " (not converged)"}`;
        mountModelViews(fit);
      } catch (err) {
        fitStatus.textContent = `error: ${err instanceof Error ? err.message : String(err)}`;
      }
    })();
  });

  function mountModelViews(fit: FitResponse): void {
    const view = new ForecastView(api, fit.model_id, doc.getElementById("forecast-root") as HTMLElement);
    view.observed = observedTotalsSeries(csvInput.value);
    handles.forecastView = view;
    void view.refreshNow();

    handles.hazardExplorer = new HazardExplorer(api, fit.model_id, doc.getElementById("hazard-root") as HTMLElement);
    void handles.hazardExplorer.refresh();

    handles.backtestPanel = new BacktestPanel(
      api,
      fit.model_id,
      doc.getElementById("backtest-root") as HTMLElement,
      { cutoff: Math.max(2, panelDays - 14), horizon: 14 },
    );

    void renderIndicators(api, fit.model_id, doc);
  }

  return handles;
}

async function renderIndicators(api: DashboardApi, modelId: string, doc: Document): Promise<void> {
  const medianHost = doc.getElementById("median-chart");
  const exitHost = doc.getElementById("exitprob-chart");
  if (!medianHost || !exitHost) return;
  try {
    const median = await api.indicators(modelId, "median");
    renderChart(
      medianHost,
      [
        {
          label: "median stay (days)",
          color: "#1f77b4",
          points: median.series.map((p) => (p.defined && p.value !== null ? { x: p.day, y: p.value } : null)),
        },
      ],
      { xLabel: "admission day", yLabel: "days", height: 200 },
    );
    const exitprob = await api.indicators(modelId, "exitprob", "death");
    renderChart(
      exitHost,
      [
        {
          label: "P(eventual in-hospital death)",
          color: "#d62728",
          points: exitprob.series.map((p) => (p.value !== null ? { x: p.day, y: p.value } : null)),
        },
      ],
      { xLabel: "admission day", yLabel: "probability", height: 200 },
    );
  } catch {
    // indicators are best-effort context; the sections above surface errors
  }
}

declare global {
  interface Window {
    __pandemonHandles?: AppHandles;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.__pandemonHandles = initApp(document, new ApiClient());
}
