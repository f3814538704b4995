/** Shared fakes for the dashboard tests: deterministic forecast payloads
 * whose curves depend on the scenario knobs, and controllable API stubs. */

import type {
  BacktestRequest,
  BacktestResponse,
  FitOptions,
  FitResponse,
  ForecastPayload,
  ForecastRequest,
  HazardPayload,
  IndicatorPayload,
  UploadResponse,
} from "../src/api.js";

/** Drain the microtask queue so awaited fetches settle under fake timers. */
export async function flushAsync(): Promise<void> {
  for (let i = 0; i < 8; i++) await Promise.resolve();
}

export function forecastPayload(req: ForecastRequest): ForecastPayload {
  const steps = Array.from({ length: req.horizon }, (_, i) => i + 1);
  const gTilde = steps.map((s) => 1.0 * (1 + (req.c2 - 1) * (s / req.horizon)));
  const deathsIn = steps.map((s) => 100 * req.c1 - s);
  return {
    scenario: { T: 30, h: req.horizon, c1: req.c1, c2: req.c2 },
    series: {
      admissions: req.admissions_override ?? steps.map(() => 50 * req.c1),
      deaths_in: deathsIn,
      g_tilde: gTilde,
      deaths_out: deathsIn.map((d, i) => d * (gTilde[i] as number)),
      deaths_total: deathsIn.map((d, i) => d * (1 + (gTilde[i] as number))),
    },
    start_date: "2020-03-31",
  };
}

interface PendingForecast {
  req: ForecastRequest;
  signal?: AbortSignal;
  resolve(payload: ForecastPayload): void;
  reject(err: unknown): void;
}

/** Forecast endpoint stub: immediate by default, or manually settled. */
export class FakeForecastApi {
  calls: ForecastRequest[] = [];
  pending: PendingForecast[] = [];
  mode: "immediate" | "manual" = "immediate";
  failWith: Error | null = null;

  forecast(_modelId: string, req: ForecastRequest, signal?: AbortSignal): Promise<ForecastPayload> {
    this.calls.push(req);
    if (this.failWith) return Promise.reject(this.failWith);
    if (this.mode === "immediate") return Promise.resolve(forecastPayload(req));
    return new Promise<ForecastPayload>((resolve, reject) => {
      this.pending.push({ req, signal, resolve, reject });
    });
  }
}

export function hazardPayload(cause: string, dates: string[]): HazardPayload {
  return {
    cause,
    b1: 7,
    b2: 7,
    slices: dates.map((date, i) => ({
      date,
      admission_day: i,
      points: Array.from({ length: 8 }, (_, w) => ({
        w,
        value: (cause === "recovery" ? 0.2 : 0.05) / (w + 1),
        // duration 3 is masked on every slice: exercises the gap rendering
        defined: w !== 3,
      })),
    })),
  };
}

export class FakeHazardApi {
  calls: Array<{ cause: string; dates: string[] }> = [];
  failWith: Error | null = null;

  hazard(_modelId: string, cause: string, dates: string[]): Promise<HazardPayload> {
    this.calls.push({ cause, dates: [...dates] });
    if (this.failWith) return Promise.reject(this.failWith);
    return Promise.resolve(hazardPayload(cause, dates));
  }
}

export function backtestPayload(req: BacktestRequest): BacktestResponse {
  const grid = req.c2_grid ?? [0.5, 1.0, 1.5, 2.0, 2.5];
  return {
    c2_star: 1.5,
    cutoff: req.cutoff,
    horizon: req.horizon,
    sse_curve: grid.map((c2) => ({ c2, sse: (c2 - 1.5) ** 2 + 0.25 })),
  };
}

export class FakeBacktestApi {
  calls: BacktestRequest[] = [];
  failWith: Error | null = null;

  backtest(_modelId: string, req: BacktestRequest): Promise<BacktestResponse> {
    this.calls.push(req);
    if (this.failWith) return Promise.reject(this.failWith);
    return Promise.resolve(backtestPayload(req));
  }
}

/** Whole-API stub for the page wiring test. */
export class FakeDashboardApi {
  uploads: string[] = [];
  fits: Array<{ datasetId: string; options: FitOptions }> = [];
  forecastApi = new FakeForecastApi();
  hazardApi = new FakeHazardApi();
  backtestApi = new FakeBacktestApi();

  uploadDataset(csv: string): Promise<UploadResponse> {
    this.uploads.push(csv);
    return Promise.resolve({ dataset_id: "ds-1", n_days: 30, start_date: "2020-03-01" });
  }

  fit(datasetId: string, options: FitOptions = {}): Promise<FitResponse> {
    this.fits.push({ datasetId, options });
    return Promise.resolve({
      model_id: "m-1",
      dataset_id: datasetId,
      b1: options.b1 ?? 7,
      b2: options.b2 ?? 7,
      window: 29,
      diagnostics: { iterations: 50, converged: false },
    });
  }

  forecast(modelId: string, req: ForecastRequest, signal?: AbortSignal): Promise<ForecastPayload> {
    return this.forecastApi.forecast(modelId, req, signal);
  }

  hazard(modelId: string, cause: string, dates: string[]): Promise<HazardPayload> {
    return this.hazardApi.hazard(modelId, cause, dates);
  }

  indicators(_modelId: string, type: "median" | "exitprob"): Promise<IndicatorPayload> {
    return Promise.resolve({
      type,
      series: Array.from({ length: 10 }, (_, day) => ({
        day,
        date: `2020-03-${String(day + 1).padStart(2, "0")}`,
        value: type === "median" ? 8 - day * 0.2 : 0.1 + day * 0.01,
        defined: true,
      })),
    });
  }

  backtest(modelId: string, req: BacktestRequest): Promise<BacktestResponse> {
    return this.backtestApi.backtest(modelId, req);
  }
}

export function makeRoot(): HTMLElement {
  document.body.innerHTML = '<div id="root"></div>';
  return document.getElementById("root") as HTMLElement;
}

export function seriesPath(root: HTMLElement, label: string): SVGPathElement {
  const path = root.querySelector(`path.series-line[data-label="${label}"]`);
  if (!path) throw new Error(`no series ${label} in chart`);
  return path as SVGPathElement;
}
