/** Typed client for the hazard/forecast JSON API.
 *
 * Every displayed number in the dashboard originates from one of these
 * payloads; the client does no estimation of its own.
 */

export interface UploadResponse {
  dataset_id: string;
  n_days: number;
  start_date: string;
}

export interface FitOptions {
  b1?: number;
  b2?: number;
  window?: number;
}

export interface FitResponse {
  model_id: string;
  dataset_id: string;
  b1: number;
  b2: number;
  window: number;
  diagnostics: { iterations: number; converged: boolean; [key: string]: unknown };
}

export interface ForecastRequest {
  horizon: number;
  c1: number;
  c2: number;
  admissions_override?: number[];
}

export interface ForecastPayload {
  scenario: { T: number; h: number; c1: number; c2: number };
  series: {
    admissions: number[];
    deaths_in: number[];
    g_tilde: number[];
    deaths_out: number[];
    deaths_total: number[];
  };
  start_date: string;
}

export interface HazardPoint {
  w: number;
  value: number;
  defined: boolean;
}

export interface HazardPayload {
  cause: string;
  b1: number;
  b2: number;
  slices: Array<{ date: string; admission_day: number; points: HazardPoint[] }>;
}

export interface IndicatorPoint {
  day: number;
  date: string;
  value: number | null;
  defined: boolean;
  truncated_mass?: number;
}

export interface IndicatorPayload {
  type: string;
  series: IndicatorPoint[];
}

export interface RatioPayload {
  floor: number;
  series: Array<{ day: number; date: string; g_hat: number; raw_ratio: number | null; floored: boolean }>;
}

export interface BacktestRequest {
  cutoff: number;
  horizon: number;
  c2_grid?: number[];
  c1?: number;
  cumulative?: boolean;
}

export interface BacktestResponse {
  c2_star: number;
  cutoff: number;
  horizon: number;
  sse_curve: Array<{ c2: number; sse: number }>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Turn an error response into an ApiError with a readable message. */
async function raiseApiError(res: Response): Promise<never> {
  let detail = res.statusText || `HTTP ${res.status}`;
  try {
    const body = (await res.json()) as { detail?: unknown };
    if (typeof body.detail === "string") {
      detail = body.detail;
    } else if (Array.isArray(body.detail)) {
      detail = body.detail
        .map((d: { field?: string; message?: string }) =>
          [d.field, d.message].filter(Boolean).join(": "),
        )
        .join("; ");
    }
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.base + path, init);
    if (!res.ok) await raiseApiError(res);
    return (await res.json()) as T;
  }

  uploadDataset(csv: string): Promise<UploadResponse> {
    return this.request<UploadResponse>("/api/datasets", {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csv,
    });
  }

  fit(datasetId: string, options: FitOptions = {}): Promise<FitResponse> {
    return this.request<FitResponse>(`/api/datasets/${encodeURIComponent(datasetId)}/fit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(options),
    });
  }

  forecast(modelId: string, req: ForecastRequest, signal?: AbortSignal): Promise<ForecastPayload> {
    return this.request<ForecastPayload>(`/api/models/${encodeURIComponent(modelId)}/forecast`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
  }

  hazard(modelId: string, cause: string, dates: string[]): Promise<HazardPayload> {
    const query = new URLSearchParams({ cause, dates: dates.join(",") });
    return this.request<HazardPayload>(
      `/api/models/${encodeURIComponent(modelId)}/hazard?${query.toString()}`,
    );
  }

  indicators(modelId: string, type: "median" | "exitprob", cause?: string, daysIn?: number): Promise<IndicatorPayload> {
    const query = new URLSearchParams({ type });
    if (cause !== undefined) query.set("cause", cause);
    if (daysIn !== undefined) query.set("days_in", String(daysIn));
    return this.request<IndicatorPayload>(
      `/api/models/${encodeURIComponent(modelId)}/indicators?${query.toString()}`,
    );
  }

  ratio(modelId: string): Promise<RatioPayload> {
    return this.request<RatioPayload>(`/api/models/${encodeURIComponent(modelId)}/ratio`);
  }

  backtest(modelId: string, req: BacktestRequest): Promise<BacktestResponse> {
    return this.request<BacktestResponse>(`/api/models/${encodeURIComponent(modelId)}/backtest`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }
}
