// Typed client for the trial-conduct HTTP API. The UI keeps no state of its
// own beyond the trial id: every displayed number comes from these payloads.

export interface DesignDefaults {
  design: string;
  [key: string]: unknown;
}

export interface CohortRecord {
  combo: [number, number];
  size: number;
  dlts: number;
}

export interface TrialStatePayload {
  n: number[][];
  y: number[][];
  current: [number, number];
  eliminated: boolean[][];
  terminated: boolean;
  total_n: number;
  cohort_log: CohortRecord[];
}

export interface PosteriorSummary {
  means: number[][];
  exceedance: number[][];
  barred: boolean[][];
}

export interface TrialPayload {
  id: string;
  design: string;
  status: "active" | "terminated" | "finalized";
  recommendation: [number, number] | null;
  mtc: [number, number] | null;
  display_bands: [number, number];
  cfg: {
    target: number;
    cohort_size: number;
    max_n: number;
    grid: { doses_a: number[]; doses_b: number[] };
  };
  state: TrialStatePayload;
  posterior_summary: PosteriorSummary;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(`${base}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { detail?: string }).detail ?? resp.statusText);
  }
  return body as T;
}

export class TrialApi {
  constructor(private base: string) {}

  listDesigns(): Promise<{ designs: DesignDefaults[] }> {
    return request(this.base, "/api/designs");
  }

  createTrial(design: string, seed = 0): Promise<{ id: string; recommendation: [number, number] }> {
    return request(this.base, "/api/trials", {
      method: "POST",
      body: JSON.stringify({ design, seed }),
    });
  }

  getTrial(id: string): Promise<TrialPayload> {
    return request(this.base, `/api/trials/${id}`);
  }

  submitCohort(
    id: string,
    combo: [number, number],
    size: number,
    dlts: number,
    override = false,
  ): Promise<TrialPayload & { recommendation: [number, number] | "terminated" | null }> {
    return request(this.base, `/api/trials/${id}/cohorts`, {
      method: "POST",
      body: JSON.stringify({ combo, size, dlts, override }),
    });
  }

  finalize(id: string): Promise<{ mtc: [number, number] | null }> {
    return request(this.base, `/api/trials/${id}/finalize`, { method: "POST" });
  }
}
