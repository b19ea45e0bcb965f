/** Typed client for the annotation service HTTP API. */

import type { RleMask } from "./rle.js";

export interface ViewInfo {
  index: number;
  width: number;
  height: number;
}

export interface MaskEntry {
  object_id: number;
  rle: RleMask;
}

export interface JobInfo {
  id: string;
  state: "queued" | "running" | "done" | "failed";
  progress: { stage: string; views_done: number; views_total: number };
  result_path: string | null;
  error: string | null;
}

export interface PromptPayload {
  view_index: number;
  foreground: { x: number; y: number; object_id: number }[];
  background: { x: number; y: number }[];
}

export interface ReportView {
  index: number;
  provenance: "source" | "warped" | "key_view" | "degraded";
  losses: Record<string, number>;
  degraded_reasons: string[];
}

export interface Report {
  n_views: number;
  source_index: number;
  n_objects: number;
  views: ReportView[];
  degraded_views: number[];
  config: { key_view_interval: number | null } & Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(res: Response): Promise<never> {
  let code = "unknown";
  let message = res.statusText;
  try {
    const body = await res.json();
    code = body?.error?.code ?? code;
    message = body?.error?.message ?? message;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(res.status, code, message);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path);
    if (!res.ok) await parseError(res);
    return (await res.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await parseError(res);
    return (await res.json()) as T;
  }

  listViews(): Promise<ViewInfo[]> {
    return this.getJson("/api/views");
  }

  viewImageUrl(index: number): string {
    return `${this.baseUrl}/api/views/${index}/image`;
  }

  segment(viewIndex: number, prompts: PromptPayload): Promise<{ masks: MaskEntry[] }> {
    return this.postJson(`/api/views/${viewIndex}/segment`, {
      foreground: prompts.foreground,
      background: prompts.background,
    });
  }

  propagate(prompts: PromptPayload, config?: Record<string, unknown>): Promise<{ job_id: string }> {
    return this.postJson("/api/propagate", { prompts, config });
  }

  getJob(id: string): Promise<JobInfo> {
    return this.getJson(`/api/jobs/${id}`);
  }

  resultMasks(viewIndex: number): Promise<MaskEntry[]> {
    return this.getJson(`/api/results/${viewIndex}/masks`);
  }

  resultImageUrl(viewIndex: number): string {
    return `${this.baseUrl}/api/results/${viewIndex}/image`;
  }

  report(): Promise<Report> {
    return this.getJson("/api/results/report");
  }
}
