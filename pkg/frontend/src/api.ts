/** Typed client for the dicti service; every displayed pixel buffer
 * originates from one of these responses. */

import type { ApiErrorBody, Job, JobSpecInput, MaskParams, MaskPreview } from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly field?: string;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.name = "ApiError";
    this.status = status;
    this.code = body.code;
    this.field = body.field;
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let body: ApiErrorBody;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    body = { code: "http_error", message: `HTTP ${response.status}` };
  }
  throw new ApiError(response.status, body);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<{ status: string; backend: string; parser: string }> {
    const response = await this.fetchFn(this.url("/api/health"));
    await raiseForStatus(response);
    return response.json();
  }

  async previewMask(
    image: Blob,
    mask: MaskParams,
    options: { labels?: Blob; signal?: AbortSignal } = {},
  ): Promise<MaskPreview> {
    const form = new FormData();
    form.append("image", image, "image.png");
    form.append("d", String(mask.d));
    form.append("e", String(mask.e));
    form.append("f", String(mask.f));
    if (options.labels) form.append("labels", options.labels, "labels.png");
    const response = await this.fetchFn(this.url("/api/preview-mask"), {
      method: "POST",
      body: form,
      signal: options.signal,
    });
    await raiseForStatus(response);
    return response.json();
  }

  async submitJob(image: Blob, spec: JobSpecInput, labels?: Blob): Promise<Job> {
    const form = new FormData();
    form.append("image", image, "image.png");
    form.append("spec", JSON.stringify(spec));
    if (labels) form.append("labels", labels, "labels.png");
    const response = await this.fetchFn(this.url("/api/jobs"), { method: "POST", body: form });
    await raiseForStatus(response);
    return response.json();
  }

  async getJob(id: string): Promise<Job> {
    const response = await this.fetchFn(this.url(`/api/jobs/${id}`));
    await raiseForStatus(response);
    return response.json();
  }

  async listJobs(): Promise<Job[]> {
    const response = await this.fetchFn(this.url("/api/jobs"));
    await raiseForStatus(response);
    return response.json();
  }

  imageUrl(id: string): string {
    return this.url(`/api/images/${id}`);
  }

  /** Exact stored bytes for a content id (exports use this). */
  async fetchImage(id: string): Promise<Blob> {
    const response = await this.fetchFn(this.imageUrl(id));
    await raiseForStatus(response);
    return response.blob();
  }
}
