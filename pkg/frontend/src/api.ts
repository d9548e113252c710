/** Typed client for the anonymization gateway HTTP API. */

export const OPTIONS = [
  "physical_removal",
  "adversarial_removal",
  "mask_based_removal",
  "identity_removal",
  "no_action",
] as const;

export type AnonymizationOption = (typeof OPTIONS)[number];

export const NO_ACTION: AnonymizationOption = "no_action";

export function isOption(value: unknown): value is AnonymizationOption {
  return (OPTIONS as readonly string[]).includes(value as string);
}

export interface BodySummary {
  body_id: string;
  /** [x, y, w, h] in image pixels. */
  bbox: [number, number, number, number];
  confidence: number;
}

export interface UploadResponse {
  image_id: string;
  bodies: BodySummary[];
}

export interface Choice {
  body_id: string;
  option: AnonymizationOption;
}

export interface AnonymizeRequest {
  image_id: string;
  seed: number;
  choices: Choice[];
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobStatus {
  job_id: string;
  state: JobState;
  request_digest: string;
  result_image: string | null;
  warnings: string[];
  error: string | null;
  result_url?: string;
}

/** Carries the gateway's error text verbatim. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

const DEFAULT_POLL_MS = 500;

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function errorText(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { error?: unknown };
    if (typeof body.error === "string") return body.error;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${response.status}`;
}

export interface PollSettings {
  intervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorText(response));
    }
    return response;
  }

  async uploadImage(data: Blob | ArrayBuffer | Uint8Array): Promise<UploadResponse> {
    const body = data instanceof Uint8Array ? new Blob([data as BlobPart]) : data;
    const response = await this.request("/v1/images", {
      method: "POST",
      headers: { "content-type": "image/png" },
      body,
    });
    return (await response.json()) as UploadResponse;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/v1/images/${imageId}`;
  }

  async fetchImageBytes(imageId: string): Promise<Uint8Array> {
    const response = await this.request(`/v1/images/${imageId}`);
    return new Uint8Array(await response.arrayBuffer());
  }

  async submit(request: AnonymizeRequest): Promise<string> {
    const response = await this.request("/v1/anonymize", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    const body = (await response.json()) as { job_id: string };
    return body.job_id;
  }

  async getJob(jobId: string): Promise<JobStatus> {
    const response = await this.request(`/v1/jobs/${jobId}`);
    return (await response.json()) as JobStatus;
  }

  resultUrl(jobId: string): string {
    return `${this.baseUrl}/v1/results/${jobId}`;
  }

  async fetchResultBytes(jobId: string): Promise<Uint8Array> {
    const response = await this.request(`/v1/results/${jobId}`);
    return new Uint8Array(await response.arrayBuffer());
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchFn(`${this.baseUrl}/v1/health`);
      return response.ok;
    } catch {
      return false;
    }
  }

  /** Polls the job until it settles (done or failed). */
  async waitForJob(jobId: string, settings: PollSettings = {}): Promise<JobStatus> {
    const intervalMs = settings.intervalMs ?? DEFAULT_POLL_MS;
    const timeoutMs = settings.timeoutMs ?? 60_000;
    const sleep = settings.sleep ?? defaultSleep;
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.state === "done" || job.state === "failed") return job;
      if (Date.now() >= deadline) {
        throw new ApiError(0, `job ${jobId} still ${job.state} after ${timeoutMs}ms`);
      }
      await sleep(intervalMs);
    }
  }
}
