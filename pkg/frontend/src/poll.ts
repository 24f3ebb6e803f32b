/** Poll a job until it reaches a terminal state.
 *
 * Starts at one poll per second and backs off geometrically, so a stalled
 * queue does not hammer the service. Resolves with the terminal job
 * (done or failed — the caller renders the diagnostic); rejects only on
 * transport errors, abort, or timeout.
 */

import type { Job } from "./types.js";

export interface PollOptions {
  intervalMs?: number;
  backoffFactor?: number;
  maxIntervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (job: Job) => void;
  signal?: AbortSignal;
  /** injectable for tests */
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollJob(
  getJob: (id: string) => Promise<Job>,
  jobId: string,
  options: PollOptions = {},
): Promise<Job> {
  const {
    intervalMs = 1000,
    backoffFactor = 1.5,
    maxIntervalMs = 10_000,
    timeoutMs = 10 * 60_000,
    onUpdate,
    signal,
    sleep = defaultSleep,
  } = options;

  const startedAt = Date.now();
  let interval = intervalMs;
  for (;;) {
    if (signal?.aborted) throw new Error("polling aborted");
    const job = await getJob(jobId);
    onUpdate?.(job);
    if (job.status === "done" || job.status === "failed") return job;
    if (Date.now() - startedAt > timeoutMs) {
      throw new Error(`job ${jobId} still ${job.status} after ${timeoutMs} ms`);
    }
    await sleep(interval);
    interval = Math.min(interval * backoffFactor, maxIntervalMs);
  }
}
