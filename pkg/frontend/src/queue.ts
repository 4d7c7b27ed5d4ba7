/**
 * Retry queue for submissions that failed on the network.
 *
 * Jobs run strictly in order. A failing head job is retried with exponential
 * backoff a bounded number of times per flush; after that the queue stays
 * put until the next flush() call (the browser layer wires that to the
 * "online" event), so work survives connectivity gaps. Server-rejected
 * submissions (validation errors) are not retried; they reject immediately.
 */

export interface QueuedJob<T> {
  run: () => Promise<T>;
  resolve: (value: T) => void;
  reject: (error: unknown) => void;
}

export interface RetryOptions {
  baseDelayMs?: number;
  maxDelayMs?: number;
  attemptsPerFlush?: number;
  isFatal?: (error: unknown) => boolean;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class SubmissionQueue {
  private jobs: QueuedJob<unknown>[] = [];
  private flushing = false;
  private readonly baseDelayMs: number;
  private readonly maxDelayMs: number;
  private readonly attemptsPerFlush: number;
  private readonly isFatal: (error: unknown) => boolean;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(options: RetryOptions = {}) {
    this.baseDelayMs = options.baseDelayMs ?? 500;
    this.maxDelayMs = options.maxDelayMs ?? 30_000;
    this.attemptsPerFlush = options.attemptsPerFlush ?? 3;
    this.isFatal = options.isFatal ?? (() => false);
    this.sleep = options.sleep ?? defaultSleep;
  }

  get pending(): number {
    return this.jobs.length;
  }

  /** Queue work and start flushing; resolves when the job eventually runs. */
  enqueue<T>(run: () => Promise<T>): Promise<T> {
    return new Promise<T>((resolve, reject) => {
      this.jobs.push({ run, resolve, reject } as QueuedJob<unknown>);
      void this.flush();
    });
  }

  /** Drain the queue in order; call again (e.g. on "online") to resume. */
  async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    let failures = 0;
    try {
      while (this.jobs.length > 0) {
        const job = this.jobs[0];
        try {
          const value = await job.run();
          this.jobs.shift();
          failures = 0;
          job.resolve(value);
        } catch (error) {
          if (this.isFatal(error)) {
            this.jobs.shift();
            job.reject(error);
            continue;
          }
          failures += 1;
          if (failures >= this.attemptsPerFlush) {
            return; // leave the queue intact for the next flush
          }
          await this.sleep(Math.min(this.maxDelayMs, this.baseDelayMs * 2 ** (failures - 1)));
        }
      }
    } finally {
      this.flushing = false;
    }
  }
}
