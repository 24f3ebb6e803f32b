/** Debounce plus in-flight cancellation for the live preview sliders.
 *
 * Rapid slider movement collapses to one trailing call, and starting a
 * new request aborts the previous one, so at most one preview request is
 * ever in flight.
 */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
}

export function debounce<A extends unknown[]>(fn: (...args: A) => void, waitMs: number): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | undefined;
  const wrapped = (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = undefined;
      fn(...args);
    }, waitMs);
  };
  wrapped.cancel = () => {
    if (timer !== undefined) clearTimeout(timer);
    timer = undefined;
  };
  return wrapped;
}

/** Runs async tasks so only the latest one is in flight: starting a new
 * task aborts the previous one's signal; stale results are dropped. */
export class LatestOnly<R> {
  private controller: AbortController | null = null;
  private generation = 0;

  get inFlight(): boolean {
    return this.controller !== null;
  }

  /** Resolves with the task result, or undefined if superseded/aborted. */
  async run(task: (signal: AbortSignal) => Promise<R>): Promise<R | undefined> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const generation = ++this.generation;
    try {
      const result = await task(controller.signal);
      return generation === this.generation ? result : undefined;
    } catch (error) {
      if (controller.signal.aborted) return undefined;
      throw error;
    } finally {
      if (generation === this.generation) this.controller = null;
    }
  }

  cancel(): void {
    this.controller?.abort();
    this.controller = null;
    this.generation++;
  }
}
