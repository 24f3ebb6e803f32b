/** Design-session state: current source, mask config, prompt, submitted
 * jobs, result gallery, and the promote/undo loop.
 *
 * The gallery only ever references image ids returned by the service.
 * Promotions append to an immutable history log; undo walks a separate
 * stack of previous sources, so promote-then-undo restores the original
 * source exactly. State round-trips through a Storage-like backend
 * (localStorage in the browser); job ids are re-polled after reload.
 */

import type { Job, MaskParams } from "./types.js";
import { DEFAULT_MASK } from "./types.js";

/** The current editing source: a service-stored image, or a local file
 * not yet uploaded (lost on reload). */
export type SourceRef =
  | { kind: "stored"; imageId: string }
  | { kind: "local"; blob: Blob };

export interface GalleryItem {
  jobId: string;
  variation: number;
  imageId: string;
}

export interface PromotionRecord {
  at: string; // ISO timestamp
  item: GalleryItem;
}

export interface PersistedSession {
  version: 1;
  mask: MaskParams;
  prompt: string;
  variations: number;
  advanced: { seed: number; steps: number; guidance_scale: number };
  sourceImageId: string | null;
  jobIds: string[];
  gallery: GalleryItem[];
  promotions: PromotionRecord[];
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "dicti-studio-session";

export class Session {
  mask: MaskParams = { ...DEFAULT_MASK };
  prompt = "";
  variations = 4;
  advanced = { seed: 0, steps: 50, guidance_scale: 7.5 };

  private source_: SourceRef | null = null;
  private jobIds: string[] = [];
  private gallery_: GalleryItem[] = [];
  private promotions_: PromotionRecord[] = [];
  private undoStack: SourceRef[] = [];

  constructor(private readonly storage?: StorageLike) {}

  get source(): SourceRef | null {
    return this.source_;
  }

  get gallery(): readonly GalleryItem[] {
    return this.gallery_;
  }

  /** Append-only log of promotions within this session. */
  get promotions(): readonly PromotionRecord[] {
    return this.promotions_;
  }

  get jobs(): readonly string[] {
    return this.jobIds;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  setSource(source: SourceRef): void {
    this.source_ = source;
    this.persist();
  }

  trackJob(job: Job): void {
    if (!this.jobIds.includes(job.id)) this.jobIds.push(job.id);
    this.persist();
  }

  /** Register a finished job's variations as gallery tiles. */
  addResults(job: Job): GalleryItem[] {
    if (job.status !== "done") return [];
    const added: GalleryItem[] = [];
    job.result_image_ids.forEach((imageId, variation) => {
      const exists = this.gallery_.some(
        (g) => g.jobId === job.id && g.variation === variation,
      );
      if (!exists) {
        const item = { jobId: job.id, variation, imageId };
        this.gallery_.push(item);
        added.push(item);
      }
    });
    this.persist();
    return added;
  }

  tilesForJob(jobId: string): GalleryItem[] {
    return this.gallery_.filter((g) => g.jobId === jobId);
  }

  /** Make a completed result the next editing source. */
  promote(item: GalleryItem, now: () => string = () => new Date().toISOString()): void {
    if (!this.gallery_.some((g) => g.imageId === item.imageId && g.jobId === item.jobId)) {
      throw new Error("can only promote items from the gallery");
    }
    if (this.source_ !== null) this.undoStack.push(this.source_);
    this.promotions_.push({ at: now(), item });
    this.source_ = { kind: "stored", imageId: item.imageId };
    this.persist();
  }

  /** Restore the source from before the last promotion. The promotion log
   * keeps its record; only the source pointer moves back. */
  undo(): boolean {
    const previous = this.undoStack.pop();
    if (previous === undefined) return false;
    this.source_ = previous;
    this.persist();
    return true;
  }

  // -- persistence ---------------------------------------------------------

  persist(): void {
    if (!this.storage) return;
    const data: PersistedSession = {
      version: 1,
      mask: this.mask,
      prompt: this.prompt,
      variations: this.variations,
      advanced: this.advanced,
      sourceImageId: this.source_?.kind === "stored" ? this.source_.imageId : null,
      jobIds: this.jobIds,
      gallery: this.gallery_,
      promotions: this.promotions_,
    };
    this.storage.setItem(STORAGE_KEY, JSON.stringify(data));
  }

  /** Rehydrate from storage. Local (never-uploaded) sources cannot be
   * restored; job ids are returned for the caller to re-poll. */
  restore(): string[] {
    if (!this.storage) return [];
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return [];
    let data: PersistedSession;
    try {
      data = JSON.parse(raw) as PersistedSession;
    } catch {
      return [];
    }
    if (data.version !== 1) return [];
    this.mask = data.mask;
    this.prompt = data.prompt;
    this.variations = data.variations;
    this.advanced = data.advanced;
    this.jobIds = data.jobIds;
    this.gallery_ = data.gallery;
    this.promotions_ = data.promotions;
    this.source_ = data.sourceImageId ? { kind: "stored", imageId: data.sourceImageId } : null;
    this.undoStack = [];
    return [...this.jobIds];
  }
}
