/** Wire types of the dicti service API. */

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface MaskParams {
  d: number;
  e: number;
  f: number;
}

export interface JobSpecInput {
  prompt: string;
  mask?: MaskParams;
  seed?: number;
  steps?: number;
  guidance_scale?: number;
  variations?: number;
}

export interface Job {
  id: string;
  status: JobStatus;
  spec: {
    prompt: string;
    mask: MaskParams;
    seed: number;
    steps: number;
    guidance_scale: number;
    variations: number;
    image_id: string;
    labels_id: string | null;
  };
  created_at: string;
  finished_at: string | null;
  result_image_ids: string[];
  error: string | null;
}

export interface PreviewStats {
  width: number;
  height: number;
  inpainting_area_px: number;
  head_area_px: number;
}

export interface MaskPreview {
  inpainting_mask_png: string; // base64 PNG
  head_mask_png: string; // base64 PNG
  stats: PreviewStats;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}

export const DEFAULT_MASK: MaskParams = { d: 70, e: 10, f: 5 };
