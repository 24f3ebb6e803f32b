/** Studio wiring: upload, live mask preview, design submission, gallery,
 * compare, promote/undo, export. */

import { ApiClient, ApiError } from "./api.js";
import { LatestOnly, debounce } from "./debounce.js";
import { INPAINT_TINT, HEAD_TINT, coveragePercent, drawTintedMask } from "./overlay.js";
import { pollJob } from "./poll.js";
import { Session, type GalleryItem, type SourceRef } from "./session.js";
import type { Job, MaskPreview } from "./types.js";

const api = new ApiClient("");
const session = new Session(window.localStorage);
const previewGate = new LatestOnly<MaskPreview | null>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const fileInput = el<HTMLInputElement>("file-input");
const promptInput = el<HTMLInputElement>("prompt-input");
const variationsInput = el<HTMLInputElement>("variations-input");
const statusLine = el<HTMLDivElement>("status-line");
const statsLine = el<HTMLDivElement>("stats-line");
const canvas = el<HTMLCanvasElement>("preview-canvas");
const jobsPanel = el<HTMLDivElement>("jobs-panel");
const galleryPanel = el<HTMLDivElement>("gallery-panel");
const comparePanel = el<HTMLDivElement>("compare-panel");
const undoButton = el<HTMLButtonElement>("undo-button");
const submitButton = el<HTMLButtonElement>("submit-button");
const advancedToggle = el<HTMLButtonElement>("advanced-toggle");
const advancedPanel = el<HTMLDivElement>("advanced-panel");

const sliders = {
  d: el<HTMLInputElement>("slider-d"),
  e: el<HTMLInputElement>("slider-e"),
  f: el<HTMLInputElement>("slider-f"),
};

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? "error" : "";
}

async function sourceBlob(): Promise<Blob | null> {
  const source = session.source;
  if (!source) return null;
  if (source.kind === "local") return source.blob;
  return api.fetchImage(source.imageId);
}

async function renderSource(): Promise<HTMLImageElement | null> {
  const blob = await sourceBlob();
  if (!blob) return null;
  const image = new Image();
  image.src = URL.createObjectURL(blob);
  await image.decode();
  return image;
}

async function refreshPreview(): Promise<void> {
  const blob = await sourceBlob();
  if (!blob) return;
  setStatus("computing mask preview…");
  const preview = await previewGate.run(async (signal) => {
    try {
      return await api.previewMask(blob, session.mask, { signal });
    } catch (error) {
      if (error instanceof ApiError && error.code === "no_subject") {
        setStatus("no person detected in this photo", true);
        return null;
      }
      throw error;
    }
  });
  if (preview === undefined || preview === null) return; // superseded or no subject
  const image = await renderSource();
  if (!image) return;
  canvas.width = preview.stats.width;
  canvas.height = preview.stats.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.drawImage(image, 0, 0, canvas.width, canvas.height);
  await drawTintedMask(ctx, preview.inpainting_mask_png, INPAINT_TINT, canvas.width, canvas.height);
  await drawTintedMask(ctx, preview.head_mask_png, HEAD_TINT, canvas.width, canvas.height);
  const cover = coveragePercent(
    preview.stats.inpainting_area_px,
    preview.stats.width,
    preview.stats.height,
  );
  statsLine.textContent =
    `inpainting ${preview.stats.inpainting_area_px} px (${cover.toFixed(1)}%), ` +
    `head ${preview.stats.head_area_px} px`;
  setStatus("preview ready");
}

const debouncedPreview = debounce(() => {
  void refreshPreview().catch((error) => setStatus(String(error), true));
}, 200);

function bindSliders(): void {
  for (const key of ["d", "e", "f"] as const) {
    const slider = sliders[key];
    slider.value = String(session.mask[key]);
    el<HTMLSpanElement>(`value-${key}`).textContent = slider.value;
    slider.addEventListener("input", () => {
      session.mask[key] = Number(slider.value);
      el<HTMLSpanElement>(`value-${key}`).textContent = slider.value;
      session.persist();
      debouncedPreview();
    });
  }
}

function jobCard(job: Job): HTMLDivElement {
  let card = document.getElementById(`job-${job.id}`) as HTMLDivElement | null;
  if (!card) {
    card = document.createElement("div");
    card.id = `job-${job.id}`;
    card.className = "job-card";
    jobsPanel.prepend(card);
  }
  card.textContent = `${job.spec.prompt} — ${job.status}`;
  if (job.status === "failed") {
    card.classList.add("failed");
    card.textContent += `: ${job.error ?? "unknown error"}`;
  }
  return card;
}

function galleryTile(item: GalleryItem): void {
  const tile = document.createElement("figure");
  tile.className = "tile";
  const image = document.createElement("img");
  image.src = api.imageUrl(item.imageId);
  image.alt = `variation ${item.variation}`;
  const actions = document.createElement("figcaption");

  const promoteButton = document.createElement("button");
  promoteButton.textContent = "promote";
  promoteButton.addEventListener("click", () => {
    session.promote(item);
    undoButton.disabled = !session.canUndo;
    setStatus("promoted result to new source");
    void refreshPreview().catch((error) => setStatus(String(error), true));
  });

  const exportButton = document.createElement("button");
  exportButton.textContent = "export";
  exportButton.addEventListener("click", () => {
    void api.fetchImage(item.imageId).then((blob) => {
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = `${item.imageId.slice(0, 12)}.png`;
      link.click();
    });
  });

  const compareButton = document.createElement("button");
  compareButton.textContent = "compare";
  compareButton.addEventListener("click", () => void renderCompare(item.jobId));

  actions.append(promoteButton, exportButton, compareButton);
  tile.append(image, actions);
  galleryPanel.prepend(tile);
}

/** Source next to up to four variations of one job. */
async function renderCompare(jobId: string): Promise<void> {
  comparePanel.replaceChildren();
  const source = await renderSource();
  if (source) {
    source.className = "compare-cell";
    comparePanel.append(source);
  }
  for (const item of session.tilesForJob(jobId).slice(0, 4)) {
    const image = document.createElement("img");
    image.className = "compare-cell";
    image.src = api.imageUrl(item.imageId);
    comparePanel.append(image);
  }
}

async function watchJob(jobId: string): Promise<void> {
  const job = await pollJob((id) => api.getJob(id), jobId, {
    onUpdate: (update) => jobCard(update),
  });
  if (job.status === "done") {
    for (const item of session.addResults(job)) galleryTile(item);
    setStatus(`job done: ${job.result_image_ids.length} variation(s)`);
  }
}

async function submitDesign(): Promise<void> {
  const blob = await sourceBlob();
  if (!blob) {
    setStatus("choose a photo first", true);
    return;
  }
  session.prompt = promptInput.value.trim();
  if (!session.prompt) {
    setStatus("enter a garment description", true);
    return;
  }
  session.variations = Number(variationsInput.value) || 4;
  const job = await api.submitJob(blob, {
    prompt: session.prompt,
    mask: session.mask,
    variations: session.variations,
    seed: Number(el<HTMLInputElement>("seed-input").value) || 0,
    steps: Number(el<HTMLInputElement>("steps-input").value) || 50,
    guidance_scale: Number(el<HTMLInputElement>("guidance-input").value) || 7.5,
  });
  session.trackJob(job);
  if (session.source?.kind === "local") {
    // the upload is now content-addressed server-side; keep the stored ref
    session.setSource({ kind: "stored", imageId: job.spec.image_id });
  }
  jobCard(job);
  void watchJob(job.id).catch((error) => setStatus(String(error), true));
}

function bindControls(): void {
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    const source: SourceRef = { kind: "local", blob: file };
    session.setSource(source);
    undoButton.disabled = true;
    void refreshPreview().catch((error) => {
      if (error instanceof ApiError) setStatus(error.message, true);
      else setStatus(String(error), true);
    });
  });

  submitButton.addEventListener("click", () => {
    void submitDesign().catch((error) => {
      if (error instanceof ApiError && error.field) {
        setStatus(`${error.field}: ${error.message}`, true);
      } else {
        setStatus(String(error), true);
      }
    });
  });

  undoButton.addEventListener("click", () => {
    if (session.undo()) {
      undoButton.disabled = !session.canUndo;
      setStatus("restored previous source");
      void refreshPreview().catch((error) => setStatus(String(error), true));
    }
  });

  advancedToggle.addEventListener("click", () => {
    advancedPanel.hidden = !advancedPanel.hidden;
  });
}

async function restoreSession(): Promise<void> {
  const jobIds = session.restore();
  promptInput.value = session.prompt;
  variationsInput.value = String(session.variations);
  undoButton.disabled = true;
  for (const item of session.gallery) galleryTile(item);
  for (const jobId of jobIds) {
    void watchJob(jobId).catch(() => {
      /* job may be gone after a service reset */
    });
  }
  if (session.source) {
    void refreshPreview().catch(() => setStatus("stored source unavailable", true));
  }
}

bindSliders();
bindControls();
void restoreSession();
