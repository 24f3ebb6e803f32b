/** Mask overlays: semi-transparent tints of the service's mask PNGs laid
 * over the source photo. Pixels come straight from the service response;
 * the tint only recolors them. */

export interface Tint {
  r: number;
  g: number;
  b: number;
  alpha: number; // 0..255 where the mask is set
}

export const INPAINT_TINT: Tint = { r: 66, g: 135, b: 245, alpha: 110 };
export const HEAD_TINT: Tint = { r: 245, g: 166, b: 35, alpha: 110 };

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const binary = atob(b64);
    const bytes = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
    return bytes;
  }
  // node (tests)
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export function maskPngDataUrl(b64Png: string): string {
  return `data:image/png;base64,${b64Png}`;
}

/** Percentage of the photo the mask covers, for the stats line. */
export function coveragePercent(areaPx: number, width: number, height: number): number {
  if (width <= 0 || height <= 0) return 0;
  return (100 * areaPx) / (width * height);
}

/** Draw a tinted mask over a canvas that already holds the source photo.
 * The mask PNG is white-on-black; its luminance gates the tint. */
export async function drawTintedMask(
  ctx: CanvasRenderingContext2D,
  maskB64: string,
  tint: Tint,
  width: number,
  height: number,
): Promise<void> {
  const image = new Image();
  image.src = maskPngDataUrl(maskB64);
  await image.decode();
  const scratch = document.createElement("canvas");
  scratch.width = width;
  scratch.height = height;
  const sctx = scratch.getContext("2d");
  if (!sctx) throw new Error("2d canvas unavailable");
  sctx.drawImage(image, 0, 0, width, height);
  const pixels = sctx.getImageData(0, 0, width, height);
  const data = pixels.data;
  for (let i = 0; i < data.length; i += 4) {
    const on = (data[i] ?? 0) > 127;
    data[i] = tint.r;
    data[i + 1] = tint.g;
    data[i + 2] = tint.b;
    data[i + 3] = on ? tint.alpha : 0;
  }
  sctx.putImageData(pixels, 0, 0);
  ctx.drawImage(scratch, 0, 0);
}
