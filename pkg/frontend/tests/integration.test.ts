/** Acceptance flows against a live service (stub backend).
 *
 * Spawns `dicti serve` (falls back to `python3 -m dicti.cli serve`); the
 * whole file is skipped when neither is available, so the unit suite
 * stays self-contained.
 */
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { pollJob } from "../src/poll.js";
import { Session } from "../src/session.js";

const PORT = 8941;
const BASE = `http://127.0.0.1:${PORT}`;

function serveCommand(): [string, string[]] | null {
  for (const [cmd, prefix] of [
    ["dicti", []],
    ["python3", ["-m", "dicti.cli"]],
  ] as const) {
    const probe = spawnSync(cmd, [...prefix, "--help"], { stdio: "ignore" });
    if (probe.status === 0) return [cmd, [...prefix]];
  }
  return null;
}

const command = serveCommand();
const maybe = command ? describe : describe.skip;

function fixture(name: string): Blob {
  const bytes = readFileSync(join(__dirname, "fixtures", name));
  return new Blob([bytes], { type: "image/png" });
}

maybe("studio flows against a live service", () => {
  let server: ChildProcess;
  const api = new ApiClient(BASE);

  beforeAll(async () => {
    const [cmd, prefix] = command!;
    const dataDir = mkdtempSync(join(tmpdir(), "dicti-studio-"));
    server = spawn(
      cmd,
      [...prefix, "serve", "--data-dir", dataDir, "--port", String(PORT), "--backend", "stub"],
      { stdio: "ignore" },
    );
    const deadline = Date.now() + 30_000;
    for (;;) {
      try {
        const health = await api.health();
        if (health.status === "ok") return;
      } catch {
        /* not up yet */
      }
      if (Date.now() > deadline) throw new Error("service did not come up");
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }, 40_000);

  afterAll(() => {
    server?.kill();
  });

  it("preview overlay area strictly grows as d moves 0 -> 70", async () => {
    const photo = fixture("photo.png");
    const labels = fixture("labels.png");
    let previousArea = -1;
    for (const d of [0, 20, 40, 70]) {
      const preview = await api.previewMask(photo, { d, e: 5, f: 2 }, { labels });
      expect(preview.stats.inpainting_area_px).toBeGreaterThan(previousArea);
      previousArea = preview.stats.inpainting_area_px;
    }
  });

  it("a design run yields exactly `variations` gallery tiles whose exported bytes match the service", async () => {
    const session = new Session();
    const variations = 3;
    const job = await api.submitJob(
      fixture("photo.png"),
      { prompt: "a red silk dress", variations, mask: { d: 8, e: 2, f: 1 } },
      fixture("labels.png"),
    );
    session.trackJob(job);
    session.setSource({ kind: "stored", imageId: job.spec.image_id });

    const finished = await pollJob((id) => api.getJob(id), job.id, { intervalMs: 100 });
    expect(finished.status).toBe("done");
    session.addResults(finished);

    const tiles = session.tilesForJob(job.id);
    expect(tiles).toHaveLength(variations);

    for (const tile of tiles) {
      // export path: the bytes the UI downloads are the service's bytes
      const exported = new Uint8Array(await (await api.fetchImage(tile.imageId)).arrayBuffer());
      const direct = new Uint8Array(await (await fetch(api.imageUrl(tile.imageId))).arrayBuffer());
      expect(exported.length).toBeGreaterThan(0);
      expect(Buffer.from(exported).equals(Buffer.from(direct))).toBe(true);
    }
  }, 30_000);

  it("promote-then-undo restores the original source", async () => {
    const session = new Session();
    const job = await api.submitJob(
      fixture("photo.png"),
      { prompt: "a coat", variations: 1, mask: { d: 8, e: 2, f: 1 } },
      fixture("labels.png"),
    );
    session.setSource({ kind: "stored", imageId: job.spec.image_id });
    const finished = await pollJob((id) => api.getJob(id), job.id, { intervalMs: 100 });
    session.addResults(finished);

    const original = session.source;
    const tile = session.gallery[0]!;
    session.promote(tile);
    expect(session.source).toEqual({ kind: "stored", imageId: tile.imageId });
    // promoted source is a real, fetchable service image
    const promotedBytes = await api.fetchImage(tile.imageId);
    expect(promotedBytes.size).toBeGreaterThan(0);

    expect(session.undo()).toBe(true);
    expect(session.source).toEqual(original);
  }, 30_000);

  it("failed jobs surface their diagnostic", async () => {
    // all-background labels: the service accepts the job, the worker fails it
    const blank = await blankLabels();
    const job = await api.submitJob(
      fixture("photo.png"),
      { prompt: "a coat", variations: 1, mask: { d: 4, e: 1, f: 1 } },
      blank,
    );
    const finished = await pollJob((id) => api.getJob(id), job.id, { intervalMs: 100 });
    expect(finished.status).toBe("failed");
    expect(finished.error).toMatch(/no body pixels/);
  }, 30_000);
});

/** All-zero grayscale PNG matching the photo fixture's 144x192 size. */
async function blankLabels(): Promise<Blob> {
  const { deflateSync } = await import("node:zlib");
  const width = 144;
  const height = 192;
  const raw = Buffer.alloc(height * (1 + width)); // filter byte + row of zeros
  const idat = deflateSync(raw);

  const chunks: Buffer[] = [];
  const signature = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

  function chunk(type: string, data: Buffer): Buffer {
    const len = Buffer.alloc(4);
    len.writeUInt32BE(data.length);
    const body = Buffer.concat([Buffer.from(type, "ascii"), data]);
    const crcBuf = Buffer.alloc(4);
    crcBuf.writeUInt32BE(crc32(body) >>> 0);
    return Buffer.concat([len, body, crcBuf]);
  }

  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  chunks.push(signature, chunk("IHDR", ihdr), chunk("IDAT", idat), chunk("IEND", Buffer.alloc(0)));
  return new Blob([Buffer.concat(chunks)], { type: "image/png" });
}

let crcTable: number[] | undefined;

function crc32(buf: Buffer): number {
  if (!crcTable) {
    crcTable = [];
    for (let n = 0; n < 256; n++) {
      let c = n;
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      crcTable[n] = c >>> 0;
    }
  }
  let crc = 0xffffffff;
  for (const byte of buf) crc = (crcTable[(crc ^ byte) & 0xff]! ^ (crc >>> 8)) >>> 0;
  return (crc ^ 0xffffffff) >>> 0;
}
