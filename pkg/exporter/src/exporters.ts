/**
 * Export operations: text embeddings, scene contexts, region embeddings,
 * and the fixed background row, all in the toolkit's file formats.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { EmbTable, l2Normalize, loadEmbTable, meanVector, saveEmbTable } from "./embtab.js";
import {
  Palette,
  PaletteMixEncoder,
  classifyScene,
  loadPalette,
} from "./paletteModel.js";
import { ImageUnreadable, crop, readPPM } from "./ppm.js";
import { EncodingFailure, HashingTextEncoder, TextEncoder, applyTemplate } from "./textEncoder.js";

export class ExportError extends Error {}

export interface ManifestSample {
  region_id: string;
  image_id: number | string;
  kind: string;
  bin_index: number;
  iou_range: [number, number];
  gt: [number, number, number, number];
  box: [number, number, number, number];
}

export function loadManifest(path: string): ManifestSample[] {
  const data = JSON.parse(readFileSync(path, "utf-8"));
  if (!Array.isArray(data.samples)) throw new ExportError(`${path}: no samples array`);
  return data.samples as ManifestSample[];
}

export function readNames(path: string): string[] {
  const text = readFileSync(path, "utf-8");
  if (text.trimStart().startsWith("{")) {
    // COCO annotations: use categories[].name
    const data = JSON.parse(text);
    return (data.categories ?? []).map((c: { name: string }) => c.name);
  }
  return text.split("\n").map((line) => line.trim()).filter((line) => line.length > 0);
}

/** One unit vector per (templated) name; returns per-name failures. */
export function exportTextEmbeddings(
  names: string[],
  template: string | null,
  outPath: string,
  encoder: TextEncoder = new HashingTextEncoder(),
): { written: number; failures: string[] } {
  if (names.length === 0) throw new ExportError("empty name list; nothing to export");
  const seen = new Set<string>();
  const outNames: string[] = [];
  const vectors: Float64Array[] = [];
  const failures: string[] = [];
  for (const raw of names) {
    const name = template ? applyTemplate(template, raw) : raw;
    if (seen.has(name)) throw new ExportError(`duplicate name ${name}`);
    seen.add(name);
    try {
      vectors.push(encoder.encode(name));
      outNames.push(name);
    } catch (err) {
      if (err instanceof EncodingFailure) {
        failures.push(`${name}: ${err.message}`);
      } else {
        throw err;
      }
    }
  }
  if (outNames.length === 0) throw new ExportError("every name failed to encode");
  const table: EmbTable = {
    dim: encoder.dim,
    names: outNames,
    vectors,
    normalized: true,
    comments: [
      `# encoder: ${encoder.id} dim=${encoder.dim}`,
      ...(template ? [`# template: ${template}`] : []),
    ],
  };
  saveEmbTable(table, outPath);
  return { written: outNames.length, failures };
}

/** Single-row table holding the mean of all scene embeddings. */
export function exportFixedBackground(sceneTablePath: string, outPath: string): void {
  const scenes = loadEmbTable(sceneTablePath);
  const mean = l2Normalize(meanVector(scenes.vectors));
  saveEmbTable(
    {
      dim: scenes.dim,
      names: ["background"],
      vectors: [mean],
      normalized: true,
      comments: [`# fixed background: normalized mean of ${scenes.names.length} scene embeddings`],
    },
    outPath,
  );
}

/** Scene-context file over every image listed in the palette manifest. */
export function exportSceneContexts(
  imagesDir: string,
  outPath: string,
  topK: number | null = null,
  tau = 900,
): { written: number; failures: string[] } {
  const palette = loadPalette(join(imagesDir, "palette.json"));
  const ids = Object.keys(palette.images).sort((a, b) => Number(a) - Number(b));
  const rows: string[] = [];
  const failures: string[] = [];
  for (const id of ids) {
    let ranked: Array<[string, number]>;
    try {
      ranked = classifyScene(readPPM(join(imagesDir, palette.images[id])), palette, tau);
    } catch (err) {
      if (err instanceof ImageUnreadable) {
        failures.push(err.message);
        continue;
      }
      throw err;
    }
    if (topK !== null) ranked = ranked.slice(0, topK);
    const cells = [id];
    for (const [scene, prob] of ranked) {
      cells.push(scene, String(prob));
    }
    rows.push(cells.join("\t"));
  }
  const body = [`scenectx v1 ${rows.length}`, ...rows].join("\n") + "\n";
  writeFileSync(outPath, body, "utf-8");
  return { written: rows.length, failures };
}

/** Region-embedding table keyed by manifest region id. */
export function exportRegionEmbeddings(
  manifestPath: string,
  imagesDir: string,
  classTablePath: string,
  sceneTablePath: string,
  outPath: string,
  promptTemplate = "Part of {scene}",
): { written: number; failures: string[] } {
  const samples = loadManifest(manifestPath);
  const palette = loadPalette(join(imagesDir, "palette.json"));
  const classTable = loadEmbTable(classTablePath);
  const sceneTable = loadEmbTable(sceneTablePath);
  const encoder = new PaletteMixEncoder(palette, classTable, sceneTable, promptTemplate);
  const names: string[] = [];
  const vectors: Float64Array[] = [];
  const failures: string[] = [];
  const cache = new Map<string, ReturnType<typeof readPPM>>();
  for (const sample of samples) {
    const key = String(sample.image_id);
    const rel = palette.images[key];
    if (!rel) {
      failures.push(`${sample.region_id}: no image for id ${key}`);
      continue;
    }
    try {
      let img = cache.get(key);
      if (!img) {
        img = readPPM(join(imagesDir, rel));
        cache.set(key, img);
      }
      const [x1, y1, x2, y2] = sample.box;
      vectors.push(encoder.encode(crop(img, x1, y1, x2, y2)));
      names.push(sample.region_id);
    } catch (err) {
      if (err instanceof ImageUnreadable) {
        failures.push(`${sample.region_id}: ${err.message}`);
        continue;
      }
      throw err;
    }
  }
  saveEmbTable(
    {
      dim: classTable.dim,
      names,
      vectors,
      normalized: true,
      comments: [`# encoder: ${encoder.id}`],
    },
    outPath,
  );
  return { written: names.length, failures };
}
