/**
 * Palette-based scene classifier and region encoder for synthetic worlds.
 *
 * The palette file written next to rendered images maps scene and category
 * names to their flat RGB colors. Scene classification measures the image
 * border color against scene prototypes; region encoding votes each pixel
 * for its nearest palette entry and mixes the corresponding embedding
 * vectors. Both are deterministic stand-ins for pretrained towers, wired
 * through the same file interfaces a real model adapter would use.
 */

import { readFileSync } from "node:fs";

import { EmbTable, l2Normalize } from "./embtab.js";
import { Image } from "./ppm.js";

export interface Palette {
  scene_colors: Record<string, [number, number, number]>;
  category_colors: Record<string, [number, number, number]>;
  category_ids: Record<string, number>;
  images: Record<string, string>;
  image_scenes: Record<string, string>;
}

export function loadPalette(path: string): Palette {
  return JSON.parse(readFileSync(path, "utf-8")) as Palette;
}

function dist2(r: number, g: number, b: number, c: [number, number, number]): number {
  return (r - c[0]) ** 2 + (g - c[1]) ** 2 + (b - c[2]) ** 2;
}

/** Mean color of a border strip (background pixels dominate borders). */
export function borderColor(img: Image, strip = 2): [number, number, number] {
  let r = 0;
  let g = 0;
  let b = 0;
  let n = 0;
  const take = (x: number, y: number) => {
    const i = (y * img.width + x) * 3;
    r += img.data[i];
    g += img.data[i + 1];
    b += img.data[i + 2];
    n++;
  };
  const s = Math.min(strip, Math.floor(Math.min(img.width, img.height) / 2));
  for (let y = 0; y < img.height; y++) {
    for (let x = 0; x < img.width; x++) {
      if (x < s || y < s || x >= img.width - s || y >= img.height - s) take(x, y);
    }
  }
  return [r / n, g / n, b / n];
}

/** Full scene distribution from border color, softmax over -d^2 / tau. */
export function classifyScene(
  img: Image,
  palette: Palette,
  tau = 900,
): Array<[string, number]> {
  const color = borderColor(img);
  const names = Object.keys(palette.scene_colors).sort();
  const logits = names.map(
    (name) => -dist2(color[0], color[1], color[2], palette.scene_colors[name]) / tau,
  );
  const peak = Math.max(...logits);
  const expd = logits.map((v) => Math.exp(v - peak));
  const total = expd.reduce((a, v) => a + v, 0);
  const ranked = names.map(
    (name, i) => [name, expd[i] / total] as [string, number],
  );
  ranked.sort((a, b) => (b[1] - a[1]) || (a[0] < b[0] ? -1 : 1));
  return ranked;
}

export interface RegionEncoder {
  readonly id: string;
  encode(region: Image): Float64Array;
}

/**
 * Mixes class/scene embeddings by per-pixel nearest-palette-color voting.
 * Class vectors come from the toolkit's class table (keyed by category
 * name); scene vectors from the prompted scene table in palette order.
 */
export class PaletteMixEncoder implements RegionEncoder {
  readonly id = "palette-mix-v1";

  private entries: Array<{ color: [number, number, number]; vec: Float64Array }> = [];

  constructor(
    palette: Palette,
    classTable: EmbTable,
    sceneTable: EmbTable,
    promptTemplate = "Part of {scene}",
  ) {
    for (const [name, color] of Object.entries(palette.category_colors)) {
      const row = classTable.names.indexOf(name);
      if (row < 0) throw new Error(`category ${name} missing from class table`);
      this.entries.push({ color, vec: classTable.vectors[row] });
    }
    for (const [scene, color] of Object.entries(palette.scene_colors)) {
      const prompted = promptTemplate.replaceAll("{scene}", scene);
      const row = sceneTable.names.indexOf(prompted);
      if (row < 0) throw new Error(`scene ${prompted} missing from scene table`);
      this.entries.push({ color, vec: sceneTable.vectors[row] });
    }
  }

  encode(region: Image): Float64Array {
    const dim = this.entries[0].vec.length;
    const counts = new Float64Array(this.entries.length);
    const n = region.width * region.height;
    for (let p = 0; p < n; p++) {
      const r = region.data[p * 3];
      const g = region.data[p * 3 + 1];
      const b = region.data[p * 3 + 2];
      let best = 0;
      let bestD = Infinity;
      for (let e = 0; e < this.entries.length; e++) {
        const d = dist2(r, g, b, this.entries[e].color);
        if (d < bestD) {
          bestD = d;
          best = e;
        }
      }
      counts[best] += 1;
    }
    const out = new Float64Array(dim);
    for (let e = 0; e < this.entries.length; e++) {
      if (counts[e] === 0) continue;
      const w = counts[e] / n;
      const vec = this.entries[e].vec;
      for (let i = 0; i < dim; i++) out[i] += w * vec[i];
    }
    return l2Normalize(out);
  }
}
