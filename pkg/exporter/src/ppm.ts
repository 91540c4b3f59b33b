/** Binary PPM (P6) reading and pixel cropping. */

import { readFileSync } from "node:fs";

export interface Image {
  width: number;
  height: number;
  data: Uint8Array; // RGB rows, 3 bytes per pixel
}

export class ImageUnreadable extends Error {}

export function readPPM(path: string): Image {
  let raw: Buffer;
  try {
    raw = readFileSync(path);
  } catch (err) {
    throw new ImageUnreadable(`${path}: ${(err as Error).message}`);
  }
  // header: magic, width, height, maxval separated by whitespace, then raw bytes
  let offset = 0;
  const fields: string[] = [];
  while (fields.length < 4 && offset < raw.length) {
    while (offset < raw.length && /\s/.test(String.fromCharCode(raw[offset]))) offset++;
    if (raw[offset] === 0x23) {
      // comment line
      while (offset < raw.length && raw[offset] !== 0x0a) offset++;
      continue;
    }
    let start = offset;
    while (offset < raw.length && !/\s/.test(String.fromCharCode(raw[offset]))) offset++;
    fields.push(raw.subarray(start, offset).toString("ascii"));
  }
  offset++; // single whitespace after maxval
  if (fields[0] !== "P6") throw new ImageUnreadable(`${path}: not a P6 PPM`);
  const [width, height, maxval] = fields.slice(1).map(Number);
  if (!(width > 0 && height > 0) || maxval !== 255) {
    throw new ImageUnreadable(`${path}: unsupported dimensions/maxval`);
  }
  const expected = width * height * 3;
  const data = raw.subarray(offset, offset + expected);
  if (data.length !== expected) {
    throw new ImageUnreadable(`${path}: truncated pixel data`);
  }
  return { width, height, data: new Uint8Array(data) };
}

/** Crop with continuous corners rounded to pixels, minimum size 1. */
export function crop(img: Image, x1: number, y1: number, x2: number, y2: number): Image {
  let cx1 = Math.min(Math.max(Math.round(x1), 0), img.width - 1);
  let cy1 = Math.min(Math.max(Math.round(y1), 0), img.height - 1);
  let cx2 = Math.min(Math.max(Math.round(x2), cx1 + 1), img.width);
  let cy2 = Math.min(Math.max(Math.round(y2), cy1 + 1), img.height);
  const w = cx2 - cx1;
  const h = cy2 - cy1;
  const out = new Uint8Array(w * h * 3);
  for (let y = 0; y < h; y++) {
    const src = ((cy1 + y) * img.width + cx1) * 3;
    out.set(img.data.subarray(src, src + w * 3), y * w * 3);
  }
  return { width: w, height: h, data: out };
}
