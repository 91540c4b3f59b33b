/**
 * embtab v1 text format, matching the toolkit loader byte conventions:
 *
 *   embtab v1 <dim> <count> <normalized:0|1>
 *   # optional comment lines
 *   <name>\t<v1> <v2> ... <vD>
 *
 * Numbers are written with the shortest round-trip decimal (JS Number
 * stringification). Names must not contain tab or newline characters.
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface EmbTable {
  dim: number;
  names: string[];
  vectors: Float64Array[];
  normalized: boolean;
  comments: string[];
}

export class FormatError extends Error {}

function checkName(name: string): void {
  if (name.length === 0 || /[\t\n\r]/.test(name)) {
    throw new FormatError(`invalid entry name ${JSON.stringify(name)}`);
  }
}

export function saveEmbTable(table: EmbTable, path: string): void {
  const lines: string[] = [
    `embtab v1 ${table.dim} ${table.names.length} ${table.normalized ? 1 : 0}`,
  ];
  for (const comment of table.comments) {
    lines.push(comment.startsWith("#") ? comment : `# ${comment}`);
  }
  table.names.forEach((name, i) => {
    checkName(name);
    const vec = table.vectors[i];
    if (vec.length !== table.dim) {
      throw new FormatError(`entry ${name} has dim ${vec.length}, expected ${table.dim}`);
    }
    lines.push(`${name}\t${Array.from(vec, (v) => String(v)).join(" ")}`);
  });
  writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

export function loadEmbTable(path: string): EmbTable {
  const lines = readFileSync(path, "utf-8").split("\n");
  const header = lines[0].split(" ");
  if (header.length !== 5 || header[0] !== "embtab" || header[1] !== "v1") {
    throw new FormatError(`${path}:1: bad header ${JSON.stringify(lines[0])}`);
  }
  const dim = Number(header[2]);
  const count = Number(header[3]);
  const normalized = header[4] === "1";
  const names: string[] = [];
  const vectors: Float64Array[] = [];
  const comments: string[] = [];
  const seen = new Set<string>();
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (line === "") continue;
    if (line.startsWith("#")) {
      comments.push(line);
      continue;
    }
    const tab = line.indexOf("\t");
    if (tab < 0) throw new FormatError(`${path}:${i + 1}: missing tab separator`);
    const name = line.slice(0, tab);
    if (seen.has(name)) throw new FormatError(`${path}:${i + 1}: duplicate name ${name}`);
    seen.add(name);
    const parts = line.slice(tab + 1).split(" ");
    if (parts.length !== dim) {
      throw new FormatError(`${path}:${i + 1}: expected ${dim} values, got ${parts.length}`);
    }
    const vec = new Float64Array(dim);
    for (let j = 0; j < dim; j++) {
      const v = Number(parts[j]);
      if (Number.isNaN(v)) throw new FormatError(`${path}:${i + 1}: bad number ${parts[j]}`);
      vec[j] = v;
    }
    names.push(name);
    vectors.push(vec);
  }
  if (names.length !== count) {
    throw new FormatError(`${path}: header promises ${count} records, found ${names.length}`);
  }
  return { dim, names, vectors, normalized, comments };
}

export function l2Normalize(vec: Float64Array): Float64Array {
  let sq = 0;
  for (const v of vec) sq += v * v;
  const norm = Math.sqrt(sq);
  if (norm === 0) throw new FormatError("cannot normalize a zero vector");
  const out = new Float64Array(vec.length);
  for (let i = 0; i < vec.length; i++) out[i] = vec[i] / norm;
  return out;
}

export function meanVector(vectors: Float64Array[]): Float64Array {
  if (vectors.length === 0) throw new FormatError("mean of zero vectors");
  const out = new Float64Array(vectors[0].length);
  for (const vec of vectors) {
    for (let i = 0; i < out.length; i++) out[i] += vec[i];
  }
  for (let i = 0; i < out.length; i++) out[i] /= vectors.length;
  return out;
}
