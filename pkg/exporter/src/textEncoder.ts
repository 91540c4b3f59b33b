/**
 * Deterministic local text encoder ("hashenc-v1").
 *
 * Embeds a string by hashing its word tokens and boundary-marked character
 * n-grams into signed buckets of a D-dimensional vector, then L2
 * normalizing. No model weights required; identical output on every
 * platform. Swap in a real text tower by implementing TextEncoder and
 * updating models.lock.json.
 */

export interface TextEncoder {
  readonly id: string;
  readonly dim: number;
  encode(text: string): Float64Array;
}

export class EncodingFailure extends Error {}

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = (1n << 64n) - 1n;

export function fnv1a64(text: string): bigint {
  let hash = FNV_OFFSET;
  const bytes = Buffer.from(text, "utf-8");
  for (const b of bytes) {
    hash ^= BigInt(b);
    hash = (hash * FNV_PRIME) & MASK64;
  }
  return hash;
}

function tokens(text: string, ngramSizes: number[]): string[] {
  const normalized = text.toLowerCase().trim();
  const words = normalized.split(/[^a-z0-9]+/).filter((w) => w.length > 0);
  const out: string[] = words.map((w) => `w:${w}`);
  const padded = `^${words.join("_")}$`;
  for (const n of ngramSizes) {
    for (let i = 0; i + n <= padded.length; i++) {
      out.push(`g${n}:${padded.slice(i, i + n)}`);
    }
  }
  return out;
}

export class HashingTextEncoder implements TextEncoder {
  readonly id = "hashenc-v1";

  constructor(
    readonly dim: number = 512,
    private readonly ngramSizes: number[] = [3, 4],
  ) {}

  encode(text: string): Float64Array {
    const toks = tokens(text, this.ngramSizes);
    if (toks.length === 0) {
      throw new EncodingFailure(`nothing to encode in ${JSON.stringify(text)}`);
    }
    const vec = new Float64Array(this.dim);
    for (const tok of toks) {
      const hash = fnv1a64(tok);
      const index = Number(hash % BigInt(this.dim));
      const sign = ((hash >> 32n) & 1n) === 1n ? 1 : -1;
      vec[index] += sign;
    }
    let sq = 0;
    for (const v of vec) sq += v * v;
    if (sq === 0) {
      throw new EncodingFailure(`tokens of ${JSON.stringify(text)} cancelled out`);
    }
    const norm = Math.sqrt(sq);
    for (let i = 0; i < this.dim; i++) vec[i] /= norm;
    return vec;
  }
}

export function applyTemplate(template: string, scene: string): string {
  if (!template.includes("{scene}")) {
    throw new EncodingFailure(`template ${JSON.stringify(template)} lacks {scene}`);
  }
  return template.replaceAll("{scene}", scene);
}
