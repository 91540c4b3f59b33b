/**
 * Exporter CLI.
 *
 *   text      --names FILE [--template "Part of {scene}"] [--dim N] -o OUT
 *   fixed-bg  --scene-table FILE -o OUT
 *   scenes    --images-dir DIR [--top-k K] [--tau X] -o OUT
 *   regions   --manifest FILE --images-dir DIR --class-table FILE
 *             --scene-table FILE [--template T] -o OUT
 */

import {
  exportFixedBackground,
  exportRegionEmbeddings,
  exportSceneContexts,
  exportTextEmbeddings,
  readNames,
} from "./exporters.js";
import { HashingTextEncoder } from "./textEncoder.js";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "-o") {
      out.set("output", argv[++i]);
    } else if (arg.startsWith("--")) {
      out.set(arg.slice(2), argv[++i]);
    } else {
      throw new Error(`unexpected argument ${arg}`);
    }
  }
  return out;
}

function need(args: Map<string, string>, key: string): string {
  const v = args.get(key);
  if (v === undefined) throw new Error(`missing --${key}`);
  return v;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    const args = parseArgs(rest);
    if (command === "text") {
      const names = readNames(need(args, "names"));
      const dim = Number(args.get("dim") ?? 512);
      const result = exportTextEmbeddings(
        names,
        args.get("template") ?? null,
        need(args, "output"),
        new HashingTextEncoder(dim),
      );
      console.log(`text: wrote ${result.written} embeddings`);
      for (const f of result.failures) console.error(`warning: ${f}`);
      return result.failures.length > 0 ? 1 : 0;
    }
    if (command === "fixed-bg") {
      exportFixedBackground(need(args, "scene-table"), need(args, "output"));
      console.log("fixed-bg: wrote 1 embedding");
      return 0;
    }
    if (command === "scenes") {
      const topK = args.has("top-k") ? Number(args.get("top-k")) : null;
      const tau = Number(args.get("tau") ?? 900);
      const result = exportSceneContexts(need(args, "images-dir"), need(args, "output"), topK, tau);
      console.log(`scenes: wrote ${result.written} contexts`);
      for (const f of result.failures) console.error(`warning: ${f}`);
      return result.failures.length > 0 ? 1 : 0;
    }
    if (command === "regions") {
      const result = exportRegionEmbeddings(
        need(args, "manifest"),
        need(args, "images-dir"),
        need(args, "class-table"),
        need(args, "scene-table"),
        need(args, "output"),
        args.get("template") ?? "Part of {scene}",
      );
      console.log(`regions: wrote ${result.written} embeddings`);
      for (const f of result.failures) console.error(`warning: ${f}`);
      return result.failures.length > 0 ? 1 : 0;
    }
    console.error(`unknown command ${command ?? "(none)"}`);
    return 2;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
