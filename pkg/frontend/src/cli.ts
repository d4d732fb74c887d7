#!/usr/bin/env node
/**
 * Command line front end: `cbplab-plots render --kind <kind> --in data.csv
 * --out figure.svg [--title ...] [--xlabel ...] [--ylabel ...]`.
 *
 * Exit codes follow the cbplab convention: 0 on success, 2 for usage and
 * input validation problems (including CSV schema mismatches), 1 for
 * unexpected runtime failures.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import { SchemaMismatch } from "./csv.js";
import { PLOT_KINDS, render } from "./render.js";
import type { PlotKind } from "./render.js";

const USAGE =
  "usage: cbplab-plots render --kind <mse-curve|tvd-decay|trajectory> " +
  "--in <data.csv> --out <figure.svg> [--title T] [--xlabel X] [--ylabel Y]";

function fail(message: string): number {
  process.stderr.write(`cbplab-plots: ${message}\n`);
  return 2;
}

export function main(argv: string[]): number {
  let parsed: ReturnType<typeof parseArgs>;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        kind: { type: "string" },
        in: { type: "string" },
        out: { type: "string" },
        title: { type: "string" },
        xlabel: { type: "string" },
        ylabel: { type: "string" },
        help: { type: "boolean" },
      },
    });
  } catch (err) {
    return fail(`${(err as Error).message}\n${USAGE}`);
  }

  if (parsed.values["help"] === true) {
    process.stdout.write(`${USAGE}\n`);
    return 0;
  }
  const command = parsed.positionals[0];
  if (command === undefined) return fail(`missing command\n${USAGE}`);
  if (command !== "render" || parsed.positionals.length > 1) {
    return fail(`unknown command "${parsed.positionals.join(" ")}"\n${USAGE}`);
  }

  const kind = parsed.values["kind"] as string | undefined;
  const input = parsed.values["in"] as string | undefined;
  const output = parsed.values["out"] as string | undefined;
  if (kind === undefined) return fail("kind: required");
  if (input === undefined) return fail("in: required");
  if (output === undefined) return fail("out: required");
  if (!(PLOT_KINDS as readonly string[]).includes(kind)) {
    return fail(`kind: must be one of ${PLOT_KINDS.join(", ")}`);
  }

  let csv: string;
  try {
    csv = readFileSync(input, "utf8");
  } catch (err) {
    return fail((err as Error).message);
  }

  let svg: string;
  try {
    svg = render({
      kind: kind as PlotKind,
      csv,
      title: parsed.values["title"] as string | undefined,
      xlabel: parsed.values["xlabel"] as string | undefined,
      ylabel: parsed.values["ylabel"] as string | undefined,
    });
  } catch (err) {
    if (err instanceof SchemaMismatch) return fail(err.message);
    process.stderr.write(`cbplab-plots: ${(err as Error).message}\n`);
    return 1;
  }

  try {
    writeFileSync(output, svg);
  } catch (err) {
    return fail((err as Error).message);
  }
  return 0;
}

const invokedPath = process.argv[1];
if (invokedPath !== undefined && import.meta.url === pathToFileURL(invokedPath).href) {
  process.exit(main(process.argv.slice(2)));
}
