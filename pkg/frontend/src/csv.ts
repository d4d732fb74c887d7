/**
 * Parsers for the CSV files written by the cbplab command line tools.
 *
 * Each parser validates the header and cell types and throws
 * {@link SchemaMismatch} naming the offending column when the file does
 * not match the documented layout.  Comment lines start with "#"; the
 * tvd-scan footer comment carries the fitted log-log slope and is parsed
 * rather than discarded.
 */

/** Raised when a CSV file does not match the expected column layout. */
export class SchemaMismatch extends Error {
  readonly column: string;

  constructor(column: string, detail: string) {
    super(`column "${column}": ${detail}`);
    this.name = "SchemaMismatch";
    this.column = column;
  }
}

/** One (length, param) cell of an MSE experiment table. */
export interface MseRow {
  length: number;
  param: string;
  mse: number;
  B: number;
  seed: number;
}

/** One grid point of a TVD decay scan. */
export interface ScanRow {
  z: number;
  tvdExact: number;
  tvdBound: number;
}

/** A decay scan plus the slope recorded in its footer comment, if any. */
export interface ScanTable {
  rows: ScanRow[];
  footerSlope: number | null;
}

/** One generation of a simulated trajectory. */
export interface TrajRow {
  generation: number;
  size: number;
  /** Progenitor count; null when the file does not record it (final row). */
  progenitors: number | null;
}

interface SplitCsv {
  lines: string[][];
  comments: string[];
}

function splitCsv(text: string): SplitCsv {
  const lines: string[][] = [];
  const comments: string[] = [];
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trimEnd();
    if (line === "") continue;
    if (line.startsWith("#")) {
      comments.push(line);
      continue;
    }
    lines.push(line.split(",").map((cell) => cell.trim()));
  }
  return { lines, comments };
}

function requireHeader(actual: string[], expected: string[]): void {
  for (const col of expected) {
    if (!actual.includes(col)) {
      throw new SchemaMismatch(col, "missing from header");
    }
  }
  for (const col of actual) {
    if (!expected.includes(col)) {
      throw new SchemaMismatch(col, "unexpected column in header");
    }
  }
  for (let i = 0; i < expected.length; i++) {
    if (actual[i] !== expected[i]) {
      throw new SchemaMismatch(expected[i] ?? "", `expected at position ${i + 1}`);
    }
  }
}

function numCell(cell: string | undefined, column: string, lineNo: number): number {
  if (cell === undefined || cell === "") {
    throw new SchemaMismatch(column, `empty cell at data line ${lineNo}`);
  }
  const value = Number(cell);
  if (Number.isNaN(value)) {
    throw new SchemaMismatch(column, `not a number at data line ${lineNo}: "${cell}"`);
  }
  return value;
}

/** Parse the mse-curve output (header: length,param,mse,B,seed). */
export function parseMseCsv(text: string): MseRow[] {
  const { lines } = splitCsv(text);
  const header = lines[0];
  if (header === undefined) {
    throw new SchemaMismatch("length", "file has no header row");
  }
  requireHeader(header, ["length", "param", "mse", "B", "seed"]);
  const rows: MseRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i] ?? [];
    const param = cells[1];
    if (param === undefined || param === "") {
      throw new SchemaMismatch("param", `empty cell at data line ${i}`);
    }
    rows.push({
      length: numCell(cells[0], "length", i),
      param,
      mse: numCell(cells[2], "mse", i),
      B: numCell(cells[3], "B", i),
      seed: numCell(cells[4], "seed", i),
    });
  }
  if (rows.length === 0) {
    throw new SchemaMismatch("length", "file has a header but no data rows");
  }
  return rows;
}

const SLOPE_FOOTER = /^#\s*slope:\s*(\S+)\s*$/;

/** Parse the tvd-scan output (header: z,tvd_exact,tvd_bound + slope footer). */
export function parseTvdScanCsv(text: string): ScanTable {
  const { lines, comments } = splitCsv(text);
  const header = lines[0];
  if (header === undefined) {
    throw new SchemaMismatch("z", "file has no header row");
  }
  requireHeader(header, ["z", "tvd_exact", "tvd_bound"]);
  const rows: ScanRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i] ?? [];
    rows.push({
      z: numCell(cells[0], "z", i),
      tvdExact: numCell(cells[1], "tvd_exact", i),
      tvdBound: numCell(cells[2], "tvd_bound", i),
    });
  }
  if (rows.length === 0) {
    throw new SchemaMismatch("z", "file has a header but no data rows");
  }
  let footerSlope: number | null = null;
  for (const comment of comments) {
    const match = SLOPE_FOOTER.exec(comment);
    if (match !== null) {
      const value = Number(match[1]);
      if (!Number.isNaN(value)) footerSlope = value;
    }
  }
  return { rows, footerSlope };
}

function isNumeric(cell: string | undefined): boolean {
  return cell !== undefined && cell !== "" && !Number.isNaN(Number(cell));
}

/**
 * Parse a simulated trajectory.
 *
 * Accepts the simulate output (generation,size,progenitors where the
 * final progenitors cell is empty), the two-column generation,size
 * layout, a single "size" column with header, and a headerless numeric
 * column of sizes indexed by row order.
 */
export function parseTrajectoryCsv(text: string): TrajRow[] {
  const { lines } = splitCsv(text);
  const first = lines[0];
  if (first === undefined) {
    throw new SchemaMismatch("size", "file has no rows");
  }

  const headerless = first.every((cell) => isNumeric(cell));
  let columns: string[];
  let dataStart: number;
  if (headerless) {
    if (first.length === 1) columns = ["size"];
    else if (first.length === 2) columns = ["generation", "size"];
    else if (first.length === 3) columns = ["generation", "size", "progenitors"];
    else throw new SchemaMismatch("size", `headerless row has ${first.length} columns`);
    dataStart = 0;
  } else {
    const known = [
      ["size"],
      ["generation", "size"],
      ["generation", "size", "progenitors"],
    ];
    const match = known.find(
      (cols) => cols.length === first.length && cols.every((c, i) => first[i] === c),
    );
    if (match === undefined) {
      const bad = first.find((c) => !["generation", "size", "progenitors"].includes(c));
      throw new SchemaMismatch(bad ?? "size", "unrecognised trajectory header");
    }
    columns = match;
    dataStart = 1;
  }

  const genIdx = columns.indexOf("generation");
  const sizeIdx = columns.indexOf("size");
  const progIdx = columns.indexOf("progenitors");
  const rows: TrajRow[] = [];
  for (let i = dataStart; i < lines.length; i++) {
    const cells = lines[i] ?? [];
    const lineNo = i - dataStart + 1;
    const size = numCell(cells[sizeIdx], "size", lineNo);
    const generation =
      genIdx >= 0 ? numCell(cells[genIdx], "generation", lineNo) : rows.length;
    let progenitors: number | null = null;
    if (progIdx >= 0) {
      const cell = cells[progIdx];
      progenitors = cell === undefined || cell === "" ? null : numCell(cell, "progenitors", lineNo);
    }
    rows.push({ generation, size, progenitors });
  }
  if (rows.length === 0) {
    throw new SchemaMismatch("size", "file has a header but no data rows");
  }
  return rows;
}
