/**
 * Deterministic SVG renderers for cbplab experiment CSVs.
 *
 * Three figure kinds are supported: "mse-curve" (MSE vs trajectory
 * length, one line per parameter), "tvd-decay" (log-log scatter of the
 * exact and bounded total variation distance against the initial
 * population, with a least-squares fit line and slope annotation), and
 * "trajectory" (population size by generation).  Rendering is a pure
 * function of the CSV text and options: the same input always yields
 * byte-identical SVG.
 */

import {
  parseMseCsv,
  parseTrajectoryCsv,
  parseTvdScanCsv,
} from "./csv.js";
import type { MseRow, ScanTable, TrajRow } from "./csv.js";

export type PlotKind = "mse-curve" | "tvd-decay" | "trajectory";

/** What to draw: a figure kind, the CSV text, and optional overrides. */
export interface PlotSpec {
  kind: PlotKind;
  csv: string;
  title?: string;
  xlabel?: string;
  ylabel?: string;
}

export const PLOT_KINDS: readonly PlotKind[] = ["mse-curve", "tvd-decay", "trajectory"];

const WIDTH = 640;
const HEIGHT = 420;
const PALETTE = ["#1f6fb2", "#c2503a", "#3a8f5d", "#8257a8", "#b08b2e", "#4f6d7a"];

interface Frame {
  left: number;
  top: number;
  w: number;
  h: number;
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function r2(v: number): string {
  return String(Math.round(v * 100) / 100);
}

function fmtNum(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) {
    return v.toExponential(1).replace("e+", "e").replace(".0e", "e");
  }
  return String(Number(v.toPrecision(6)));
}

function niceTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) return [lo];
  const step0 = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const norm = step0 / mag;
  const step = mag * (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10);
  const ticks: number[] = [];
  let t = Math.ceil(lo / step - 1e-9) * step;
  while (t <= hi + step * 1e-9) {
    ticks.push(Number(t.toPrecision(12)));
    t += step;
  }
  return ticks;
}

/** Tick positions in log10 space with human labels for the raw values. */
function logTicks(loLog: number, hiLog: number): { pos: number; label: string }[] {
  const decades: number[] = [];
  for (let k = Math.ceil(loLog - 1e-9); k <= Math.floor(hiLog + 1e-9); k++) {
    decades.push(k);
  }
  if (decades.length >= 2) {
    return decades.map((k) => ({ pos: k, label: fmtNum(Math.pow(10, k)) }));
  }
  return niceTicks(loLog, hiLog, 4).map((p) => ({
    pos: p,
    label: fmtNum(Math.pow(10, p)),
  }));
}

function linScale(lo: number, hi: number, outLo: number, outHi: number): (v: number) => number {
  if (!(hi > lo)) {
    const mid = (outLo + outHi) / 2;
    return () => mid;
  }
  const k = (outHi - outLo) / (hi - lo);
  return (v: number) => outLo + (v - lo) * k;
}

interface AxisSpec {
  ticks: { pos: number; label: string }[];
  label: string;
}

function chrome(frame: Frame, title: string, x: AxisSpec, y: AxisSpec): string[] {
  const out: string[] = [];
  out.push(`<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  out.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" ` +
      `font-size="16" font-weight="600" fill="#222">${escapeXml(title)}</text>`,
  );
  for (const t of x.ticks) {
    out.push(
      `<line x1="${r2(t.pos)}" y1="${frame.top}" x2="${r2(t.pos)}" ` +
        `y2="${frame.top + frame.h}" stroke="#ececec" stroke-width="1"/>`,
    );
  }
  for (const t of y.ticks) {
    out.push(
      `<line x1="${frame.left}" y1="${r2(t.pos)}" x2="${frame.left + frame.w}" ` +
        `y2="${r2(t.pos)}" stroke="#ececec" stroke-width="1"/>`,
    );
  }
  out.push(
    `<rect x="${frame.left}" y="${frame.top}" width="${frame.w}" height="${frame.h}" ` +
      `fill="none" stroke="#444" stroke-width="1"/>`,
  );
  for (const t of x.ticks) {
    out.push(
      `<text x="${r2(t.pos)}" y="${frame.top + frame.h + 18}" text-anchor="middle" ` +
        `font-family="sans-serif" font-size="12" fill="#333">${escapeXml(t.label)}</text>`,
    );
  }
  for (const t of y.ticks) {
    out.push(
      `<text x="${frame.left - 8}" y="${r2(t.pos + 4)}" text-anchor="end" ` +
        `font-family="sans-serif" font-size="12" fill="#333">${escapeXml(t.label)}</text>`,
    );
  }
  out.push(
    `<text x="${frame.left + frame.w / 2}" y="${HEIGHT - 10}" text-anchor="middle" ` +
      `font-family="sans-serif" font-size="13" fill="#222">${escapeXml(x.label)}</text>`,
  );
  out.push(
    `<text transform="rotate(-90)" x="${-(frame.top + frame.h / 2)}" y="18" ` +
      `text-anchor="middle" font-family="sans-serif" font-size="13" fill="#222">` +
      `${escapeXml(y.label)}</text>`,
  );
  return out;
}

function svgDoc(body: string[]): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
    body.join("\n") +
    "\n</svg>\n"
  );
}

function polyline(pts: [number, number][], color: string, dashed: boolean): string {
  const coords = pts.map(([x, y]) => `${r2(x)},${r2(y)}`).join(" ");
  const dash = dashed ? ` stroke-dasharray="6 4"` : "";
  return `<polyline points="${coords}" fill="none" stroke="${color}" stroke-width="1.8"${dash}/>`;
}

function legendBlock(
  frame: Frame,
  entries: { label: string; color: string; dashed: boolean }[],
): string[] {
  const out: string[] = [];
  const lx = frame.left + frame.w + 14;
  let ly = frame.top + 12;
  for (const e of entries) {
    const dash = e.dashed ? ` stroke-dasharray="6 4"` : "";
    out.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${e.color}" ` +
        `stroke-width="2"${dash}/>`,
    );
    out.push(
      `<text x="${lx + 28}" y="${ly + 4}" font-family="sans-serif" font-size="12" ` +
        `fill="#333">${escapeXml(e.label)}</text>`,
    );
    ly += 20;
  }
  return out;
}

/** Ordinary least squares fit; requires at least two distinct x values. */
export function leastSquaresFit(
  xs: number[],
  ys: number[],
): { slope: number; intercept: number } {
  const n = xs.length;
  if (n !== ys.length || n < 2) {
    throw new Error("least-squares fit needs at least two (x, y) pairs");
  }
  let sx = 0;
  let sy = 0;
  for (let i = 0; i < n; i++) {
    sx += xs[i] ?? 0;
    sy += ys[i] ?? 0;
  }
  const mx = sx / n;
  const my = sy / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    const dx = (xs[i] ?? 0) - mx;
    sxx += dx * dx;
    sxy += dx * ((ys[i] ?? 0) - my);
  }
  if (sxx === 0) {
    throw new Error("least-squares fit needs at least two distinct x values");
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

function renderMseCurve(rows: MseRow[], spec: PlotSpec): string {
  const frame: Frame = { left: 68, top: 40, w: WIDTH - 68 - 150, h: HEIGHT - 40 - 56 };
  const byParam = new Map<string, MseRow[]>();
  for (const row of rows) {
    const bucket = byParam.get(row.param);
    if (bucket === undefined) byParam.set(row.param, [row]);
    else bucket.push(row);
  }

  let x0 = Infinity;
  let x1 = -Infinity;
  let yMax = 0;
  for (const row of rows) {
    x0 = Math.min(x0, row.length);
    x1 = Math.max(x1, row.length);
    yMax = Math.max(yMax, row.mse);
  }
  if (!(x1 > x0)) {
    x0 -= 1;
    x1 += 1;
  }
  const pad = (x1 - x0) * 0.04;
  if (yMax <= 0) yMax = 1;

  const sx = linScale(x0 - pad, x1 + pad, frame.left, frame.left + frame.w);
  const sy = linScale(0, yMax * 1.08, frame.top + frame.h, frame.top);

  const xTicks = niceTicks(x0, x1, 5).map((v) => ({ pos: sx(v), label: fmtNum(v) }));
  const yTicks = niceTicks(0, yMax * 1.08, 5).map((v) => ({ pos: sy(v), label: fmtNum(v) }));

  const body = chrome(
    frame,
    spec.title ?? "Mean squared error vs trajectory length",
    { ticks: xTicks, label: spec.xlabel ?? "trajectory length" },
    { ticks: yTicks, label: spec.ylabel ?? "mean squared error" },
  );

  const legend: { label: string; color: string; dashed: boolean }[] = [];
  let i = 0;
  for (const [param, bucket] of byParam) {
    const color = PALETTE[i % PALETTE.length] ?? "#000";
    const sorted = [...bucket].sort((a, b) => a.length - b.length);
    const pts: [number, number][] = sorted.map((r) => [sx(r.length), sy(r.mse)]);
    body.push(polyline(pts, color, false));
    for (const [px, py] of pts) {
      body.push(`<circle cx="${r2(px)}" cy="${r2(py)}" r="3.5" fill="${color}"/>`);
    }
    legend.push({ label: param, color, dashed: false });
    i += 1;
  }
  body.push(...legendBlock(frame, legend));

  const first = rows[0];
  if (first !== undefined) {
    body.push(
      `<text x="${frame.left + frame.w - 6}" y="${frame.top + 16}" text-anchor="end" ` +
        `font-family="sans-serif" font-size="11" fill="#666">` +
        `B=${fmtNum(first.B)}, seed=${fmtNum(first.seed)}</text>`,
    );
  }
  return svgDoc(body);
}

function renderTvdDecay(table: ScanTable, spec: PlotSpec): string {
  const frame: Frame = { left: 68, top: 40, w: WIDTH - 68 - 150, h: HEIGHT - 40 - 56 };
  const rows = table.rows;
  for (const row of rows) {
    if (!(row.z > 0) || !(row.tvdExact > 0)) {
      throw new Error("tvd-decay needs positive z and exact TVD values for a log-log plot");
    }
  }
  const lx = rows.map((r) => Math.log10(r.z));
  const lyExact = rows.map((r) => Math.log10(r.tvdExact));
  const bounds = rows.filter((r) => r.tvdBound > 0);
  const lyBound = bounds.map((r) => Math.log10(r.tvdBound));

  let xLo = Math.min(...lx);
  let xHi = Math.max(...lx);
  let yLo = Math.min(...lyExact, ...(lyBound.length > 0 ? lyBound : lyExact));
  let yHi = Math.max(...lyExact, ...(lyBound.length > 0 ? lyBound : lyExact));
  if (!(xHi > xLo)) {
    xLo -= 0.5;
    xHi += 0.5;
  }
  if (!(yHi > yLo)) {
    yLo -= 0.5;
    yHi += 0.5;
  }
  const xPad = (xHi - xLo) * 0.05;
  const yPad = (yHi - yLo) * 0.08;

  const sx = linScale(xLo - xPad, xHi + xPad, frame.left, frame.left + frame.w);
  const sy = linScale(yLo - yPad, yHi + yPad, frame.top + frame.h, frame.top);

  const xTicks = logTicks(xLo, xHi).map((t) => ({ pos: sx(t.pos), label: t.label }));
  const yTicks = logTicks(yLo, yHi).map((t) => ({ pos: sy(t.pos), label: t.label }));

  const body = chrome(
    frame,
    spec.title ?? "Total variation decay",
    { ticks: xTicks, label: spec.xlabel ?? "initial population" },
    { ticks: yTicks, label: spec.ylabel ?? "total variation distance" },
  );

  const exactColor = PALETTE[0] ?? "#000";
  const boundColor = PALETTE[1] ?? "#000";
  const fitColor = "#555555";

  const exactPts: [number, number][] = rows.map((r, k) => [sx(lx[k] ?? 0), sy(lyExact[k] ?? 0)]);
  body.push(polyline(exactPts, exactColor, false));
  for (const [px, py] of exactPts) {
    body.push(`<circle cx="${r2(px)}" cy="${r2(py)}" r="3.5" fill="${exactColor}"/>`);
  }

  if (bounds.length >= 1) {
    const boundPts: [number, number][] = bounds.map((r, k) => [
      sx(Math.log10(r.z)),
      sy(lyBound[k] ?? 0),
    ]);
    if (boundPts.length >= 2) body.push(polyline(boundPts, boundColor, true));
    for (const [px, py] of boundPts) {
      body.push(
        `<rect x="${r2(px - 3)}" y="${r2(py - 3)}" width="6" height="6" fill="none" ` +
          `stroke="${boundColor}" stroke-width="1.5"/>`,
      );
    }
  }

  const fit = leastSquaresFit(lx, lyExact);
  const fx0 = xLo - xPad / 2;
  const fx1 = xHi + xPad / 2;
  body.push(
    polyline(
      [
        [sx(fx0), sy(fit.slope * fx0 + fit.intercept)],
        [sx(fx1), sy(fit.slope * fx1 + fit.intercept)],
      ],
      fitColor,
      true,
    ),
  );
  const mid = (xLo + xHi) / 2;
  body.push(
    `<text x="${r2(sx(mid))}" y="${r2(sy(fit.slope * mid + fit.intercept) - 10)}" ` +
      `text-anchor="middle" font-family="sans-serif" font-size="13" fill="#222">` +
      `slope = ${fit.slope.toFixed(3)}</text>`,
  );

  const legend = [{ label: "exact", color: exactColor, dashed: false }];
  if (bounds.length >= 1) legend.push({ label: "bound", color: boundColor, dashed: true });
  legend.push({ label: "fit", color: fitColor, dashed: true });
  body.push(...legendBlock(frame, legend));
  return svgDoc(body);
}

function renderTrajectory(rows: TrajRow[], spec: PlotSpec): string {
  const hasProg = rows.some((r) => r.progenitors !== null);
  const rightMargin = hasProg ? 150 : 24;
  const frame: Frame = { left: 68, top: 40, w: WIDTH - 68 - rightMargin, h: HEIGHT - 40 - 56 };

  let x0 = Infinity;
  let x1 = -Infinity;
  let yMax = 0;
  for (const row of rows) {
    x0 = Math.min(x0, row.generation);
    x1 = Math.max(x1, row.generation);
    yMax = Math.max(yMax, row.size, row.progenitors ?? 0);
  }
  if (!(x1 > x0)) {
    x0 -= 1;
    x1 += 1;
  }
  if (yMax <= 0) yMax = 1;

  const sx = linScale(x0, x1, frame.left, frame.left + frame.w);
  const sy = linScale(0, yMax * 1.08, frame.top + frame.h, frame.top);

  const xTicks = niceTicks(x0, x1, 6).map((v) => ({ pos: sx(v), label: fmtNum(v) }));
  const yTicks = niceTicks(0, yMax * 1.08, 5).map((v) => ({ pos: sy(v), label: fmtNum(v) }));

  const body = chrome(
    frame,
    spec.title ?? "Simulated trajectory",
    { ticks: xTicks, label: spec.xlabel ?? "generation" },
    { ticks: yTicks, label: spec.ylabel ?? "population size" },
  );

  const sizeColor = PALETTE[0] ?? "#000";
  const progColor = PALETTE[2] ?? "#000";

  const sizePts: [number, number][] = rows.map((r) => [sx(r.generation), sy(r.size)]);
  if (sizePts.length >= 2) body.push(polyline(sizePts, sizeColor, false));
  if (rows.length <= 80) {
    for (const [px, py] of sizePts) {
      body.push(`<circle cx="${r2(px)}" cy="${r2(py)}" r="2.5" fill="${sizeColor}"/>`);
    }
  }

  if (hasProg) {
    const progPts: [number, number][] = [];
    for (const row of rows) {
      if (row.progenitors !== null) {
        progPts.push([sx(row.generation), sy(row.progenitors)]);
      }
    }
    if (progPts.length >= 2) body.push(polyline(progPts, progColor, true));
    body.push(
      ...legendBlock(frame, [
        { label: "size", color: sizeColor, dashed: false },
        { label: "progenitors", color: progColor, dashed: true },
      ]),
    );
  }
  return svgDoc(body);
}

/** Render a figure from CSV text; returns the SVG document as a string. */
export function render(spec: PlotSpec): string {
  switch (spec.kind) {
    case "mse-curve":
      return renderMseCurve(parseMseCsv(spec.csv), spec);
    case "tvd-decay":
      return renderTvdDecay(parseTvdScanCsv(spec.csv), spec);
    case "trajectory":
      return renderTrajectory(parseTrajectoryCsv(spec.csv), spec);
    default:
      throw new Error(`unknown plot kind: ${String((spec as { kind: unknown }).kind)}`);
  }
}
