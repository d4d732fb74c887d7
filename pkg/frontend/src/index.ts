export {
  SchemaMismatch,
  parseMseCsv,
  parseTrajectoryCsv,
  parseTvdScanCsv,
} from "./csv.js";
export type { MseRow, ScanRow, ScanTable, TrajRow } from "./csv.js";
export { PLOT_KINDS, leastSquaresFit, render } from "./render.js";
export type { PlotKind, PlotSpec } from "./render.js";
export { main } from "./cli.js";
