import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseTvdScanCsv } from "../src/csv.js";
import { leastSquaresFit, render } from "../src/render.js";
import type { PlotKind } from "../src/render.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function fixture(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf8");
}

const KINDS: [PlotKind, string][] = [
  ["mse-curve", "mse.csv"],
  ["tvd-decay", "scan.csv"],
  ["trajectory", "traj.csv"],
];

describe("render", () => {
  it.each(KINDS)("renders %s from its fixture without error", (kind, file) => {
    const svg = render({ kind, csv: fixture(file) });
    expect(svg.startsWith("<svg ")).toBe(true);
    expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
    expect(svg).toContain("<polyline");
  });

  it.each(KINDS)("is deterministic for %s", (kind, file) => {
    const csv = fixture(file);
    expect(render({ kind, csv })).toBe(render({ kind, csv }));
  });

  it("annotates the tvd-decay slope within 0.05 of the CSV footer value", () => {
    const csv = fixture("scan.csv");
    const table = parseTvdScanCsv(csv);
    expect(table.footerSlope).not.toBeNull();
    const svg = render({ kind: "tvd-decay", csv });
    const match = /slope = (-?\d+\.\d+)/.exec(svg);
    expect(match).not.toBeNull();
    const annotated = Number(match![1]);
    expect(Math.abs(annotated - table.footerSlope!)).toBeLessThan(0.05);
  });

  it("honours title and axis label overrides", () => {
    const svg = render({
      kind: "trajectory",
      csv: fixture("traj.csv"),
      title: "A <custom> title",
      xlabel: "steps",
      ylabel: "count",
    });
    expect(svg).toContain("A &lt;custom&gt; title");
    expect(svg).toContain(">steps</text>");
    expect(svg).toContain(">count</text>");
  });

  it("labels every mse parameter in the legend", () => {
    const svg = render({ kind: "mse-curve", csv: fixture("mse.csv") });
    for (const param of ["lam", "m", "sigma2"]) {
      expect(svg).toContain(`>${param}</text>`);
    }
    expect(svg).toContain("B=20, seed=5");
  });

  it("draws exact, bound, and fit series on the tvd-decay figure", () => {
    const svg = render({ kind: "tvd-decay", csv: fixture("scan.csv") });
    for (const label of ["exact", "bound", "fit"]) {
      expect(svg).toContain(`>${label}</text>`);
    }
  });

  it("rejects non-positive TVD values for the log-log plot", () => {
    const csv = "z,tvd_exact,tvd_bound\n16,0.0,0.9\n32,0.25,0.8\n";
    expect(() => render({ kind: "tvd-decay", csv })).toThrow(/positive/);
  });

  it("renders a trajectory without progenitors and without a legend", () => {
    const svg = render({ kind: "trajectory", csv: "generation,size\n0,5\n1,7\n2,11\n" });
    expect(svg).toContain("<polyline");
    expect(svg).not.toContain(">progenitors</text>");
  });

  it("rejects an unknown kind", () => {
    expect(() => render({ kind: "pie" as PlotKind, csv: "size\n1\n" })).toThrow(
      /unknown plot kind/,
    );
  });
});

describe("leastSquaresFit", () => {
  it("recovers an exact line", () => {
    const fit = leastSquaresFit([1, 2, 3, 4], [3, 5, 7, 9]);
    expect(fit.slope).toBeCloseTo(2, 12);
    expect(fit.intercept).toBeCloseTo(1, 12);
  });

  it("matches a hand-computed fit for non-collinear points", () => {
    // xs mean 2, ys mean 2: slope = sum(dx*dy)/sum(dx^2) = 3/2.
    const fit = leastSquaresFit([1, 2, 3], [0.5, 2, 3.5]);
    expect(fit.slope).toBeCloseTo(1.5, 12);
    expect(fit.intercept).toBeCloseTo(-1, 12);
  });

  it("rejects degenerate inputs", () => {
    expect(() => leastSquaresFit([1], [2])).toThrow(/two/);
    expect(() => leastSquaresFit([2, 2], [1, 3])).toThrow(/distinct/);
    expect(() => leastSquaresFit([1, 2], [1])).toThrow(/two/);
  });
});
