import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { afterEach, describe, expect, it, vi } from "vitest";

import { SchemaError, parseCsv, requireColumns } from "../src/csv";
import { buildDensityOption } from "../src/density";
import { buildSeptimesOption } from "../src/septimes";
import { COALESCE_FILL, buildTracesOption } from "../src/traces";
import { renderToSvg } from "../src/svg";

const FIXTURES = join(__dirname, "..", "fixtures");
const tmp = mkdtempSync(join(tmpdir(), "rmcmc-fig-"));

function fixture(name: string): string {
  return join(FIXTURES, name);
}

function corrupt(name: string, dropColumn: number): string {
  const lines = readFileSync(fixture(name), "utf-8").split("\n");
  const out = lines.map((line) => {
    if (line.startsWith("#") || line.trim() === "") return line;
    return line
      .split(",")
      .filter((_, i) => i !== dropColumn)
      .join(",");
  });
  const path = join(tmp, `corrupt-${name}`);
  writeFileSync(path, out.join("\n"));
  return path;
}

afterEach(() => {
  vi.restoreAllMocks();
});

describe("csv parsing", () => {
  it("reads config header, columns, rows and footer", () => {
    const table = parseCsv(fixture("septimes.csv"));
    expect(table.header.some((l) => l.startsWith("command ="))).toBe(true);
    expect(table.columns[0]).toBe("m");
    expect(table.nRows).toBe(4);
    expect(table.footer.get("regression_slope")).toBeDefined();
  });

  it("warns about unknown columns and ignores them", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const table = parseCsv(fixture("trace.csv"));
    table.columns.push("mystery");
    table.cells.set("mystery", new Array(table.nRows).fill("0"));
    requireColumns(table, ["t"], ["theta_sum_exact", "theta_sum_approx", "B_t", "coalesced"]);
    expect(warn).toHaveBeenCalledWith(expect.stringContaining("mystery"));
  });

  it("raises a named schema error on a missing column", () => {
    const table = parseCsv(corrupt("trace.csv", 1));
    expect(() => buildTracesOption(table)).toThrowError(SchemaError);
    expect(() => buildTracesOption(table)).toThrowError(/theta_sum_exact/);
  });
});

describe("traces renderer", () => {
  it("renders the golden fixture with solid/dashed convention", () => {
    const svg = renderToSvg(buildTracesOption(parseCsv(fixture("trace.csv"))));
    expect(svg.length).toBeGreaterThan(5000);
    expect(svg).toContain("stroke-dasharray");
    expect(svg).toContain("exact chain");
    expect(svg).toContain("approximate chain");
  });

  it("shades coalescence intervals when the flag column is present", () => {
    const svg = renderToSvg(buildTracesOption(parseCsv(fixture("trace.csv"))));
    expect(svg).toContain(COALESCE_FILL.slice(1));
  });

  it("renders identical exact/approx series (dashed overlays solid)", () => {
    const lines = readFileSync(fixture("trace.csv"), "utf-8").split("\n");
    const out = lines.map((line) => {
      if (line.startsWith("#") || line.trim() === "" || line.startsWith("t,")) return line;
      const cells = line.split(",");
      cells[2] = cells[1]; // approx := exact
      return cells.join(",");
    });
    const path = join(tmp, "identical.csv");
    writeFileSync(path, out.join("\n"));
    const option = buildTracesOption(parseCsv(path));
    const series = option.series as Array<{ data: unknown[] }>;
    expect(series[0].data).toEqual(series[1].data);
    expect(renderToSvg(option).length).toBeGreaterThan(1000);
  });
});

describe("density renderer", () => {
  it("draws three curves with solid/dashed/dotted styles", () => {
    const svg = renderToSvg(buildDensityOption(parseCsv(fixture("density.csv"))));
    const dashes = new Set(
      [...svg.matchAll(/stroke-dasharray="([^"]+)"/g)].map((m) => m[1]),
    );
    expect(dashes.size).toBeGreaterThanOrEqual(2); // dashed and dotted
    expect(svg).toContain("target");
    expect(svg).toContain("naive estimate");
  });

  it("coincident naive and true curves still render", () => {
    const lines = readFileSync(fixture("density.csv"), "utf-8").split("\n");
    const out = lines.map((line) => {
      if (line.startsWith("#") || line.trim() === "" || line.startsWith("s,")) return line;
      const cells = line.split(",");
      cells[3] = cells[1]; // naive := true
      return cells.join(",");
    });
    const path = join(tmp, "coincident.csv");
    writeFileSync(path, out.join("\n"));
    const option = buildDensityOption(parseCsv(path));
    const series = option.series as Array<{ data: [number, number][] }>;
    expect(series[2].data).toEqual(series[0].data);
    expect(renderToSvg(option).length).toBeGreaterThan(1000);
  });

  it("rejects a density file missing a pdf column", () => {
    expect(() => buildDensityOption(parseCsv(corrupt("density.csv", 3)))).toThrowError(
      /pdf_naive_est/,
    );
  });
});

describe("septimes renderer", () => {
  it("draws error bars and the regression line from the footer", () => {
    const table = parseCsv(fixture("septimes.csv"));
    const svg = renderToSvg(buildSeptimesOption(table));
    const slope = Number(table.footer.get("regression_slope"));
    expect(svg).toContain(`regression slope ${slope.toFixed(2)}`);
    expect(svg.length).toBeGreaterThan(5000);
  });

  it("draws a synthetic slope-one sweep with the slope in the legend", () => {
    const rows = [1, 2, 3].map(
      (k) => `${8 * k},penalty-naive,rw,${70 * k},2,${72 * k},5,${71 * k},3,0`,
    );
    const path = join(tmp, "slope1.csv");
    writeFileSync(
      path,
      [
        "# command = septimes",
        "m,pair,proposal,rho1,rho1_se,rho2,rho2_se,tau,tau_se,censored_count",
        ...rows,
        "# regression_slope = 1.0",
        "# regression_intercept = 2.18",
        "# regression_r2 = 1.0",
      ].join("\n"),
    );
    const svg = renderToSvg(buildSeptimesOption(parseCsv(path)));
    expect(svg).toContain("regression slope 1.00");
  });

  it("honors the log-scale toggle on both axes", () => {
    const table = parseCsv(fixture("septimes.csv"));
    const linear = buildSeptimesOption(table, false);
    const logged = buildSeptimesOption(table, true);
    expect((linear.xAxis as { type: string }).type).toBe("value");
    expect((logged.xAxis as { type: string }).type).toBe("log");
    expect((logged.yAxis as { type: string }).type).toBe("log");
    expect(renderToSvg(logged).length).toBeGreaterThan(1000);
  });

  it("omits the regression line when the footer is absent", () => {
    const lines = readFileSync(fixture("septimes.csv"), "utf-8")
      .split("\n")
      .filter((l) => !l.startsWith("# regression"));
    const path = join(tmp, "nofooter.csv");
    writeFileSync(path, lines.join("\n"));
    const svg = renderToSvg(buildSeptimesOption(parseCsv(path)));
    expect(svg).not.toContain("regression slope");
  });

  it("rejects a sweep file missing the tau column", () => {
    expect(() => buildSeptimesOption(parseCsv(corrupt("septimes.csv", 7)))).toThrowError(
      SchemaError,
    );
  });
});
