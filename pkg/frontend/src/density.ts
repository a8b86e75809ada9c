/**
 * Density figure: exact law of theta_1 + theta_2 (solid) against the
 * penalty-chain estimate (dashed) and the naive-chain estimate (dotted).
 */
import type { EChartsOption } from "echarts";
import { CsvTable, numbers, requireColumns } from "./csv";

export function buildDensityOption(table: CsvTable): EChartsOption {
  requireColumns(table, ["s", "pdf_true", "pdf_penalty_est", "pdf_naive_est"]);
  const s = numbers(table, "s");
  const curves: Array<{ name: string; column: string; style: "solid" | "dashed" | "dotted"; color: string }> = [
    { name: "target", column: "pdf_true", style: "solid", color: "#222222" },
    { name: "penalty estimate", column: "pdf_penalty_est", style: "dashed", color: "#1f4e9c" },
    { name: "naive estimate", column: "pdf_naive_est", style: "dotted", color: "#c23a2b" },
  ];

  return {
    title: { text: "Density of theta_1 + theta_2" },
    legend: { top: 28 },
    grid: { top: 70, right: 30 },
    xAxis: { type: "value", name: "s", min: "dataMin", max: "dataMax" },
    yAxis: { type: "value", name: "density" },
    series: curves.map((c) => {
      const pdf = numbers(table, c.column);
      return {
        name: c.name,
        type: "line" as const,
        showSymbol: false,
        data: s.map((x, i) => [x, pdf[i]]),
        lineStyle: { type: c.style, width: 2, color: c.color },
        color: c.color,
      };
    }),
  };
}
