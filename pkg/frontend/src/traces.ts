/**
 * Coupled-trace figure: theta_1 + theta_2 of the exact chain (solid) and
 * the approximate chain (dashed) against the update index, separation
 * events marked, coalescence intervals shaded when the flag column exists.
 */
import type { EChartsOption } from "echarts";
import { CsvTable, numbers, requireColumns } from "./csv";

export const COALESCE_FILL = "#ffe3c2";

export function buildTracesOption(table: CsvTable): EChartsOption {
  requireColumns(table, ["t", "theta_sum_exact", "theta_sum_approx", "B_t"], ["coalesced"]);
  const t = numbers(table, "t");
  const exact = numbers(table, "theta_sum_exact");
  const approx = numbers(table, "theta_sum_approx");
  const marks = numbers(table, "B_t");

  const separations: [number, number][] = [];
  for (let i = 0; i < t.length; i++) {
    if (marks[i] === 1) separations.push([t[i], exact[i]]);
  }

  const series: EChartsOption["series"] = [
    {
      name: "exact chain",
      type: "line",
      showSymbol: false,
      data: t.map((x, i) => [x, exact[i]]),
      lineStyle: { type: "solid", width: 1.5, color: "#1f4e9c" },
      color: "#1f4e9c",
    },
    {
      name: "approximate chain",
      type: "line",
      showSymbol: false,
      data: t.map((x, i) => [x, approx[i]]),
      lineStyle: { type: "dashed", width: 1.5, color: "#c23a2b" },
      color: "#c23a2b",
    },
    {
      name: "separation events",
      type: "scatter",
      symbolSize: 7,
      data: separations,
      color: "#222222",
    },
  ];

  if (table.columns.includes("coalesced")) {
    const coal = numbers(table, "coalesced");
    const bands: Array<[{ xAxis: number }, { xAxis: number }]> = [];
    let start: number | null = null;
    for (let i = 0; i < t.length; i++) {
      if (coal[i] === 1 && start === null) start = t[i];
      if (coal[i] === 0 && start !== null) {
        bands.push([{ xAxis: start }, { xAxis: t[i] }]);
        start = null;
      }
    }
    if (start !== null) bands.push([{ xAxis: start }, { xAxis: t[t.length - 1] }]);
    (series as object[]).push({
      name: "coalesced",
      type: "line",
      data: [],
      markArea: {
        silent: true,
        itemStyle: { color: COALESCE_FILL, opacity: 0.8 },
        data: bands,
      },
    });
  }

  return {
    title: { text: "Coupled chains: exact (solid) vs approximate (dashed)" },
    legend: { top: 28 },
    grid: { top: 70, right: 30 },
    xAxis: { type: "value", name: "update", min: "dataMin", max: "dataMax" },
    yAxis: { type: "value", name: "theta_1 + theta_2", scale: true },
    series,
  };
}
