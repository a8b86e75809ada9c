/**
 * Separation-time figure: error bars for the three estimators at each m
 * (rho-hat-1 left, rho-hat-2 centre, tau-hat right within each group),
 * with the regression curve read from the CSV footer. The renderer never
 * recomputes statistics; it only draws what the CSV carries.
 */
import type { EChartsOption } from "echarts";
import { CsvTable, numbers, requireColumns, strings } from "./csv";

interface ErrorBar {
  x: number;
  y: number;
  se: number;
}

const GROUP_OFFSETS: Record<string, number> = { rho1: 0.94, rho2: 1.0, tau: 1.06 };
const COLORS: Record<string, string> = { rho1: "#1f4e9c", rho2: "#2b8a3e", tau: "#c23a2b" };

function errorBarSeries(name: string, bars: ErrorBar[]) {
  return [
    {
      name,
      type: "scatter" as const,
      symbolSize: 7,
      color: COLORS[name],
      data: bars.map((b) => [b.x, b.y]),
    },
    {
      name: `${name} span`,
      type: "custom" as const,
      color: COLORS[name],
      renderItem: (_params: unknown, api: any) => {
        const lo = api.coord([api.value(0), api.value(1)]);
        const hi = api.coord([api.value(0), api.value(2)]);
        const cap = 5;
        return {
          type: "group",
          children: [
            { type: "line", shape: { x1: lo[0], y1: lo[1], x2: hi[0], y2: hi[1] }, style: { stroke: COLORS[name], lineWidth: 1.5 } },
            { type: "line", shape: { x1: lo[0] - cap, y1: lo[1], x2: lo[0] + cap, y2: lo[1] }, style: { stroke: COLORS[name], lineWidth: 1.5 } },
            { type: "line", shape: { x1: hi[0] - cap, y1: hi[1], x2: hi[0] + cap, y2: hi[1] }, style: { stroke: COLORS[name], lineWidth: 1.5 } },
          ],
        };
      },
      data: bars.map((b) => [b.x, Math.max(b.y - b.se, 1e-12), b.y + b.se]),
      silent: true,
      legendHoverLink: false,
    },
  ];
}

export function buildSeptimesOption(table: CsvTable, logScale = false): EChartsOption {
  requireColumns(
    table,
    ["m", "pair", "proposal", "rho1", "rho1_se", "rho2", "rho2_se", "tau", "tau_se"],
    ["censored_count"],
  );
  const m = numbers(table, "m");
  const pair = strings(table, "pair")[0] ?? "pair";
  const proposal = strings(table, "proposal")[0] ?? "";

  const series: object[] = [];
  for (const est of ["rho1", "rho2", "tau"]) {
    const ys = numbers(table, est);
    const ses = numbers(table, `${est}_se`);
    const bars = m.map((mi, i) => ({ x: mi * GROUP_OFFSETS[est], y: ys[i], se: ses[i] }));
    series.push(...errorBarSeries(est, bars));
  }

  let subtitle = `${pair} (${proposal})`;
  const slope = table.footer.get("regression_slope");
  const intercept = table.footer.get("regression_intercept");
  if (slope !== undefined && intercept !== undefined) {
    const a = Number(slope);
    const b = Number(intercept);
    const lo = Math.min(...m) * 0.9;
    const hi = Math.max(...m) * 1.1;
    const line: [number, number][] = [];
    for (let k = 0; k <= 64; k++) {
      const x = lo * Math.pow(hi / lo, k / 64);
      line.push([x, Math.exp(b + a * Math.log(x))]);
    }
    series.push({
      name: `regression slope ${a.toFixed(2)}`,
      type: "line",
      showSymbol: false,
      data: line,
      lineStyle: { type: "solid", width: 1, color: "#888888" },
      color: "#888888",
    });
    subtitle += `, log-log slope ${a.toFixed(3)}`;
  }

  const axisType = logScale ? ("log" as const) : ("value" as const);
  return {
    title: { text: "Separation times vs estimator sample size", subtext: subtitle },
    legend: { top: 50, data: ["rho1", "rho2", "tau"].concat(slope !== undefined && intercept !== undefined ? [`regression slope ${Number(slope).toFixed(2)}`] : []) },
    grid: { top: 95, right: 30 },
    xAxis: { type: axisType, name: "m", min: logScale ? undefined : "dataMin" },
    yAxis: { type: axisType, name: "updates" },
    series: series as EChartsOption["series"],
  };
}
