/** Server-side SVG rendering through echarts (no DOM required). */
import { writeFileSync } from "fs";
import * as echarts from "echarts";

export interface RenderSize {
  width: number;
  height: number;
}

export const DEFAULT_SIZE: RenderSize = { width: 900, height: 540 };

export function renderToSvg(option: echarts.EChartsOption, size: RenderSize = DEFAULT_SIZE): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: size.width,
    height: size.height,
  });
  chart.setOption({ animation: false, ...option });
  const svg = chart.renderToSVGString();
  chart.dispose();
  return svg;
}

export function writeSvg(path: string, option: echarts.EChartsOption, size?: RenderSize): void {
  writeFileSync(path, renderToSvg(option, size), "utf-8");
}
