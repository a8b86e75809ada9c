/** Shared entry-point plumbing: input/output paths, exit 0/1 on error. */
import type { EChartsOption } from "echarts";
import { CsvTable, SchemaError, parseCsv } from "./csv";
import { writeSvg } from "./svg";

export interface CliFlags {
  input: string;
  output: string;
  log: boolean;
}

export function parseArgs(argv: string[], usage: string): CliFlags {
  const positional: string[] = [];
  let log = false;
  for (const arg of argv) {
    if (arg === "--log") log = true;
    else if (arg === "-h" || arg === "--help") {
      console.log(usage);
      process.exit(0);
    } else positional.push(arg);
  }
  if (positional.length !== 2) {
    console.error(usage);
    process.exit(1);
  }
  return { input: positional[0], output: positional[1], log };
}

export function runRenderer(
  argv: string[],
  usage: string,
  build: (table: CsvTable, flags: CliFlags) => EChartsOption,
): number {
  try {
    const flags = parseArgs(argv, usage);
    const table = parseCsv(flags.input);
    writeSvg(flags.output, build(table, flags));
    console.log(`wrote ${flags.output}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error(String(err));
    }
    return 1;
  }
}
