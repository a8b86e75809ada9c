import { runRenderer } from "./cli";
import { buildTracesOption } from "./traces";

process.exit(runRenderer(process.argv.slice(2), "usage: render-traces <trace.csv> <out.svg>", (t) => buildTracesOption(t)));
