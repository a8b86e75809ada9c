import { runRenderer } from "./cli";
import { buildDensityOption } from "./density";

process.exit(runRenderer(process.argv.slice(2), "usage: render-density <density.csv> <out.svg>", (t) => buildDensityOption(t)));
