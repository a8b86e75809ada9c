import { runRenderer } from "./cli";
import { buildSeptimesOption } from "./septimes";

process.exit(runRenderer(process.argv.slice(2), "usage: render-septimes <septimes.csv> <out.svg> [--log]", (t, f) => buildSeptimesOption(t, f.log)));
