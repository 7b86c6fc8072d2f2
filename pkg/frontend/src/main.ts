#!/usr/bin/env node
import { parseArgs } from "util";

import { readCsv, MissingColumn } from "./csv";
import { FIGURES, FigureName, ReportSpec, SpecError, loadSpec, render, validateSpec } from "./report";

function specFromPositional(paths: string[], format: string, outDir?: string): ReportSpec {
  const spec: ReportSpec = {
    figures: [],
    format: format as "svg" | "png",
    outputDir: outDir,
    titles: {},
  };
  for (const p of paths) {
    const header = readCsv(p).header;
    if (header.includes("sup_metric")) {
      spec.rateCsv = p;
      spec.figures.push("rate_loglog");
    } else if (header.includes("kinetic_energy")) {
      spec.diagnosticsCsv = p;
      spec.figures.push("energy_trace", "acoustic_split", "bound_panel");
    } else {
      throw new SpecError(`cannot classify CSV by header: ${p}`);
    }
  }
  return validateSpec(spec);
}

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        spec: { type: "string" },
        format: { type: "string", default: "svg" },
        out: { type: "string" },
        figures: { type: "string" },
        help: { type: "boolean", default: false },
      },
    });
  } catch (err) {
    console.error(String(err));
    return 1;
  }
  if (parsed.values.help) {
    console.log(
      "usage: strato-report --spec report.toml | strato-report RATE.csv [DIAG.csv]\n" +
        `  --format svg         output format\n` +
        `  --out DIR            output directory (default: beside the inputs)\n` +
        `  --figures a,b        subset of: ${FIGURES.join(", ")}`
    );
    return 0;
  }
  try {
    let spec: ReportSpec;
    if (parsed.values.spec) {
      spec = loadSpec(parsed.values.spec);
      if (parsed.values.out) spec.outputDir = parsed.values.out;
    } else if (parsed.positionals.length > 0) {
      spec = specFromPositional(
        parsed.positionals,
        parsed.values.format as string,
        parsed.values.out
      );
      if (parsed.values.figures) {
        spec.figures = (parsed.values.figures as string).split(",") as FigureName[];
        validateSpec(spec);
      }
    } else {
      console.error("nothing to do: pass --spec or positional CSV paths");
      return 1;
    }
    const result = render(spec);
    for (const f of result.figurePaths) console.log(`wrote ${f}`);
    console.log(`wrote ${result.summaryPath}`);
    return 0;
  } catch (err) {
    if (err instanceof SpecError || err instanceof MissingColumn) {
      console.error(`error: ${(err as Error).message}`);
      return 1;
    }
    console.error(`failure: ${String(err)}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
