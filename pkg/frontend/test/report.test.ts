import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { MissingColumn, readCsv, requireColumns } from "../src/csv";
import { rateLogLog } from "../src/figures";
import { loadSpec, parseToml, readRateFit, render, SpecError, validateSpec, ReportSpec } from "../src/report";
import { main } from "../src/main";

const SAMPLE = join(__dirname, "..", "sample");

function sampleSpec(outDir: string): ReportSpec {
  return {
    rateCsv: join(SAMPLE, "rate.csv"),
    diagnosticsCsv: join(SAMPLE, "diagnostics.csv"),
    figures: ["rate_loglog", "energy_trace", "acoustic_split", "bound_panel"],
    format: "svg",
    outputDir: outDir,
    titles: {},
  };
}

describe("csv", () => {
  it("reads the bundled sweep CSV", () => {
    const t = readCsv(join(SAMPLE, "rate.csv"));
    expect(t.header).toContain("eps_plus_nu");
    expect(t.columns.get("sup_metric")!.length).toBe(3);
  });

  it("raises MissingColumn with the offending name", () => {
    const t = readCsv(join(SAMPLE, "rate.csv"));
    expect(() => requireColumns(t, ["no_such_thing"])).toThrowError(MissingColumn);
    try {
      requireColumns(t, ["no_such_thing"]);
    } catch (err) {
      expect((err as MissingColumn).column).toBe("no_such_thing");
    }
  });
});

describe("rate figure", () => {
  it("contains data markers, a fitted line, and the slope-1 guide", () => {
    const rate = readCsv(join(SAMPLE, "rate.csv"));
    const fit = readRateFit(join(SAMPLE, "rate.csv"));
    expect(fit).not.toBeNull();
    const svg = rateLogLog(rate, fit, "test");
    expect(svg).toContain("<circle"); // data points
    expect(svg).toContain("fit: order"); // fitted line legend
    expect(svg).toContain("slope-1 guide");
    expect(svg).toContain('stroke-dasharray="6 4"'); // the guide is dashed
  });
});

describe("render", () => {
  it("writes all four figures and the summary", () => {
    const out = mkdtempSync(join(tmpdir(), "strep-"));
    const result = render(sampleSpec(out));
    expect(result.figurePaths.length).toBe(4);
    for (const p of result.figurePaths) {
      const body = readFileSync(p, "utf8");
      expect(body.startsWith("<svg")).toBe(true);
      expect(body).toContain("</svg>");
    }
    const summary = readFileSync(result.summaryPath, "utf8");
    // the fitted order is restated exactly as the harness wrote it
    const sidecar = readFileSync(join(SAMPLE, "rate_fit.json"), "utf8");
    const token = sidecar.match(/"fitted_order"\s*:\s*([-+0-9.eE]+)/)![1];
    expect(summary).toContain(`harness value): ${token}`);
  });

  it("is byte-stable across reruns", () => {
    const out1 = mkdtempSync(join(tmpdir(), "strep-"));
    const out2 = mkdtempSync(join(tmpdir(), "strep-"));
    const a = render(sampleSpec(out1));
    const b = render(sampleSpec(out2));
    for (let i = 0; i < a.figurePaths.length; i++) {
      expect(readFileSync(a.figurePaths[i], "utf8")).toBe(
        readFileSync(b.figurePaths[i], "utf8")
      );
    }
  });

  it("never mutates its inputs", () => {
    const before = readFileSync(join(SAMPLE, "rate.csv"), "utf8");
    const out = mkdtempSync(join(tmpdir(), "strep-"));
    render(sampleSpec(out));
    expect(readFileSync(join(SAMPLE, "rate.csv"), "utf8")).toBe(before);
  });
});

describe("spec validation", () => {
  it("requires at least one figure", () => {
    expect(() =>
      validateSpec({ figures: [], format: "svg", titles: {} } as ReportSpec)
    ).toThrowError(SpecError);
  });

  it("rejects png with a clear message", () => {
    expect(() =>
      validateSpec({
        figures: ["rate_loglog"],
        rateCsv: join(SAMPLE, "rate.csv"),
        format: "png",
        titles: {},
      } as ReportSpec)
    ).toThrowError(/rasterizer/);
  });

  it("rejects missing inputs", () => {
    expect(() =>
      validateSpec({
        figures: ["rate_loglog"],
        rateCsv: "/no/such/file.csv",
        format: "svg",
        titles: {},
      } as ReportSpec)
    ).toThrowError(SpecError);
  });

  it("parses the toml spec format", () => {
    const raw = parseToml(
      '[report]\nrate_csv = "a.csv"\nfigures = ["rate_loglog"]\nformat = "svg"\n' +
        '[labels]\nrate_loglog = "My title"\n'
    );
    expect(raw.report.rate_csv).toBe("a.csv");
    expect(raw.report.figures).toEqual(["rate_loglog"]);
    expect(raw.labels.rate_loglog).toBe("My title");
  });

  it("loads a full spec file and honors label overrides", () => {
    const out = mkdtempSync(join(tmpdir(), "strep-"));
    const specPath = join(out, "report.toml");
    writeFileSync(
      specPath,
      `[report]\nrate_csv = "${join(SAMPLE, "rate.csv")}"\n` +
        `figures = ["rate_loglog"]\noutput_dir = "${out}"\n` +
        '[labels]\nrate_loglog = "Custom title"\n'
    );
    const spec = loadSpec(specPath);
    const result = render(spec);
    expect(readFileSync(result.figurePaths[0], "utf8")).toContain("Custom title");
  });
});

describe("cli", () => {
  it("renders from positional CSVs", () => {
    const out = mkdtempSync(join(tmpdir(), "strep-"));
    const code = main([
      join(SAMPLE, "rate.csv"),
      join(SAMPLE, "diagnostics.csv"),
      "--out",
      out,
    ]);
    expect(code).toBe(0);
    expect(readFileSync(join(out, "summary.md"), "utf8")).toContain("strato report");
  });

  it("fails cleanly with no inputs", () => {
    expect(main([])).toBe(1);
  });
});
