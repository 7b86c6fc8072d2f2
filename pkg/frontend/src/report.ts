import { existsSync, mkdirSync, readFileSync, writeFileSync } from "fs";
import { basename, dirname, join } from "path";

import { Table, readCsv } from "./csv";
import { RateFit, acousticSplit, boundPanel, energyTrace, rateLogLog } from "./figures";

export const FIGURES = ["rate_loglog", "energy_trace", "acoustic_split", "bound_panel"] as const;
export type FigureName = (typeof FIGURES)[number];

export interface ReportSpec {
  rateCsv?: string;
  diagnosticsCsv?: string;
  figures: FigureName[];
  format: "svg" | "png";
  outputDir?: string;
  titles: Partial<Record<FigureName, string>>;
}

export class SpecError extends Error {}

const DEFAULT_TITLES: Record<FigureName, string> = {
  rate_loglog: "Convergence of the sup-in-time metric",
  energy_trace: "Energy budget",
  acoustic_split: "Acoustic vs vortical energy",
  bound_panel: "Uniform-bound monitors",
};

/** Minimal TOML reader for the flat [report]/[labels] spec layout. */
export function parseToml(text: string): Record<string, Record<string, unknown>> {
  const out: Record<string, Record<string, unknown>> = {};
  let section = "";
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.replace(/#.*$/, "").trim();
    if (!line) continue;
    const sec = line.match(/^\[([A-Za-z0-9_.-]+)\]$/);
    if (sec) {
      section = sec[1];
      out[section] = out[section] ?? {};
      continue;
    }
    const kv = line.match(/^([A-Za-z0-9_-]+)\s*=\s*(.+)$/);
    if (!kv) throw new SpecError(`unparseable spec line: ${raw}`);
    out[section] = out[section] ?? {};
    out[section][kv[1]] = parseTomlValue(kv[2].trim());
  }
  return out;
}

function parseTomlValue(token: string): unknown {
  if (token.startsWith("[")) {
    const inner = token.replace(/^\[/, "").replace(/\]$/, "").trim();
    if (!inner) return [];
    return inner.split(",").map((t) => parseTomlValue(t.trim()));
  }
  if (/^".*"$/.test(token) || /^'.*'$/.test(token)) return token.slice(1, -1);
  if (token === "true") return true;
  if (token === "false") return false;
  const num = Number(token);
  if (Number.isFinite(num)) return num;
  throw new SpecError(`unparseable spec value: ${token}`);
}

export function loadSpec(path: string): ReportSpec {
  const text = readFileSync(path, "utf8");
  const raw = path.endsWith(".json")
    ? (JSON.parse(text) as Record<string, Record<string, unknown>>)
    : parseToml(text);
  const report = raw.report ?? {};
  const labels = (raw.labels ?? {}) as Partial<Record<FigureName, string>>;
  const figures = (report.figures as FigureName[]) ?? [];
  const spec: ReportSpec = {
    rateCsv: report.rate_csv as string | undefined,
    diagnosticsCsv: report.diagnostics_csv as string | undefined,
    figures,
    format: ((report.format as string) ?? "svg") as "svg" | "png",
    outputDir: report.output_dir as string | undefined,
    titles: labels,
  };
  return validateSpec(spec);
}

export function validateSpec(spec: ReportSpec): ReportSpec {
  if (spec.figures.length === 0) {
    throw new SpecError("at least one figure must be requested");
  }
  for (const f of spec.figures) {
    if (!FIGURES.includes(f)) throw new SpecError(`unknown figure "${f}"`);
  }
  if (spec.format !== "svg" && spec.format !== "png") {
    throw new SpecError(`unknown output format "${spec.format}"`);
  }
  if (spec.format === "png") {
    throw new SpecError(
      "png output needs a native rasterizer that is not available here; use svg"
    );
  }
  const needsRate = spec.figures.includes("rate_loglog");
  const needsDiag = spec.figures.some((f) => f !== "rate_loglog");
  if (needsRate && !spec.rateCsv) throw new SpecError("rate_loglog requires rate_csv");
  if (needsDiag && !spec.diagnosticsCsv) {
    throw new SpecError("trace figures require diagnostics_csv");
  }
  for (const p of [spec.rateCsv, spec.diagnosticsCsv]) {
    if (p && !existsSync(p)) throw new SpecError(`input does not exist: ${p}`);
  }
  return spec;
}

/** Read the harness's fit sidecar next to the rate CSV, if present.
 *
 * The fitted order is restated verbatim (the literal JSON token), never
 * recomputed, so the summary cannot drift from the harness value.
 */
export function readRateFit(rateCsvPath: string): RateFit | null {
  const sidecar = join(dirname(rateCsvPath), "rate_fit.json");
  if (!existsSync(sidecar)) return null;
  const text = readFileSync(sidecar, "utf8");
  const parsed = JSON.parse(text) as { fitted_order: number; fit_residual: number };
  const token = text.match(/"fitted_order"\s*:\s*([-+0-9.eE]+)/);
  return {
    fittedOrder: parsed.fitted_order,
    fittedOrderText: token ? token[1] : String(parsed.fitted_order),
    residual: parsed.fit_residual,
  };
}

export interface RenderResult {
  figurePaths: string[];
  summaryPath: string;
}

export function render(spec: ReportSpec): RenderResult {
  validateSpec(spec);
  const rate = spec.rateCsv ? readCsv(spec.rateCsv) : null;
  const diag = spec.diagnosticsCsv ? readCsv(spec.diagnosticsCsv) : null;
  const fit = spec.rateCsv ? readRateFit(spec.rateCsv) : null;
  const outDir =
    spec.outputDir ?? dirname(spec.rateCsv ?? spec.diagnosticsCsv ?? ".");
  mkdirSync(outDir, { recursive: true });

  const figurePaths: string[] = [];
  for (const name of spec.figures) {
    const title = spec.titles[name] ?? DEFAULT_TITLES[name];
    let svg: string;
    if (name === "rate_loglog") {
      svg = rateLogLog(rate as Table, fit, title);
    } else if (name === "energy_trace") {
      svg = energyTrace(diag as Table, title);
    } else if (name === "acoustic_split") {
      svg = acousticSplit(diag as Table, title);
    } else {
      svg = boundPanel(diag as Table, title);
    }
    const path = join(outDir, `${name}.svg`);
    writeFileSync(path, svg);
    figurePaths.push(path);
  }

  const summaryPath = join(outDir, "summary.md");
  writeFileSync(summaryPath, summaryText(spec, rate, fit, figurePaths));
  return { figurePaths, summaryPath };
}

function summaryText(
  spec: ReportSpec,
  rate: Table | null,
  fit: RateFit | null,
  figures: string[]
): string {
  const lines: string[] = ["# strato report", ""];
  if (rate) {
    lines.push(`Sweep points (from ${basename(rate.path)}):`, "");
    const eps = rate.columns.get("epsilon") ?? [];
    const nu = rate.columns.get("nu") ?? [];
    const metric = rate.columns.get("sup_metric") ?? [];
    lines.push("| epsilon | nu | sup metric |", "| --- | --- | --- |");
    for (let i = 0; i < metric.length; i++) {
      lines.push(`| ${eps[i]} | ${nu[i]} | ${metric[i]} |`);
    }
    lines.push("");
  }
  if (fit) {
    lines.push(`Fitted convergence order (harness value): ${fit.fittedOrderText}`, "");
  } else if (spec.figures.includes("rate_loglog")) {
    lines.push("No rate_fit.json found beside the rate CSV; no order to restate.", "");
  }
  lines.push("Figures:", "");
  for (const f of figures) lines.push(`- ${basename(f)}`);
  lines.push("");
  return lines.join("\n");
}
