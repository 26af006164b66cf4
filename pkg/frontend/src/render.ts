/**
 * Renders a plot spec to an SVG file using echarts' server-side renderer.
 * No DOM is involved; output depends only on the spec and its input CSVs.
 */
import { readFileSync, writeFileSync, mkdirSync } from "fs";
import { dirname, resolve } from "path";
import * as echarts from "echarts";
import {
  CURVE_COLUMNS,
  RATE_COLUMNS,
  SWEEP_COLUMNS,
  TRAJECTORY_COLUMNS,
  CurveRow,
  RateRow,
  SchemaError,
  SweepRow,
  TrajectoryRow,
  parseCsv,
} from "./schema.js";
import { Labels, rateOverTime, schemeComparison, speedPower, trainingCurves, trajectory } from "./figures.js";

export const FIGURE_KINDS = [
  "training-curves",
  "scheme-comparison",
  "rate-over-time",
  "trajectory",
  "speed-power",
] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface PlotSpec {
  kind: FigureKind;
  input: string;
  output: string;
  labels?: Labels;
  width?: number;
  height?: number;
}

function loadText(path: string): string {
  try {
    return readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read input file ${path}: ${(err as Error).message}`);
  }
}

export function buildOption(spec: PlotSpec, baseDir = "."): echarts.EChartsOption {
  const path = resolve(baseDir, spec.input);
  const text = loadText(path);
  const labels = spec.labels ?? {};
  switch (spec.kind) {
    case "training-curves":
      return trainingCurves(parseCsv<CurveRow>(text, CURVE_COLUMNS, path), labels);
    case "scheme-comparison":
      return schemeComparison(parseCsv<CurveRow>(text, CURVE_COLUMNS, path), labels);
    case "rate-over-time":
      return rateOverTime(parseCsv<RateRow>(text, RATE_COLUMNS, path), labels);
    case "trajectory":
      return trajectory(parseCsv<TrajectoryRow>(text, TRAJECTORY_COLUMNS, path), labels);
    case "speed-power":
      return speedPower(parseCsv<SweepRow>(text, SWEEP_COLUMNS, path), labels);
    default:
      throw new SchemaError(`unknown figure kind ${JSON.stringify(spec.kind)}`);
  }
}

export function renderToSvg(spec: PlotSpec, baseDir = "."): string {
  const option = buildOption(spec, baseDir);
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: spec.width ?? 860,
    height: spec.height ?? 520,
  });
  try {
    chart.setOption(option);
    return chart.renderToSVGString();
  } finally {
    chart.dispose();
  }
}

export function renderSpecFile(specPath: string): string[] {
  const baseDir = dirname(resolve(specPath));
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(specPath, "utf8"));
  } catch (err) {
    throw new SchemaError(`cannot read spec ${specPath}: ${(err as Error).message}`);
  }
  const specs = (Array.isArray(parsed) ? parsed : [parsed]) as PlotSpec[];
  const written: string[] = [];
  for (const spec of specs) {
    if (!spec.kind || !spec.input || !spec.output) {
      throw new SchemaError("plot spec needs kind, input and output fields");
    }
    const svg = renderToSvg(spec, baseDir);
    const outPath = resolve(baseDir, spec.output);
    mkdirSync(dirname(outPath), { recursive: true });
    writeFileSync(outPath, svg);
    written.push(outPath);
  }
  return written;
}
