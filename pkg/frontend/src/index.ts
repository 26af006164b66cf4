export { SchemaError, parseCsv, median, distinct } from "./schema.js";
export type { CurveRow, RateRow, TrajectoryRow, SweepRow } from "./schema.js";
export { trainingCurves, schemeComparison, rateOverTime, trajectory, speedPower } from "./figures.js";
export { FIGURE_KINDS, buildOption, renderToSvg, renderSpecFile } from "./render.js";
export type { FigureKind, PlotSpec } from "./render.js";
