/**
 * Frozen CSV contracts for the simulator's experiment outputs, plus a small
 * typed parser. Every figure kind declares the columns it needs; a file
 * missing one fails with the offending column named.
 */
import Papa from "papaparse";

export class SchemaError extends Error {
  constructor(message: string, readonly column?: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface CurveRow {
  scheme: string;
  seed: number;
  episode: number;
  epsilon: number;
  mean_loss: number;
  throughput_bits: number;
}

export interface RateRow {
  scheme: string;
  seed: number;
  t: number;
  sum_rate_bps: number;
  reclustered: number;
}

export interface TrajectoryRow {
  checkpoint: string;
  t: number;
  uav: number;
  x: number;
  y: number;
  h: number;
}

export interface SweepRow {
  v_max: number;
  p_max_dbm: number;
  seed: number;
  throughput_bits: number;
}

export const CURVE_COLUMNS = ["scheme", "seed", "episode", "epsilon", "mean_loss", "throughput_bits"] as const;
export const RATE_COLUMNS = ["scheme", "seed", "t", "sum_rate_bps", "reclustered"] as const;
export const TRAJECTORY_COLUMNS = ["checkpoint", "t", "uav", "x", "y", "h"] as const;
export const SWEEP_COLUMNS = ["v_max", "p_max_dbm", "seed", "throughput_bits"] as const;

const TEXT_COLUMNS = new Set(["scheme", "checkpoint"]);

export function parseCsv<T>(text: string, columns: readonly string[], path: string): T[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new SchemaError(`${path}: malformed CSV (${first.message})`);
  }
  const header = parsed.meta.fields ?? [];
  for (const column of columns) {
    if (!header.includes(column)) {
      throw new SchemaError(`${path}: missing required column "${column}"`, column);
    }
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return parsed.data.map((raw, i) => {
    const row: Record<string, string | number> = {};
    for (const column of columns) {
      const value = raw[column];
      if (TEXT_COLUMNS.has(column)) {
        row[column] = value;
        continue;
      }
      const num = Number(value);
      if (!Number.isFinite(num)) {
        throw new SchemaError(
          `${path}: row ${i + 1} column "${column}" is not numeric (got ${JSON.stringify(value)})`,
          column,
        );
      }
      row[column] = num;
    }
    return row as T;
  });
}

/** Distinct values in first-seen order. */
export function distinct<T, K extends keyof T>(rows: T[], key: K): T[K][] {
  const seen: T[K][] = [];
  for (const row of rows) {
    if (!seen.includes(row[key])) seen.push(row[key]);
  }
  return seen;
}

/** Median of a numeric list. */
export function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}
