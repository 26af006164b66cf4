/**
 * Builds one echarts option per figure kind from parsed CSV rows. All
 * charts disable animation so server-side SVG output is deterministic.
 */
import type { EChartsOption, SeriesOption } from "echarts";
import {
  CurveRow,
  RateRow,
  SweepRow,
  TrajectoryRow,
  distinct,
  median,
} from "./schema.js";

export interface Labels {
  title?: string;
  [key: string]: string | undefined;
}

const BASE: EChartsOption = {
  animation: false,
  backgroundColor: "#ffffff",
  legend: { top: 28 },
};

function lineChart(
  title: string,
  xLabel: string,
  yLabel: string,
  series: SeriesOption[],
): EChartsOption {
  return {
    ...BASE,
    title: { text: title, left: "center" },
    xAxis: { type: "value", name: xLabel, nameLocation: "middle", nameGap: 28 },
    yAxis: { type: "value", name: yLabel, nameLocation: "middle", nameGap: 55 },
    grid: { left: 80, right: 30, top: 60, bottom: 55 },
    series,
  };
}

/** Median throughput across seeds, one line per scheme. */
export function trainingCurves(rows: CurveRow[], labels: Labels = {}): EChartsOption {
  const series: SeriesOption[] = distinct(rows, "scheme").map((scheme) => {
    const mine = rows.filter((r) => r.scheme === scheme);
    const episodes = distinct(mine, "episode").sort((a, b) => a - b);
    const data = episodes.map((ep) => [
      ep,
      median(mine.filter((r) => r.episode === ep).map((r) => r.throughput_bits)),
    ]);
    return { name: String(scheme), type: "line", showSymbol: false, data };
  });
  return lineChart(
    labels.title ?? "Training throughput",
    labels.x ?? "Training episode",
    labels.y ?? "Episode throughput (bits)",
    series,
  );
}

/** Same data contract as training curves; titled for the baseline sweep. */
export function schemeComparison(rows: CurveRow[], labels: Labels = {}): EChartsOption {
  return trainingCurves(rows, {
    title: labels.title ?? "Training scheme comparison",
    ...labels,
  });
}

/** Sum rate over time with re-clustering instants marked. */
export function rateOverTime(rows: RateRow[], labels: Labels = {}): EChartsOption {
  const series: SeriesOption[] = distinct(rows, "scheme").map((scheme) => {
    const mine = rows.filter((r) => r.scheme === scheme);
    const times = distinct(mine, "t").sort((a, b) => a - b);
    const data = times.map((t) => [
      t,
      median(mine.filter((r) => r.t === t).map((r) => r.sum_rate_bps)),
    ]);
    return { name: String(scheme), type: "line", showSymbol: false, data };
  });
  const markers = distinct(rows.filter((r) => r.reclustered === 1), "t");
  if (markers.length > 0 && series.length > 0) {
    (series[0] as Record<string, unknown>).markLine = {
      symbol: "none",
      label: { formatter: "re-cluster" },
      lineStyle: { type: "dashed" },
      data: markers.map((t) => ({ xAxis: t })),
    };
  }
  return lineChart(
    labels.title ?? "System data rate over a service period",
    labels.x ?? "Time (s)",
    labels.y ?? "Sum rate (bits/s)",
    series,
  );
}

/** 2D flight path panel plus a height-versus-time panel. */
export function trajectory(rows: TrajectoryRow[], labels: Labels = {}): EChartsOption {
  const pathSeries: SeriesOption[] = [];
  const heightSeries: SeriesOption[] = [];
  for (const checkpoint of distinct(rows, "checkpoint")) {
    for (const uav of distinct(rows, "uav")) {
      const mine = rows
        .filter((r) => r.checkpoint === checkpoint && r.uav === uav)
        .sort((a, b) => a.t - b.t);
      if (mine.length === 0) continue;
      const name = `uav${uav} @${checkpoint} ep`;
      pathSeries.push({
        name,
        type: "line",
        showSymbol: false,
        xAxisIndex: 0,
        yAxisIndex: 0,
        data: mine.map((r) => [r.x, r.y]),
      });
      heightSeries.push({
        name,
        type: "line",
        showSymbol: false,
        xAxisIndex: 1,
        yAxisIndex: 1,
        data: mine.map((r) => [r.t, r.h]),
      });
    }
  }
  return {
    ...BASE,
    title: { text: labels.title ?? "UAV trajectory and height profile", left: "center" },
    grid: [
      { left: 70, right: "55%", top: 70, bottom: 60 },
      { left: "55%", right: 30, top: 70, bottom: 60 },
    ],
    xAxis: [
      { type: "value", gridIndex: 0, name: labels.x ?? "x (m)", nameLocation: "middle", nameGap: 28 },
      { type: "value", gridIndex: 1, name: labels.t ?? "Time (s)", nameLocation: "middle", nameGap: 28 },
    ],
    yAxis: [
      { type: "value", gridIndex: 0, name: labels.y ?? "y (m)", nameLocation: "middle", nameGap: 45 },
      { type: "value", gridIndex: 1, name: labels.h ?? "Height (m)", nameLocation: "middle", nameGap: 45 },
    ],
    series: [...pathSeries, ...heightSeries],
  };
}

/** Median throughput against user speed, one line per power budget. */
export function speedPower(rows: SweepRow[], labels: Labels = {}): EChartsOption {
  const series: SeriesOption[] = distinct(rows, "p_max_dbm").map((p) => {
    const mine = rows.filter((r) => r.p_max_dbm === p);
    const speeds = distinct(mine, "v_max").sort((a, b) => a - b);
    const data = speeds.map((v) => [
      v,
      median(mine.filter((r) => r.v_max === v).map((r) => r.throughput_bits)),
    ]);
    return { name: `P_max ${p} dBm`, type: "line", data };
  });
  return lineChart(
    labels.title ?? "Throughput against user speed and power budget",
    labels.x ?? "Max user speed (m/s)",
    labels.y ?? "Episode throughput (bits)",
    series,
  );
}
