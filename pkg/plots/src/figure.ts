/**
 * Figure construction and rendering.
 *
 * Figures are described by a small declarative spec, turned into an
 * echarts option, and rendered headlessly to SVG markup. Controls are
 * drawn with zero-order-hold steps (a control value holds over its grid
 * interval, so connecting samples with slopes would misstate the input);
 * states are drawn as lines, one panel per coordinate, with an optional
 * shaded admissible band on the constrained coordinate's panel.
 */

import * as fs from "fs";
import * as path from "path";
import * as echarts from "echarts";
import {
  RunTable,
  controlColumns,
  loadControlRun,
  loadTrajectoryRun,
  stateColumns,
} from "./csv";

export type FigureKind = "control_compare" | "state_panel";

export interface FigureSpec {
  kind: FigureKind;
  /** Run CSVs in draw order; one or two. */
  inputs: string[];
  /** Output image path; `.svg` is rendered natively. */
  out: string;
  /** Lower/upper bound of the shaded band on the constrained state's panel. */
  band?: [number, number];
}

/** Name of the state coordinate whose panel carries the shaded band. */
export const BAND_STATE = "x2";

/** Fill used for the band; tests key on it to confirm the band was drawn. */
export const BAND_FILL = "#f6c85f";

const RUN_COLORS = ["#4e79a7", "#e15759"];
const CONTROL_DASHES: Array<"solid" | "dashed"> = ["solid", "dashed"];

export function validateFigureSpec(spec: FigureSpec): void {
  if (spec.inputs.length < 1 || spec.inputs.length > 2) {
    throw new Error(`expected one or two input CSVs, got ${spec.inputs.length}`);
  }
  if (spec.band !== undefined) {
    const [lo, hi] = spec.band;
    if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
      throw new Error(`band bounds must be finite numbers, got [${lo}, ${hi}]`);
    }
    if (lo >= hi) {
      throw new Error(`band lower bound must be below the upper bound, got [${lo}, ${hi}]`);
    }
  }
}

interface BuiltFigure {
  option: echarts.EChartsCoreOption;
  width: number;
  height: number;
}

/**
 * One panel per run, side by side; each panel step-plots every control
 * channel of that run against time.
 */
function buildControlsFigure(runs: RunTable[]): BuiltFigure {
  const panelWidth = 440;
  const width = 60 + panelWidth * runs.length;
  const height = 380;

  const grids: object[] = [];
  const xAxes: object[] = [];
  const yAxes: object[] = [];
  const titles: object[] = [];
  const series: object[] = [];

  runs.forEach((run, i) => {
    const left = 55 + panelWidth * i;
    grids.push({ left, top: 70, width: panelWidth - 80, height: height - 130 });
    xAxes.push({ gridIndex: i, type: "value", name: "t", nameLocation: "middle", nameGap: 25 });
    yAxes.push({ gridIndex: i, type: "value", name: i === 0 ? "control" : "", scale: true });
    titles.push({ text: run.label, left: left + (panelWidth - 80) / 2, top: 34, textAlign: "center", textStyle: { fontSize: 13 } });
    controlColumns(run).forEach((col, j) => {
      const t = run.series.get("t")!;
      series.push({
        name: col,
        type: "line",
        step: "end",
        symbol: "none",
        xAxisIndex: i,
        yAxisIndex: i,
        lineStyle: { width: 2, type: CONTROL_DASHES[j % CONTROL_DASHES.length] },
        color: RUN_COLORS[j % RUN_COLORS.length],
        data: t.map((tk, k) => [tk, run.series.get(col)![k]]),
      });
    });
  });

  const option: echarts.EChartsCoreOption = {
    animation: false,
    backgroundColor: "#ffffff",
    legend: { top: 6 },
    title: titles,
    grid: grids,
    xAxis: xAxes,
    yAxis: yAxes,
    series,
  };
  return { option, width, height };
}

/**
 * One panel per state coordinate in a two-column layout; every run is
 * overlaid in each panel. When `band` is set, the panel of BAND_STATE
 * gets a shaded horizontal band between the two bounds.
 */
function buildStatesFigure(runs: RunTable[], band?: [number, number]): BuiltFigure {
  const states = stateColumns(runs[0]);
  for (const run of runs.slice(1)) {
    if (stateColumns(run).join() !== states.join()) {
      throw new Error(
        `state columns differ between inputs: [${states.join(",")}] vs [${stateColumns(run).join(",")}]`
      );
    }
  }
  if (band !== undefined && !states.includes(BAND_STATE)) {
    console.warn(`warning: no ${BAND_STATE} panel to shade; ignoring the band`);
    band = undefined;
  }

  const cols = Math.min(2, states.length);
  const rows = Math.ceil(states.length / cols);
  const panelWidth = 420;
  const panelHeight = 260;
  const width = 60 + panelWidth * cols;
  const height = 60 + panelHeight * rows;

  const grids: object[] = [];
  const xAxes: object[] = [];
  const yAxes: object[] = [];
  const titles: object[] = [];
  const series: object[] = [];

  states.forEach((state, i) => {
    const r = Math.floor(i / cols);
    const c = i % cols;
    const left = 55 + panelWidth * c;
    const top = 70 + panelHeight * r;
    grids.push({ left, top, width: panelWidth - 85, height: panelHeight - 75 });
    xAxes.push({ gridIndex: i, type: "value", name: "t", nameLocation: "middle", nameGap: 22 });
    const yAxis: Record<string, unknown> = { gridIndex: i, type: "value", scale: true };
    if (band !== undefined && state === BAND_STATE) {
      // keep the whole band visible even when the data hugs one side of it
      const [lo, hi] = band;
      yAxis.min = (extent: { min: number }) => Math.min(extent.min, lo);
      yAxis.max = (extent: { max: number }) => Math.max(extent.max, hi);
    }
    yAxes.push(yAxis);
    titles.push({ text: state, left: left + (panelWidth - 85) / 2, top: top - 26, textAlign: "center", textStyle: { fontSize: 13 } });
    runs.forEach((run, j) => {
      const t = run.series.get("t")!;
      const entry: Record<string, unknown> = {
        name: run.label,
        type: "line",
        symbol: "none",
        xAxisIndex: i,
        yAxisIndex: i,
        color: RUN_COLORS[j % RUN_COLORS.length],
        lineStyle: { width: 2 },
        data: t.map((tk, k) => [tk, run.series.get(state)![k]]),
      };
      if (band !== undefined && state === BAND_STATE && j === 0) {
        entry.markArea = {
          silent: true,
          itemStyle: { color: BAND_FILL, opacity: 0.3 },
          data: [[{ yAxis: band[0] }, { yAxis: band[1] }]],
        };
      }
      series.push(entry);
    });
  });

  const option: echarts.EChartsCoreOption = {
    animation: false,
    backgroundColor: "#ffffff",
    legend: { top: 6 },
    title: titles,
    grid: grids,
    xAxis: xAxes,
    yAxis: yAxes,
    series,
  };
  return { option, width, height };
}

/** Load the figure's input runs and assemble the chart option. */
export function buildFigure(spec: FigureSpec): BuiltFigure {
  validateFigureSpec(spec);
  if (spec.kind === "control_compare") {
    return buildControlsFigure(spec.inputs.map(loadControlRun));
  }
  const runs = spec.inputs.map(loadTrajectoryRun);
  if (spec.band === undefined) {
    console.warn("warning: no constraint band given; states are drawn without the shaded admissible band");
  }
  return buildStatesFigure(runs, spec.band);
}

/** Render a built figure to SVG markup. */
export function renderSvg(built: BuiltFigure): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: built.width,
    height: built.height,
  });
  try {
    chart.setOption(built.option);
    return canonicalizeRendererTokens(chart.renderToSVGString());
  } finally {
    chart.dispose();
  }
}

/**
 * Generated class names and clip ids carry process-global counters, so
 * the same figure rendered twice differs in markup that has nothing to
 * do with its content. Renaming the tokens by order of first appearance
 * makes equal specs produce byte-identical files.
 */
function canonicalizeRendererTokens(svg: string): string {
  const stripped = svg.replace(/\bzr\d+-/g, "zr-");
  const renumber = (text: string, pattern: RegExp, prefix: string): string => {
    const seen = new Map<string, string>();
    return text.replace(pattern, (token) => {
      if (!seen.has(token)) {
        seen.set(token, `${prefix}${seen.size}`);
      }
      return seen.get(token)!;
    });
  };
  return renumber(renumber(stripped, /\bzr-cls-\d+\b/g, "zr-cls-"), /\bzr-c\d+\b/g, "zr-c");
}

/**
 * Build the figure and write it to `spec.out`. Output is vector SVG; the
 * extension must be `.svg` so viewers interpret the file correctly.
 */
export function writeFigure(spec: FigureSpec): void {
  const built = buildFigure(spec);
  const svg = renderSvg(built);
  const ext = path.extname(spec.out).toLowerCase();
  if (ext !== ".svg") {
    throw new Error(`unsupported output extension "${ext}": figures are written as vector SVG, use a .svg path`);
  }
  fs.mkdirSync(path.dirname(path.resolve(spec.out)), { recursive: true });
  fs.writeFileSync(spec.out, svg, "utf8");
}
