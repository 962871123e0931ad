import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, afterEach, describe, expect, it, vi } from "vitest";
import {
  BAND_FILL,
  FigureSpec,
  buildFigure,
  renderSvg,
  validateFigureSpec,
  writeFigure,
} from "../src/figure";

const FIXTURES = path.join(__dirname, "fixtures");
const GEAR = path.join(FIXTURES, "gear");
const scratch = fs.mkdtempSync(path.join(os.tmpdir(), "plots-fig-"));
afterAll(() => fs.rmSync(scratch, { recursive: true, force: true }));
afterEach(() => vi.restoreAllMocks());

const controlsSpec: FigureSpec = {
  kind: "control_compare",
  inputs: [path.join(GEAR, "control_nearest.csv"), path.join(GEAR, "control_baseline.csv")],
  out: path.join(scratch, "controls.svg"),
};

const statesSpec: FigureSpec = {
  kind: "state_panel",
  inputs: [
    path.join(GEAR, "sim_trajectory_nearest.csv"),
    path.join(GEAR, "sim_trajectory_baseline.csv"),
  ],
  out: path.join(scratch, "states.svg"),
  band: [-0.1, 0.1],
};

describe("validateFigureSpec", () => {
  it("rejects zero or three inputs", () => {
    expect(() => validateFigureSpec({ ...controlsSpec, inputs: [] })).toThrow(/one or two/);
    expect(() =>
      validateFigureSpec({ ...controlsSpec, inputs: ["a.csv", "b.csv", "c.csv"] })
    ).toThrow(/one or two/);
  });

  it("rejects an inverted or non-finite band", () => {
    expect(() => validateFigureSpec({ ...statesSpec, band: [0.1, -0.1] })).toThrow(/below/);
    expect(() => validateFigureSpec({ ...statesSpec, band: [NaN, 1] })).toThrow(/finite/);
  });
});

describe("control figures", () => {
  it("renders one titled panel per run", () => {
    const svg = renderSvg(buildFigure(controlsSpec));
    expect(svg).toContain("<svg");
    expect(svg).toContain("control_nearest");
    expect(svg).toContain("control_baseline");
    expect(svg).toContain("u1");
    expect(svg).toContain("u2");
  });

  it("renders a single run as a single panel", () => {
    const svg = renderSvg(buildFigure({ ...controlsSpec, inputs: controlsSpec.inputs.slice(0, 1) }));
    expect(svg).toContain("control_nearest");
    expect(svg).not.toContain("control_baseline");
  });

  it("is deterministic for a fixed spec", () => {
    const first = renderSvg(buildFigure(controlsSpec));
    const second = renderSvg(buildFigure(controlsSpec));
    expect(second).toBe(first);
  });
});

describe("state figures", () => {
  it("renders a panel per coordinate with both runs overlaid and the band shaded", () => {
    const svg = renderSvg(buildFigure(statesSpec));
    for (const name of ["x1", "x2", "x3", "x4"]) {
      expect(svg).toContain(name);
    }
    expect(svg).toContain("sim_trajectory_nearest");
    expect(svg).toContain("sim_trajectory_baseline");
    expect(svg).toContain(BAND_FILL);
  });

  it("draws no band and warns when bounds are omitted", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => undefined);
    const svg = renderSvg(buildFigure({ ...statesSpec, band: undefined }));
    expect(svg).not.toContain(BAND_FILL);
    expect(warn).toHaveBeenCalledWith(expect.stringMatching(/without the shaded/));
  });

  it("accepts the same run twice, drawing coinciding curves", () => {
    const twice = buildFigure({ ...statesSpec, inputs: [statesSpec.inputs[0], statesSpec.inputs[0]] });
    const seriesData = (twice.option as { series: Array<{ data: unknown }> }).series;
    // both runs contribute a series per panel, with identical samples
    expect(seriesData.length).toBe(8);
    expect(seriesData[1].data).toEqual(seriesData[0].data);
    expect(renderSvg(twice)).toContain("<svg");
  });

  it("rejects runs whose state columns disagree", () => {
    const p = path.join(scratch, "short_states.csv");
    fs.writeFileSync(p, "t,x1,x2\n0.0,0.0,0.0\n0.5,0.1,0.0\n", "utf8");
    expect(() =>
      buildFigure({ ...statesSpec, inputs: [statesSpec.inputs[0], p] })
    ).toThrow(/state columns differ/);
  });
});

describe("writeFigure", () => {
  it("writes SVG markup to the requested path without touching the inputs", () => {
    const before = controlsSpec.inputs.map((p) => fs.readFileSync(p, "utf8"));
    writeFigure(controlsSpec);
    const written = fs.readFileSync(controlsSpec.out, "utf8");
    expect(written.startsWith("<svg")).toBe(true);
    controlsSpec.inputs.forEach((p, i) => {
      expect(fs.readFileSync(p, "utf8")).toBe(before[i]);
    });
  });

  it("refuses output extensions it cannot render", () => {
    expect(() => writeFigure({ ...controlsSpec, out: path.join(scratch, "controls.png") })).toThrow(
      /\.svg/
    );
  });
});
