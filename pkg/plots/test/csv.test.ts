import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, describe, expect, it } from "vitest";
import {
  controlColumns,
  loadControlRun,
  loadRunTable,
  loadTrajectoryRun,
  stateColumns,
} from "../src/csv";

const FIXTURES = path.join(__dirname, "fixtures");
const scratch = fs.mkdtempSync(path.join(os.tmpdir(), "plots-csv-"));
afterAll(() => fs.rmSync(scratch, { recursive: true, force: true }));

function writeScratch(name: string, text: string): string {
  const p = path.join(scratch, name);
  fs.writeFileSync(p, text, "utf8");
  return p;
}

describe("loadControlRun", () => {
  it("reads a control run with ordered numeric columns", () => {
    const table = loadControlRun(path.join(FIXTURES, "gear", "control_nearest.csv"));
    expect(table.label).toBe("control_nearest");
    expect(controlColumns(table)).toEqual(["u1", "u2"]);
    expect(table.length).toBeGreaterThan(10);
    const t = table.series.get("t")!;
    for (let i = 1; i < t.length; i++) {
      expect(t[i]).toBeGreaterThan(t[i - 1]);
    }
    for (const u of table.series.get("u2")!) {
      expect(Number.isFinite(u)).toBe(true);
    }
  });

  it("rejects a header-only file, naming the problem", () => {
    expect(() => loadControlRun(path.join(FIXTURES, "header_only.csv"))).toThrow(/no data rows/);
  });

  it("rejects a missing file", () => {
    expect(() => loadControlRun(path.join(FIXTURES, "does_not_exist.csv"))).toThrow(/not found/);
  });

  it("rejects a file without control columns", () => {
    const p = writeScratch("states_only.csv", "t,x1\n0.0,1.0\n");
    expect(() => loadControlRun(p)).toThrow(/no control columns/);
  });

  it("rejects non-numeric cells with their location", () => {
    const p = writeScratch("bad_cell.csv", "t,u1\n0.0,1.0\n0.1,oops\n");
    expect(() => loadControlRun(p)).toThrow(/row 3.*"u1".*oops/);
  });

  it("rejects ragged rows", () => {
    const p = writeScratch("ragged.csv", "t,u1,u2\n0.0,1.0\n");
    expect(() => loadControlRun(p)).toThrow(/2 cells, expected 3/);
  });
});

describe("loadTrajectoryRun", () => {
  it("reads states and the controls sampled along them", () => {
    const table = loadTrajectoryRun(path.join(FIXTURES, "gear", "sim_trajectory_nearest.csv"));
    expect(stateColumns(table)).toEqual(["x1", "x2", "x3", "x4"]);
    expect(controlColumns(table)).toEqual(["u1", "u2"]);
    expect(table.series.get("x1")![0]).toBe(0);
  });

  it("rejects a file without state columns", () => {
    const p = path.join(FIXTURES, "header_only.csv");
    expect(() => loadTrajectoryRun(p)).toThrow(/no data rows/);
  });
});

describe("loadRunTable", () => {
  it("reports a missing required column by name", () => {
    const p = writeScratch("no_time.csv", "x1,u1\n0.0,1.0\n");
    expect(() => loadRunTable(p, [])).toThrow(/missing required column "t"/);
  });
});
