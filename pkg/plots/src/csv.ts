/**
 * CSV ingestion for the solver CLI's run outputs.
 *
 * Two file shapes are understood:
 *   - control runs:     header `t,u1,...,um`, one row per grid interval
 *   - trajectory runs:  header `t,x1,...,xn,u1,...,um`, one row per knot
 *
 * Rows are piecewise-constant control samples (value holds until the next
 * row's time), so downstream rendering uses step interpolation for `u`
 * columns and plain lines for `x` columns.
 */

import * as fs from "fs";
import * as path from "path";
import Papa from "papaparse";

export interface RunTable {
  /** Label for legends/titles: the file name without extension. */
  label: string;
  /** Column names exactly as they appear in the header. */
  columns: string[];
  /** Per-column numeric data, keyed by column name. */
  series: Map<string, number[]>;
  /** Number of data rows. */
  length: number;
}

function columnsMatching(columns: string[], prefix: string): string[] {
  // x1..xn / u1..um style columns, kept in numeric order.
  return columns
    .filter((c) => new RegExp(`^${prefix}\\d+$`).test(c))
    .sort((a, b) => parseInt(a.slice(prefix.length), 10) - parseInt(b.slice(prefix.length), 10));
}

export function stateColumns(table: RunTable): string[] {
  return columnsMatching(table.columns, "x");
}

export function controlColumns(table: RunTable): string[] {
  return columnsMatching(table.columns, "u");
}

/**
 * Load one run CSV and check it carries a time column plus every column
 * named in `required`. Throws with a readable message on a missing file,
 * an unparseable file, a missing column, a non-numeric cell, or a file
 * with no data rows.
 */
export function loadRunTable(filePath: string, required: string[]): RunTable {
  if (!fs.existsSync(filePath)) {
    throw new Error(`input CSV not found: ${filePath}`);
  }
  const text = fs.readFileSync(filePath, "utf8");
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new Error(`could not parse ${filePath}: ${parsed.errors[0].message}`);
  }
  const rows = parsed.data;
  if (rows.length === 0) {
    throw new Error(`empty CSV: ${filePath}`);
  }
  const columns = rows[0].map((c) => c.trim());
  for (const name of ["t", ...required]) {
    if (!columns.includes(name)) {
      throw new Error(`${filePath} is missing required column "${name}" (header: ${columns.join(",")})`);
    }
  }
  const dataRows = rows.slice(1);
  if (dataRows.length === 0) {
    throw new Error(`${filePath} has no data rows`);
  }

  const series = new Map<string, number[]>(columns.map((c) => [c, []]));
  dataRows.forEach((row, i) => {
    if (row.length !== columns.length) {
      throw new Error(`${filePath} row ${i + 2} has ${row.length} cells, expected ${columns.length}`);
    }
    row.forEach((cell, j) => {
      const value = Number(cell);
      if (!Number.isFinite(value)) {
        throw new Error(`${filePath} row ${i + 2} column "${columns[j]}" is not a finite number: "${cell}"`);
      }
      series.get(columns[j])!.push(value);
    });
  });

  return {
    label: path.basename(filePath).replace(/\.[^.]*$/, ""),
    columns,
    series,
    length: dataRows.length,
  };
}

/** Load a control run: requires `t` plus at least one `u<i>` column. */
export function loadControlRun(filePath: string): RunTable {
  const table = loadRunTable(filePath, []);
  if (controlColumns(table).length === 0) {
    throw new Error(`${filePath} has no control columns (expected u1, u2, ...)`);
  }
  return table;
}

/** Load a simulated trajectory: requires `t` plus at least one `x<i>` column. */
export function loadTrajectoryRun(filePath: string): RunTable {
  const table = loadRunTable(filePath, []);
  if (stateColumns(table).length === 0) {
    throw new Error(`${filePath} has no state columns (expected x1, x2, ...)`);
  }
  return table;
}
