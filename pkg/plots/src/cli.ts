#!/usr/bin/env node
/**
 * Command line entry point.
 *
 *   plot controls --inputs nearest/control.csv baseline/control.csv --out controls.svg
 *   plot states   --inputs nearest/sim_trajectory.csv baseline/sim_trajectory.csv \
 *                 --out states.svg --band -0.1 0.1
 *
 * `controls` step-plots each run's control channels in side-by-side
 * panels; `states` overlays the runs in one panel per state coordinate,
 * shading the admissible band on the constrained coordinate's panel when
 * `--band lo hi` is given. Exits nonzero on a missing or malformed CSV.
 */

import yargs from "yargs";
import { FigureSpec, writeFigure } from "./figure";

interface RawArgs {
  inputs: string[];
  out: string;
  band?: number[];
}

function toSpec(kind: FigureSpec["kind"], argv: RawArgs): FigureSpec {
  const spec: FigureSpec = { kind, inputs: argv.inputs.map(String), out: String(argv.out) };
  if (argv.band !== undefined) {
    if (argv.band.length !== 2) {
      throw new Error(`--band takes exactly two numbers (lower upper), got ${argv.band.length}`);
    }
    spec.band = [Number(argv.band[0]), Number(argv.band[1])];
  }
  return spec;
}

/** Run the CLI with explicit argv; returns the process exit code. */
export function run(argv: string[]): number {
  let failed = false;

  const parser = yargs(argv)
    .scriptName("plot")
    .usage("$0 <command> --inputs <csv...> --out <figure.svg> [--band lo hi]")
    .option("inputs", {
      type: "string",
      array: true,
      demandOption: true,
      describe: "one or two run CSVs, drawn in the order given",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output image path (.svg)",
    })
    .option("band", {
      type: "number",
      array: true,
      describe: "lower and upper bound of the shaded state band",
    })
    .command(
      "controls",
      "side-by-side step plots of each run's control channels",
      () => undefined,
      (a) => writeFigure(toSpec("control_compare", a as unknown as RawArgs))
    )
    .command(
      "states",
      "per-coordinate state panels with the runs overlaid",
      () => undefined,
      (a) => writeFigure(toSpec("state_panel", a as unknown as RawArgs))
    )
    .demandCommand(1, "choose a command: controls or states")
    .strictCommands()
    .exitProcess(false)
    .fail((msg, err) => {
      console.error(`error: ${err ? err.message : msg}`);
      failed = true;
    });

  try {
    parser.parseSync();
  } catch (err) {
    if (!failed) {
      console.error(`error: ${(err as Error).message}`);
      failed = true;
    }
  }
  return failed ? 1 : 0;
}

if (require.main === module) {
  process.exit(run(process.argv.slice(2)));
}
