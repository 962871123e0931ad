export {
  RunTable,
  controlColumns,
  loadControlRun,
  loadRunTable,
  loadTrajectoryRun,
  stateColumns,
} from "./csv";
export {
  BAND_FILL,
  BAND_STATE,
  FigureKind,
  FigureSpec,
  buildFigure,
  renderSvg,
  validateFigureSpec,
  writeFigure,
} from "./figure";
export { run } from "./cli";
