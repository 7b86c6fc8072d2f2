export { MissingColumn, readCsv, requireColumns } from "./csv";
export { acousticSplit, boundPanel, energyTrace, rateLogLog } from "./figures";
export {
  FIGURES,
  ReportSpec,
  SpecError,
  loadSpec,
  parseToml,
  readRateFit,
  render,
  validateSpec,
} from "./report";
