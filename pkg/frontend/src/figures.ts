import { Table, requireColumns } from "./csv";
import { PALETTE, Series, rangeOf, renderChart } from "./svg";

export interface RateFit {
  fittedOrder: number;
  /** literal token from the harness fit file, restated without reformatting */
  fittedOrderText: string;
  residual: number;
}

/** Log-log convergence figure: data, fitted line, and a slope-1 guide. */
export function rateLogLog(rate: Table, fit: RateFit | null, title: string): string {
  const [x, m] = requireColumns(rate, ["eps_plus_nu", "sup_metric"]);
  const [xmin, xmax] = rangeOf(x, true);
  const [ymin, ymax] = rangeOf(m, true);
  const series: Series[] = [
    { label: "sup metric", x, y: m, color: PALETTE[0], markers: true },
  ];
  if (fit) {
    // line with the harness's fitted order through the data centroid
    const cx = Math.exp(x.reduce((a, v) => a + Math.log(v), 0) / x.length);
    const cy = Math.exp(m.reduce((a, v) => a + Math.log(v), 0) / m.length);
    const fy = (v: number) => cy * Math.pow(v / cx, fit.fittedOrder);
    series.push({
      label: `fit: order ${fit.fittedOrder.toFixed(3)}`,
      x: [xmin, xmax],
      y: [fy(xmin), fy(xmax)],
      color: PALETTE[1],
    });
  }
  const anchorY = m[m.length - 1];
  const anchorX = x[x.length - 1];
  series.push({
    label: "slope-1 guide",
    x: [xmin, xmax],
    y: [(anchorY * xmin) / anchorX, (anchorY * xmax) / anchorX],
    color: "#888",
    dashed: true,
  });
  return renderChart(
    title,
    { label: "eps + nu", log: true, min: xmin, max: xmax },
    { label: "sup-in-time metric", log: true, min: ymin, max: ymax },
    series
  );
}

export function energyTrace(diag: Table, title: string): string {
  const names = ["time", "kinetic_energy", "internal_energy_scaled", "total_energy", "dissipation_integral"];
  const [t, kin, internal, total, diss] = requireColumns(diag, names);
  // the scaled internal energy dwarfs the rest; plot its drift instead
  const drift = internal.map((v) => v - internal[0]);
  const totalDrift = total.map((v) => v - total[0]);
  const ys = [...kin, ...drift, ...totalDrift, ...diss];
  const [ymin, ymax] = rangeOf(ys, false);
  const [tmin, tmax] = rangeOf(t, false);
  return renderChart(
    title,
    { label: "time", log: false, min: tmin, max: tmax },
    { label: "energy (drift for internal/total)", log: false, min: ymin, max: ymax },
    [
      { label: "kinetic", x: t, y: kin, color: PALETTE[0] },
      { label: "internal drift", x: t, y: drift, color: PALETTE[1] },
      { label: "total drift", x: t, y: totalDrift, color: PALETTE[2] },
      { label: "dissipated", x: t, y: diss, color: PALETTE[3], dashed: true },
    ]
  );
}

export function acousticSplit(diag: Table, title: string): string {
  const [t, acoustic, vortical] = requireColumns(diag, [
    "time",
    "acoustic_energy",
    "vortical_energy",
  ]);
  const [ymin, ymax] = rangeOf([...acoustic, ...vortical], false);
  const [tmin, tmax] = rangeOf(t, false);
  return renderChart(
    title,
    { label: "time", log: false, min: tmin, max: tmax },
    { label: "energy", log: false, min: ymin, max: ymax },
    [
      { label: "acoustic", x: t, y: acoustic, color: PALETTE[1], markers: true },
      { label: "vortical", x: t, y: vortical, color: PALETTE[0] },
    ]
  );
}

export function boundPanel(diag: Table, title: string): string {
  const names = ["time", "theta_pert_linf", "theta_pert_l1", "theta_sq_moment", "residual_measure"];
  const [t, linf, l1, sq, res] = requireColumns(diag, names);
  const [ymin, ymax] = rangeOf([...linf, ...l1, ...sq, ...res], false);
  const [tmin, tmax] = rangeOf(t, false);
  return renderChart(
    title,
    { label: "time", log: false, min: tmin, max: tmax },
    { label: "monitor value", log: false, min: ymin, max: ymax },
    [
      { label: "theta sup", x: t, y: linf, color: PALETTE[0] },
      { label: "theta L1", x: t, y: l1, color: PALETTE[1] },
      { label: "weighted square", x: t, y: sq, color: PALETTE[2] },
      { label: "residual volume", x: t, y: res, color: PALETTE[3], dashed: true },
    ]
  );
}
