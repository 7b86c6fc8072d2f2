/**
 * Deterministic SVG scene building: no timestamps, no randomness, fixed
 * number formatting, so identical inputs give identical bytes.
 */

export interface Axis {
  label: string;
  log: boolean;
  min: number;
  max: number;
}

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  markers?: boolean;
  dashed?: boolean;
}

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 72, right: 16, top: 36, bottom: 52 };

export const PALETTE = ["#1f6fb2", "#d1495b", "#3a9d6c", "#8c6bb1", "#c98a2b", "#4d4d4d"];

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e-3 && a < 1e5) {
    return String(Number(v.toPrecision(6)));
  }
  return v.toExponential(3);
}

function coord(v: number): string {
  return v.toFixed(2);
}

function scale(axis: Axis, pixelMin: number, pixelMax: number) {
  const lo = axis.log ? Math.log10(axis.min) : axis.min;
  const hi = axis.log ? Math.log10(axis.max) : axis.max;
  const span = hi - lo || 1;
  return (v: number) => {
    const t = ((axis.log ? Math.log10(v) : v) - lo) / span;
    return pixelMin + t * (pixelMax - pixelMin);
  };
}

function ticks(axis: Axis): number[] {
  if (axis.log) {
    const out: number[] = [];
    const lo = Math.floor(Math.log10(axis.min));
    const hi = Math.ceil(Math.log10(axis.max));
    for (const mantissa of [1, 2, 5]) {
      for (let d = lo; d <= hi; d++) {
        const v = mantissa * Math.pow(10, d);
        if (v >= axis.min / 1.001 && v <= axis.max * 1.001) out.push(v);
      }
    }
    out.sort((a, b) => a - b);
    return out.length >= 2 ? out : [axis.min, axis.max];
  }
  const span = axis.max - axis.min || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / 4)));
  const mult = span / step > 8 ? 2 : 1;
  const out: number[] = [];
  const start = Math.ceil(axis.min / (step * mult)) * step * mult;
  for (let v = start; v <= axis.max + 1e-12 * span; v += step * mult) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

/** Pad a [min, max] range; switches to decades for log axes. */
export function rangeOf(values: number[], log: boolean): [number, number] {
  const finite = values.filter((v) => Number.isFinite(v) && (!log || v > 0));
  if (finite.length === 0) return log ? [1e-1, 1e1] : [0, 1];
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (log) {
    return [lo / 1.5, hi * 1.5];
  }
  if (lo === hi) {
    const pad = Math.abs(lo) * 0.1 || 1;
    return [lo - pad, hi + pad];
  }
  const pad = (hi - lo) * 0.08;
  return [lo - pad, hi + pad];
}

export function renderChart(
  title: string,
  xAxis: Axis,
  yAxis: Axis,
  series: Series[]
): string {
  const sx = scale(xAxis, MARGIN.left, WIDTH - MARGIN.right);
  const sy = scale(yAxis, HEIGHT - MARGIN.bottom, MARGIN.top);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="15">${title}</text>`
  );
  // frame
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  parts.push(
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" ` +
      `fill="none" stroke="#333" stroke-width="1"/>`,
    `<clipPath id="frame"><rect x="${x0}" y="${y1}" width="${x1 - x0}" ` +
      `height="${y0 - y1}"/></clipPath>`
  );
  for (const t of ticks(xAxis)) {
    const px = sx(t);
    parts.push(
      `<line x1="${coord(px)}" y1="${y0}" x2="${coord(px)}" y2="${y1}" stroke="#ddd"/>`,
      `<text x="${coord(px)}" y="${y0 + 18}" text-anchor="middle" font-size="11">${fmt(t)}</text>`
    );
  }
  for (const t of ticks(yAxis)) {
    const py = sy(t);
    parts.push(
      `<line x1="${x0}" y1="${coord(py)}" x2="${x1}" y2="${coord(py)}" stroke="#ddd"/>`,
      `<text x="${x0 - 6}" y="${coord(py + 4)}" text-anchor="end" font-size="11">${fmt(t)}</text>`
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="12">${xAxis.label}</text>`,
    `<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" ` +
      `transform="rotate(-90 18 ${(y0 + y1) / 2})">${yAxis.label}</text>`
  );
  series.forEach((s, idx) => {
    const pts = s.x
      .map((xv, i) => [sx(xv), sy(s.y[i])])
      .filter(([px, py]) => Number.isFinite(px) && Number.isFinite(py));
    const attr = s.dashed ? ' stroke-dasharray="6 4"' : "";
    if (pts.length > 1) {
      const d = pts.map(([px, py]) => `${coord(px)},${coord(py)}`).join(" ");
      parts.push(
        `<polyline points="${d}" fill="none" stroke="${s.color}" ` +
          `stroke-width="1.6" clip-path="url(#frame)"${attr}/>`
      );
    }
    if (s.markers) {
      for (const [px, py] of pts) {
        parts.push(`<circle cx="${coord(px)}" cy="${coord(py)}" r="3.5" fill="${s.color}"/>`);
      }
    }
    const ly = MARGIN.top + 16 * idx + 12;
    parts.push(
      `<line x1="${x1 - 150}" y1="${ly - 4}" x2="${x1 - 122}" y2="${ly - 4}" ` +
        `stroke="${s.color}" stroke-width="2"${attr}/>`,
      `<text x="${x1 - 116}" y="${ly}" font-size="11">${s.label}</text>`
    );
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
