/**
 * SVG chart for one experiment: the "chance to beat baseline" series on a
 * fixed [0, 1] scale, with the confidence band for one selected level in a
 * panel below.  Values plot verbatim server numbers; only the mapping to
 * pixels happens here.
 */

import { SeriesPoint } from "./history.js";
import { toNumber } from "./json.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartOptions {
  level: string; // key into ci_by_level, e.g. "0.95"
  width?: number;
  height?: number;
}

interface Scale {
  (value: number): number;
}

function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

function polylinePoints(xs: number[], ys: number[]): string {
  return xs.map((x, i) => `${x.toFixed(2)},${ys[i]!.toFixed(2)}`).join(" ");
}

export function renderChart(
  container: HTMLElement,
  points: readonly SeriesPoint[],
  options: ChartOptions,
): void {
  const doc = container.ownerDocument;
  const width = options.width ?? 640;
  const height = options.height ?? 320;
  container.textContent = "";

  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "experiment-chart");
  container.appendChild(svg);
  if (points.length === 0) return;

  const seqs = points.map((p) => p.seq);
  const x = linearScale(seqs[0]!, seqs[seqs.length - 1]!, 40, width - 10);

  // top panel: 1 - p lives in [0, 1] by definition, no data-driven scale
  const topY = linearScale(0, 1, height * 0.45, 10);
  const beat = points.map((p) => toNumber(p.chanceToBeat));
  const line = doc.createElementNS(SVG_NS, "polyline");
  line.setAttribute("class", "chance-to-beat");
  line.setAttribute("fill", "none");
  line.setAttribute("points", polylinePoints(seqs.map(x), beat.map(topY)));
  svg.appendChild(line);

  const label = doc.createElementNS(SVG_NS, "text");
  label.setAttribute("class", "chance-to-beat-now");
  label.setAttribute("x", String(width - 10));
  label.setAttribute("y", "20");
  label.setAttribute("text-anchor", "end");
  // verbatim server token, by contract
  label.textContent = points[points.length - 1]!.chanceToBeat;
  svg.appendChild(label);

  // bottom panel: confidence band for the selected level, finite ends only
  const finite = points.filter((p) => {
    const ci = p.ciByLevel[options.level];
    return ci !== undefined && ci[0] !== null && ci[1] !== null;
  });
  if (finite.length > 0) {
    const los = finite.map((p) => toNumber(p.ciByLevel[options.level]![0]!));
    const his = finite.map((p) => toNumber(p.ciByLevel[options.level]![1]!));
    const lo = Math.min(...los, 0);
    const hi = Math.max(...his, 0);
    const bandY = linearScale(lo, hi, height - 15, height * 0.55);
    const xs = finite.map((p) => x(p.seq));

    const band = doc.createElementNS(SVG_NS, "polygon");
    band.setAttribute("class", `ci-band level-${options.level}`);
    const upper = polylinePoints(xs, his.map(bandY));
    const lower = polylinePoints([...xs].reverse(), los.map(bandY).reverse());
    band.setAttribute("points", `${upper} ${lower}`);
    svg.appendChild(band);

    // zero line for reading the sign of the effect
    const zero = doc.createElementNS(SVG_NS, "line");
    zero.setAttribute("class", "zero-line");
    zero.setAttribute("x1", String(x(seqs[0]!)));
    zero.setAttribute("x2", String(x(seqs[seqs.length - 1]!)));
    zero.setAttribute("y1", bandY(0).toFixed(2));
    zero.setAttribute("y2", bandY(0).toFixed(2));
    svg.appendChild(zero);
  }
}

/** The y pixels of the rendered 1-p polyline, for tests and audits. */
export function chanceToBeatPixels(container: HTMLElement): number[] {
  const line = container.querySelector<SVGPolylineElement>("polyline.chance-to-beat");
  if (!line) return [];
  const pts = line.getAttribute("points") ?? "";
  return pts
    .split(" ")
    .filter((s) => s.length > 0)
    .map((pair) => Number(pair.split(",")[1]));
}
