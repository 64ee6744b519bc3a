/** Series line chart with per-sample saliency shading.
 *
 * Sample i gets one background band whose opacity is heat[i] clamped
 * to [0,1]: the mapping is monotone (more relevance, more color) and
 * bands align 1:1 with the polyline points above them.  Everything is
 * vector SVG; nothing is rasterized.
 */

const SVG_NS = "http://www.w3.org/2000/svg";

export interface HeatmapChartOptions {
  width?: number;
  height?: number;
  shadeColor?: string;
}

/** Opacity used for the band behind sample i. */
export function shadeOpacity(heat: number): number {
  if (!Number.isFinite(heat)) return 0;
  return Math.min(1, Math.max(0, heat));
}

export function polylinePoints(
  series: number[],
  width: number,
  height: number,
  pad: number,
): string {
  const low = Math.min(...series);
  const span = Math.max(...series) - low;
  const step = width / series.length;
  return series
    .map((value, i) => {
      const x = step * (i + 0.5);
      const scaled = span === 0 ? 0.5 : (value - low) / span;
      const y = height - pad - scaled * (height - 2 * pad);
      return `${x.toFixed(2)},${y.toFixed(2)}`;
    })
    .join(" ");
}

export function renderSeriesWithHeatmap(
  series: number[],
  heat: number[] | null,
  options: HeatmapChartOptions = {},
): SVGSVGElement {
  if (heat !== null && heat.length !== series.length) {
    throw new Error(
      `heatmap length ${heat.length} != series length ${series.length}`,
    );
  }
  const width = options.width ?? 640;
  const height = options.height ?? 160;
  const shadeColor = options.shadeColor ?? "#e4572e";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "heatmap-chart");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("preserveAspectRatio", "none");

  if (heat !== null) {
    const step = width / series.length;
    heat.forEach((value, i) => {
      const band = document.createElementNS(SVG_NS, "rect");
      band.setAttribute("x", (step * i).toFixed(2));
      band.setAttribute("y", "0");
      band.setAttribute("width", step.toFixed(2));
      band.setAttribute("height", String(height));
      band.setAttribute("fill", shadeColor);
      band.setAttribute("fill-opacity", shadeOpacity(value).toFixed(4));
      band.setAttribute("data-sample", String(i));
      svg.appendChild(band);
    });
  }

  const line = document.createElementNS(SVG_NS, "polyline");
  line.setAttribute("points", polylinePoints(series, width, height, 8));
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "#15334f");
  line.setAttribute("stroke-width", "1.5");
  svg.appendChild(line);
  return svg;
}
