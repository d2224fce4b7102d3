/** SVG chart renderers: pure string builders over view-model data.
 *
 * Keeping these DOM-free makes every pixel decision unit-testable; the
 * app shell just assigns the strings to innerHTML on each poll.
 */

import type { ParallelLine, ScatterPoint, ViewModel } from "./model.js";

const WIDTH = 520;
const HEIGHT = 360;
const PAD = 42;

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

interface Scale {
  lo: number;
  hi: number;
}

function niceScale(values: number[]): Scale {
  if (values.length === 0) return { lo: 0, hi: 1 };
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (hi === lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const margin = 0.06 * (hi - lo);
  return { lo: lo - margin, hi: hi + margin };
}

function sx(value: number, scale: Scale): number {
  return PAD + ((value - scale.lo) / (scale.hi - scale.lo)) * (WIDTH - 2 * PAD);
}

function sy(value: number, scale: Scale): number {
  return HEIGHT - PAD - ((value - scale.lo) / (scale.hi - scale.lo)) * (HEIGHT - 2 * PAD);
}

function frame(xLabel: string, yLabel: string): string {
  return (
    `<rect x="${PAD}" y="${PAD}" width="${WIDTH - 2 * PAD}" height="${HEIGHT - 2 * PAD}"` +
    ` fill="none" stroke="#ccc"/>` +
    `<text x="${WIDTH / 2}" y="${HEIGHT - 8}" text-anchor="middle" class="axis-label">${esc(xLabel)}</text>` +
    `<text x="12" y="${HEIGHT / 2}" text-anchor="middle" class="axis-label"` +
    ` transform="rotate(-90 12 ${HEIGHT / 2})">${esc(yLabel)}</text>`
  );
}

/** Performance-space scatter: evaluated points, non-dominated highlighted,
 * suggested points drawn with +-1 std prediction ellipses. */
export function renderScatter(
  points: ScatterPoint[],
  xLabel: string,
  yLabel: string,
  extra?: { x: number; y: number; rx: number; ry: number },
): string {
  const xs = points.map((p) => p.x).concat(extra ? [extra.x] : []);
  const ys = points.map((p) => p.y).concat(extra ? [extra.y] : []);
  const xScale = niceScale(xs);
  const yScale = niceScale(ys);
  const parts: string[] = [];
  for (const p of points) {
    const cx = sx(p.x, xScale);
    const cy = sy(p.y, yScale);
    if (p.kind === "suggested" && p.ellipse) {
      const rx = Math.max((p.ellipse.rx / (xScale.hi - xScale.lo)) * (WIDTH - 2 * PAD), 2);
      const ry = Math.max((p.ellipse.ry / (yScale.hi - yScale.lo)) * (HEIGHT - 2 * PAD), 2);
      parts.push(
        `<ellipse data-id="${p.id}" cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}"` +
          ` rx="${rx.toFixed(1)}" ry="${ry.toFixed(1)}" class="prediction-ellipse"/>`,
      );
      parts.push(
        `<circle data-id="${p.id}" cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="4"` +
          ` class="point suggested${p.selected ? " selected" : ""}"/>`,
      );
    } else {
      const cls = `point evaluated${p.onFront ? " front" : ""}${p.selected ? " selected" : ""}`;
      parts.push(
        `<circle data-id="${p.id}" cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}"` +
          ` r="${p.onFront ? 5 : 3.5}" class="${cls}"/>`,
      );
    }
  }
  if (extra) {
    const cx = sx(extra.x, xScale);
    const cy = sy(extra.y, yScale);
    const rx = Math.max((extra.rx / (xScale.hi - xScale.lo)) * (WIDTH - 2 * PAD), 2);
    const ry = Math.max((extra.ry / (yScale.hi - yScale.lo)) * (HEIGHT - 2 * PAD), 2);
    parts.push(
      `<ellipse cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" rx="${rx.toFixed(1)}"` +
        ` ry="${ry.toFixed(1)}" class="whatif-ellipse"/>`,
      `<circle cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="5" class="point whatif"/>`,
    );
  }
  return (
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="performance space">` +
    frame(xLabel, yLabel) +
    parts.join("") +
    `</svg>`
  );
}

/** Design-space parallel coordinates: one axis per variable, all m shown. */
export function renderParallel(lines: ParallelLine[], axes: string[]): string {
  const n = axes.length;
  const axisX = (i: number) =>
    n > 1 ? PAD + (i * (WIDTH - 2 * PAD)) / (n - 1) : WIDTH / 2;
  const parts: string[] = [];
  axes.forEach((name, i) => {
    parts.push(
      `<line x1="${axisX(i)}" y1="${PAD}" x2="${axisX(i)}" y2="${HEIGHT - PAD}" class="axis"/>`,
      `<text x="${axisX(i)}" y="${HEIGHT - PAD + 16}" text-anchor="middle"` +
        ` class="axis-label">${esc(name)}</text>`,
    );
  });
  for (const line of lines) {
    const coords = line.positions
      .map((p, i) => `${axisX(i).toFixed(1)},${(HEIGHT - PAD - p * (HEIGHT - 2 * PAD)).toFixed(1)}`)
      .join(" ");
    parts.push(
      `<polyline data-id="${line.id}" points="${coords}" fill="none"` +
        ` class="parallel-line${line.onFront ? " front" : ""}"/>`,
    );
  }
  return (
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="design space">` +
    parts.join("") +
    `</svg>`
  );
}

/** Hypervolume vs evaluations progress line. */
export function renderHypervolume(trajectory: [number, number][]): string {
  if (trajectory.length === 0) {
    return (
      `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}">` +
      frame("iteration", "hypervolume") +
      `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" text-anchor="middle" class="empty">` +
      `no evaluated records yet</text></svg>`
    );
  }
  const xScale = niceScale(trajectory.map(([k]) => k));
  const yScale = niceScale(trajectory.map(([, hv]) => hv));
  const coords = trajectory
    .map(([k, hv]) => `${sx(k, xScale).toFixed(1)},${sy(hv, yScale).toFixed(1)}`)
    .join(" ");
  const markers = trajectory
    .map(
      ([k, hv]) =>
        `<circle cx="${sx(k, xScale).toFixed(1)}" cy="${sy(hv, yScale).toFixed(1)}"` +
        ` r="3" class="hv-marker"/>`,
    )
    .join("");
  return (
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="hypervolume">` +
    frame("iteration", "hypervolume") +
    `<polyline points="${coords}" fill="none" class="hv-line"/>` +
    markers +
    `</svg>`
  );
}

/** All charts for a view model, keyed by pane. */
export function renderCharts(vm: ViewModel): Record<string, string> {
  const xName = vm.objectiveNames[vm.selections.objectiveX] ?? "f1";
  const yName = vm.objectiveNames[vm.selections.objectiveY] ?? "f2";
  return {
    scatter: renderScatter(vm.scatter, xName, yName),
    parallel: renderParallel(
      vm.parallel,
      vm.variableNames.concat(vm.objectiveNames),
    ),
    hypervolume: renderHypervolume(vm.hypervolume),
  };
}
