/** View-model construction: pure functions of the latest API responses.
 *
 * The UI keeps no authoritative state — rebuilding the view model from a
 * fresh status/suggestions poll reproduces the exact same data, which is
 * what makes reloads lossless. User selections (objective pair, selected
 * record) live in a separate ephemeral structure so re-rendering on each
 * poll never discards them.
 */

import { nonDominatedIds } from "./pareto.js";
import type {
  DesignValue,
  ProblemDoc,
  StatusResponse,
  SuggestionsResponse,
  VariableDoc,
} from "./types.js";

export interface Selections {
  objectiveX: number;
  objectiveY: number;
  selectedRecordId: number | null;
}

export function defaultSelections(): Selections {
  return { objectiveX: 0, objectiveY: 1, selectedRecordId: null };
}

export interface TableRow {
  id: number;
  status: string;
  source: string;
  iteration: number;
  designCells: string[];
  objectiveCells: string[];
  worker: string;
  note: string;
  selected: boolean;
}

export interface ScatterPoint {
  id: number;
  x: number;
  y: number;
  kind: "evaluated" | "suggested";
  onFront: boolean;
  selected: boolean;
  /** +-1 std prediction ellipse, axis-aligned (independent per-objective GPs) */
  ellipse: { rx: number; ry: number } | null;
}

export interface ParallelLine {
  id: number;
  status: string;
  /** one [0,1] coordinate per axis: every variable, then every objective */
  positions: number[];
  onFront: boolean;
}

export interface SuggestionRow {
  id: number;
  designCells: string[];
  predicted: { name: string; mean: number; std: number }[] | null;
}

export interface BannerModel {
  text: string;
  running: boolean;
}

export interface ViewModel {
  experiment: string;
  problem: ProblemDoc;
  variableNames: string[];
  objectiveNames: string[];
  counts: Record<string, number>;
  table: TableRow[];
  frontIds: number[];
  scatter: ScatterPoint[];
  parallel: ParallelLine[];
  hypervolume: [number, number][];
  suggestions: SuggestionRow[];
  banner: BannerModel;
  selections: Selections;
}

export function formatValue(value: DesignValue): string {
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") {
    return Number.isInteger(value) ? String(value) : value.toPrecision(6);
  }
  return String(value);
}

/** Map one design value onto a [0,1] axis position. */
export function axisPosition(variable: VariableDoc, value: DesignValue): number {
  if (variable.kind === "binary") return value ? 1 : 0;
  if (variable.kind === "categorical") {
    const cats = variable.categories ?? [];
    const idx = cats.indexOf(String(value));
    return cats.length > 1 ? Math.max(idx, 0) / (cats.length - 1) : 0.5;
  }
  const [lo, hi] = variable.bounds ?? [0, 1];
  return hi > lo ? (Number(value) - lo) / (hi - lo) : 0.5;
}

export function bannerFor(status: StatusResponse): BannerModel {
  const s = status.scheduler;
  if (!s.running) return { text: "scheduler idle", running: false };
  const inFlight = s.in_flight?.length ?? 0;
  if (s.draining) {
    return { text: `stopping: draining ${inFlight} in-flight`, running: true };
  }
  return {
    text:
      `running ${s.mode ?? "?"} | ${inFlight} in flight | ` +
      `budget remaining ${s.budget_remaining ?? "?"}`,
    running: true,
  };
}

export function buildViewModel(
  status: StatusResponse,
  suggestions: SuggestionsResponse,
  selections: Selections = defaultSelections(),
): ViewModel {
  const variables = status.problem.variables;
  const objectives = status.problem.objectives;
  const frontIds = nonDominatedIds(status.records, objectives);
  const frontSet = new Set(frontIds);
  const xi = Math.min(selections.objectiveX, objectives.length - 1);
  const yi = Math.min(selections.objectiveY, objectives.length - 1);

  const table: TableRow[] = status.records.map((r) => ({
    id: r.id,
    status: r.status,
    source: r.source,
    iteration: r.iteration,
    designCells: variables.map((v) => formatValue(r.design[v.name])),
    objectiveCells: objectives.map((_, j) =>
      r.objectives ? formatValue(r.objectives[j]) : "",
    ),
    worker: r.worker ?? "",
    note: r.note,
    selected: r.id === selections.selectedRecordId,
  }));

  const scatter: ScatterPoint[] = [];
  for (const r of status.records) {
    if (r.status !== "evaluated" || !r.objectives) continue;
    scatter.push({
      id: r.id,
      x: r.objectives[xi],
      y: r.objectives[yi],
      kind: "evaluated",
      onFront: frontSet.has(r.id),
      selected: r.id === selections.selectedRecordId,
      ellipse: null,
    });
  }
  for (const s of suggestions.suggestions) {
    if (!s.predicted) continue;
    scatter.push({
      id: s.record.id,
      x: s.predicted[xi].mean,
      y: s.predicted[yi].mean,
      kind: "suggested",
      onFront: false,
      selected: s.record.id === selections.selectedRecordId,
      ellipse: { rx: s.predicted[xi].std, ry: s.predicted[yi].std },
    });
  }

  // objective axes are normalized over the observed range so the
  // parallel-coordinates view covers all m objectives, not just the pair
  // shown in the scatter
  const evaluated = status.records.filter(
    (r) => r.status === "evaluated" && r.objectives,
  );
  const objectiveRanges = objectives.map((_, j) => {
    const values = evaluated.map((r) => (r.objectives as number[])[j]);
    return { lo: Math.min(...values), hi: Math.max(...values) };
  });
  const objectivePosition = (value: number, j: number) => {
    const { lo, hi } = objectiveRanges[j];
    return hi > lo ? (value - lo) / (hi - lo) : 0.5;
  };
  const parallel: ParallelLine[] = evaluated.map((r) => ({
    id: r.id,
    status: r.status,
    positions: variables
      .map((v) => axisPosition(v, r.design[v.name]))
      .concat((r.objectives as number[]).map(objectivePosition)),
    onFront: frontSet.has(r.id),
  }));

  const suggestionRows: SuggestionRow[] = suggestions.suggestions.map((s) => ({
    id: s.record.id,
    designCells: variables.map((v) => formatValue(s.record.design[v.name])),
    predicted: s.predicted
      ? s.predicted.map((p, j) => ({
          name: objectives[j].name,
          mean: p.mean,
          std: p.std,
        }))
      : null,
  }));

  return {
    experiment: status.experiment,
    problem: status.problem,
    variableNames: variables.map((v) => v.name),
    objectiveNames: objectives.map((o) => o.name),
    counts: status.counts,
    table,
    frontIds,
    scatter,
    parallel,
    hypervolume: status.hypervolume_trajectory,
    suggestions: suggestionRows,
    banner: bannerFor(status),
    selections,
  };
}

/** The data half of a view model: everything except ephemeral selections.
 * Two polls of the same server state must produce identical data. */
export function viewData(vm: ViewModel): Omit<ViewModel, "selections" | "table" | "scatter"> & {
  table: Omit<TableRow, "selected">[];
  scatter: Omit<ScatterPoint, "selected">[];
} {
  const { selections: _selections, table, scatter, ...rest } = vm;
  return {
    ...rest,
    table: table.map(({ selected: _s, ...row }) => row),
    scatter: scatter.map(({ selected: _s, ...point }) => point),
  };
}
