/** Client-side dominance mirror used to highlight the Pareto front.
 *
 * The server's statistics are authoritative; this mirror exists so the
 * scatter can highlight without an extra round trip, and the test suite
 * cross-checks it against the server's front on real API fixtures.
 */

import type { ObjectiveDoc, RecordJson } from "./types.js";

/** a dominates b under minimization: no worse everywhere, better once. */
export function dominates(a: number[], b: number[]): boolean {
  let strict = false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

export function senseSigns(objectives: ObjectiveDoc[]): number[] {
  return objectives.map((o) => (o.sense === "maximize" ? -1 : 1));
}

/** Ids of evaluated records whose objective vectors are non-dominated. */
export function nonDominatedIds(
  records: RecordJson[],
  objectives: ObjectiveDoc[],
): number[] {
  const signs = senseSigns(objectives);
  const evaluated = records.filter(
    (r) => r.status === "evaluated" && r.objectives !== null,
  );
  const minimized = evaluated.map((r) =>
    (r.objectives as number[]).map((v, i) => signs[i] * v),
  );
  const front: number[] = [];
  for (let i = 0; i < evaluated.length; i++) {
    let dominated = false;
    for (let j = 0; j < evaluated.length; j++) {
      if (i !== j && dominates(minimized[j], minimized[i])) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push(evaluated[i].id);
  }
  return front;
}
