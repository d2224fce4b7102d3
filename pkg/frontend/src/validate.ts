/** Client-side validation mirroring the server's problem checks.
 *
 * The wizard blocks submission on these; the server remains the final
 * authority and its 422 details render inline if anything slips through.
 */

import type { ProblemDoc, RunConfigDoc, VariableDoc } from "./types.js";

export interface Violation {
  field: string;
  message: string;
}

const KINDS = ["continuous", "discrete", "binary", "categorical"];
const IDENTIFIER = /^[A-Za-z_][A-Za-z0-9_]*$/;

function checkVariable(v: VariableDoc, out: Violation[]): void {
  const field = `variables.${v.name || "?"}`;
  if (!v.name || !IDENTIFIER.test(v.name)) {
    out.push({ field, message: "name must be an identifier" });
  }
  if (!KINDS.includes(v.kind)) {
    out.push({ field, message: `unknown kind ${v.kind}` });
    return;
  }
  if (v.kind === "continuous" || v.kind === "discrete") {
    if (!v.bounds || v.bounds.length !== 2) {
      out.push({ field, message: "bounds required" });
    } else {
      const [lo, hi] = v.bounds;
      if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
        out.push({ field, message: "bounds not finite" });
      } else if (!(lo < hi)) {
        out.push({ field, message: "bounds reversed (lo >= hi)" });
      } else if (
        v.kind === "discrete" &&
        (!Number.isInteger(lo) || !Number.isInteger(hi))
      ) {
        out.push({ field, message: "discrete bounds must be integers" });
      }
    }
    if (v.categories) out.push({ field, message: "categories not allowed" });
  } else if (v.kind === "binary") {
    if (v.bounds || v.categories) {
      out.push({ field, message: "binary takes no bounds/categories" });
    }
  } else {
    if (v.bounds) out.push({ field, message: "bounds not allowed" });
    if (!v.categories || v.categories.length === 0) {
      out.push({ field, message: "categories must be non-empty" });
    } else if (new Set(v.categories).size !== v.categories.length) {
      out.push({ field, message: "categories must be unique" });
    }
  }
}

export function validateProblem(doc: ProblemDoc): Violation[] {
  const out: Violation[] = [];
  if (!doc.variables || doc.variables.length === 0) {
    out.push({ field: "variables", message: "at least one design variable required" });
  }
  const seen = new Set<string>();
  for (const v of doc.variables ?? []) {
    if (seen.has(v.name)) {
      out.push({ field: `variables.${v.name}`, message: "duplicate name" });
    }
    seen.add(v.name);
    checkVariable(v, out);
  }
  const objectives = doc.objectives ?? [];
  if (objectives.length < 2) {
    out.push({ field: "objectives", message: "fewer than 2 objectives" });
  }
  const objNames = new Set<string>();
  for (const o of objectives) {
    if (!o.name || !IDENTIFIER.test(o.name)) {
      out.push({ field: `objectives.${o.name || "?"}`, message: "name must be an identifier" });
    }
    if (objNames.has(o.name)) {
      out.push({ field: `objectives.${o.name}`, message: "duplicate name" });
    }
    objNames.add(o.name);
    if (seen.has(o.name)) {
      out.push({ field: `objectives.${o.name}`, message: "name collides with a variable" });
    }
    if (o.sense && o.sense !== "minimize" && o.sense !== "maximize") {
      out.push({ field: `objectives.${o.name}`, message: `unknown sense ${o.sense}` });
    }
  }
  for (const c of doc.constraints ?? []) {
    const field = `constraints.${c.name || "?"}`;
    if (c.kind === "linear") {
      const coeffs = c.coefficients;
      if (!coeffs || (Array.isArray(coeffs) ? coeffs.length === 0 : Object.keys(coeffs).length === 0)) {
        out.push({ field, message: "linear constraint needs coefficients" });
      }
      if (!Array.isArray(coeffs) && coeffs) {
        for (const name of Object.keys(coeffs)) {
          const variable = (doc.variables ?? []).find((v) => v.name === name);
          if (!variable) {
            out.push({ field, message: `unknown variable ${name}` });
          } else if (variable.kind === "categorical") {
            out.push({ field, message: `categorical variable ${name} not allowed` });
          }
        }
      }
    } else if (c.kind === "blackbox") {
      if (!c.program) out.push({ field, message: "blackbox constraint needs a program" });
    } else {
      out.push({ field, message: `unknown form ${c.kind}` });
    }
  }
  return out;
}

export function validateRunConfig(doc: RunConfigDoc): Violation[] {
  const out: Violation[] = [];
  const batch = doc.batch_size ?? 1;
  const mode = doc.eval_mode ?? "sequential";
  if (!["sequential", "sync_batch", "async_batch"].includes(String(mode))) {
    out.push({ field: "eval_mode", message: `unknown eval_mode ${mode}` });
  }
  if (!(Number(batch) >= 1)) {
    out.push({ field: "batch_size", message: "batch_size must be >= 1" });
  }
  if (mode === "sequential" && Number(batch) !== 1) {
    out.push({ field: "batch_size", message: "sequential mode requires batch_size = 1" });
  }
  if (doc.n_init !== undefined && !(Number(doc.n_init) >= 2)) {
    out.push({ field: "n_init", message: "n_init must be >= 2" });
  }
  if (doc.budget !== undefined && !(Number(doc.budget) >= 0)) {
    out.push({ field: "budget", message: "budget must be non-negative" });
  }
  if (
    doc.preset !== undefined &&
    !["parego", "tsemo_style", "usemo_style", "custom"].includes(String(doc.preset))
  ) {
    out.push({ field: "preset", message: `unknown preset ${doc.preset}` });
  }
  return out;
}

/** Result-entry check mirroring the server's 422 arity/finiteness rules. */
export function validateResultEntry(
  raw: string,
  objectiveCount: number,
): { values: number[] | null; error: string | null } {
  const parts = raw.split(",").map((s) => s.trim()).filter((s) => s !== "");
  if (parts.length !== objectiveCount) {
    return {
      values: null,
      error: `expected ${objectiveCount} objective values, got ${parts.length}`,
    };
  }
  const values = parts.map(Number);
  if (values.some((v) => !Number.isFinite(v))) {
    return { values: null, error: "objective values must be finite numbers" };
  }
  return { values, error: null };
}
