/** Problem-configuration wizard: variables -> constraints -> objectives ->
 * algorithm -> review. Each step gates on the client-side validation
 * mirror; server 422 details land back on the step they belong to.
 */

import { validateProblem, validateRunConfig, Violation } from "./validate.js";
import type {
  ConstraintDoc,
  ObjectiveDoc,
  ProblemDoc,
  RunConfigDoc,
  VariableDoc,
} from "./types.js";

export const WIZARD_STEPS = [
  "variables",
  "constraints",
  "objectives",
  "algorithm",
  "review",
] as const;

export type WizardStep = (typeof WIZARD_STEPS)[number];

export interface WizardState {
  step: WizardStep;
  name: string;
  variables: VariableDoc[];
  constraints: ConstraintDoc[];
  objectives: ObjectiveDoc[];
  runConfig: RunConfigDoc;
  errors: Violation[];
}

export function newWizard(): WizardState {
  return {
    step: "variables",
    name: "",
    variables: [],
    constraints: [],
    objectives: [],
    runConfig: {
      preset: "parego",
      batch_size: 1,
      eval_mode: "sequential",
      budget: 40,
      n_init: 10,
      seed: 0,
    },
    errors: [],
  };
}

export function problemDoc(state: WizardState): ProblemDoc {
  return {
    variables: state.variables,
    constraints: state.constraints.length ? state.constraints : undefined,
    objectives: state.objectives,
  };
}

/** Violations relevant to one step (review sees everything). */
export function stepViolations(state: WizardState, step: WizardStep): Violation[] {
  const all = validateProblem(problemDoc(state)).concat(
    validateRunConfig(state.runConfig),
  );
  const prefix: Record<WizardStep, string[]> = {
    variables: ["variables"],
    constraints: ["constraints"],
    objectives: ["objectives"],
    algorithm: ["preset", "batch_size", "eval_mode", "budget", "n_init"],
    review: [],
  };
  if (step === "review") {
    return state.name.trim() === ""
      ? all.concat([{ field: "name", message: "experiment name required" }])
      : all;
  }
  return all.filter((v) => prefix[step].some((p) => v.field.startsWith(p)));
}

export function canAdvance(state: WizardState): boolean {
  return stepViolations(state, state.step).length === 0;
}

export function next(state: WizardState): WizardState {
  const errors = stepViolations(state, state.step);
  if (errors.length > 0) return { ...state, errors };
  const index = WIZARD_STEPS.indexOf(state.step);
  if (index === WIZARD_STEPS.length - 1) return state;
  return { ...state, step: WIZARD_STEPS[index + 1], errors: [] };
}

export function back(state: WizardState): WizardState {
  const index = WIZARD_STEPS.indexOf(state.step);
  if (index === 0) return state;
  return { ...state, step: WIZARD_STEPS[index - 1], errors: [] };
}

export function readyToSubmit(state: WizardState): boolean {
  return state.step === "review" && stepViolations(state, "review").length === 0;
}

export function submissionPayload(state: WizardState): {
  name: string;
  problem: ProblemDoc;
  run_config: RunConfigDoc;
} {
  return {
    name: state.name.trim(),
    problem: problemDoc(state),
    run_config: state.runConfig,
  };
}

/** Attach a server-side 422 so it renders inline on the closest step. */
export function applyServerError(state: WizardState, detail: string): WizardState {
  const step: WizardStep = detail.includes("objectives")
    ? "objectives"
    : detail.includes("constraint")
      ? "constraints"
      : detail.includes("variable") || detail.includes("bounds")
        ? "variables"
        : "review";
  return { ...state, step, errors: [{ field: "server", message: detail }] };
}
