/** Browser shell: connect form, experiment picker, polling views.
 *
 * All state shown anywhere comes from the last poll; the only local
 * state is the session (server/token), user selections, and wizard
 * drafts that have not been submitted yet.
 */

import { ApiClient, makeSession, UiSession, ApiRequestError } from "./api.js";
import { renderCharts, renderScatter } from "./charts.js";
import { UiController } from "./controller.js";
import { ViewModel } from "./model.js";
import { validateResultEntry } from "./validate.js";
import {
  applyServerError,
  back,
  newWizard,
  next,
  readyToSubmit,
  submissionPayload,
  WizardState,
  WIZARD_STEPS,
} from "./wizard.js";
import type { ConstraintDoc, Design, PredictResponse, VariableDoc } from "./types.js";

let session: UiSession | null = null;
let api: ApiClient | null = null;
let controller: UiController | null = null;
let pollTimer: number | null = null;
let wizard: WizardState | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

// ---------------------------------------------------------------------------
// connect + experiment list

function mountConnect(): void {
  el<HTMLFormElement>("connect-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    const url = el<HTMLInputElement>("server-url").value || window.location.origin;
    const token = el<HTMLInputElement>("token").value;
    const interval = Number(el<HTMLInputElement>("poll-interval").value || "2");
    session = makeSession(url, token, interval * 1000);
    api = new ApiClient(session);
    try {
      await refreshExperimentList();
      el("connect-error").textContent = "";
      el("picker").hidden = false;
    } catch (error) {
      el("connect-error").textContent = describe(error);
    }
  });
  el("new-experiment").addEventListener("click", () => {
    wizard = newWizard();
    renderWizard();
    el<HTMLDialogElement>("wizard-dialog").showModal();
  });
}

async function refreshExperimentList(): Promise<void> {
  if (!api) return;
  const { experiments } = await api.listExperiments();
  const list = el("experiment-list");
  list.innerHTML = "";
  for (const id of experiments) {
    const button = document.createElement("button");
    button.textContent = id;
    button.addEventListener("click", () => openExperiment(id));
    list.appendChild(button);
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiRequestError) return `${error.code}: ${error.message}`;
  return String(error);
}

// ---------------------------------------------------------------------------
// main experiment view

async function openExperiment(id: string): Promise<void> {
  if (!api || !session) return;
  session.activeExperiment = id;
  controller = new UiController(api, id);
  el("main").hidden = false;
  el("experiment-title").textContent = id;
  if (pollTimer !== null) window.clearInterval(pollTimer);
  await pollOnce();
  pollTimer = window.setInterval(pollOnce, session.pollIntervalMs);
}

async function pollOnce(): Promise<void> {
  if (!controller) return;
  try {
    render(await controller.poll());
    el("poll-error").textContent = "";
  } catch (error) {
    el("poll-error").textContent = describe(error);
  }
}

function render(vm: ViewModel): void {
  const banner = el("banner");
  banner.textContent = vm.banner.text;
  banner.className = vm.banner.running ? "banner running" : "banner idle";

  el("counts").textContent = Object.entries(vm.counts)
    .map(([status, count]) => `${status}: ${count}`)
    .join("  |  ");

  const charts = renderCharts(vm);
  el("scatter-pane").innerHTML = charts.scatter;
  el("parallel-pane").innerHTML = charts.parallel;
  el("hv-pane").innerHTML = charts.hypervolume;

  renderObjectivePickers(vm);
  renderTable(vm);
  renderSuggestions(vm);
  renderWhatIfControls(vm);
}

function renderObjectivePickers(vm: ViewModel): void {
  for (const [axis, key] of [["x", "objectiveX"], ["y", "objectiveY"]] as const) {
    const select = el<HTMLSelectElement>(`objective-${axis}`);
    if (select.options.length !== vm.objectiveNames.length) {
      select.innerHTML = vm.objectiveNames
        .map((name, i) => `<option value="${i}">${esc(name)}</option>`)
        .join("");
    }
    select.value = String(vm.selections[key]);
  }
}

function renderTable(vm: ViewModel): void {
  const header =
    "<tr><th>id</th><th>status</th><th>source</th><th>iter</th>" +
    vm.variableNames.map((n) => `<th>${esc(n)}</th>`).join("") +
    vm.objectiveNames.map((n) => `<th>${esc(n)}</th>`).join("") +
    "<th>worker</th><th>note</th></tr>";
  const rows = vm.table
    .map(
      (row) =>
        `<tr data-id="${row.id}" class="${row.status}${row.selected ? " selected" : ""}">` +
        `<td>${row.id}</td><td>${row.status}</td><td>${row.source}</td>` +
        `<td>${row.iteration}</td>` +
        row.designCells.map((c) => `<td>${esc(c)}</td>`).join("") +
        row.objectiveCells.map((c) => `<td>${esc(c)}</td>`).join("") +
        `<td>${esc(row.worker)}</td><td>${esc(row.note)}</td></tr>`,
    )
    .join("");
  const table = el("records-table");
  table.innerHTML = header + rows;
  table.querySelectorAll("tr[data-id]").forEach((tr) => {
    tr.addEventListener("click", () => {
      if (!controller) return;
      const id = Number((tr as HTMLElement).dataset.id);
      render(
        controller.selectRecord(
          controller.selections.selectedRecordId === id ? null : id,
        ),
      );
    });
  });
}

function renderSuggestions(vm: ViewModel): void {
  const pane = el("suggestions");
  if (vm.suggestions.length === 0) {
    pane.innerHTML = "<p class='empty'>no pending suggestions</p>";
    return;
  }
  pane.innerHTML = vm.suggestions
    .map((s) => {
      const design = s.designCells
        .map((cell, i) => `${esc(vm.variableNames[i])}=${esc(cell)}`)
        .join(", ");
      const prediction = s.predicted
        ? s.predicted
            .map((p) => `${esc(p.name)}: ${p.mean.toPrecision(5)} ± ${p.std.toPrecision(3)}`)
            .join("  ")
        : "no model yet";
      return (
        `<div class="suggestion" data-id="${s.id}">` +
        `<div><b>record ${s.id}</b> — ${design}</div>` +
        `<div class="prediction">${prediction}</div>` +
        `<form class="result-form" data-id="${s.id}">` +
        `<input name="objectives" placeholder="${vm.objectiveNames.join(",")}"/>` +
        `<button type="submit">submit result</button>` +
        `<span class="inline-error"></span>` +
        `</form></div>`
      );
    })
    .join("");
  pane.querySelectorAll<HTMLFormElement>(".result-form").forEach((form) => {
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      if (!controller) return;
      const input = form.querySelector<HTMLInputElement>("input[name=objectives]")!;
      const errorSpan = form.querySelector<HTMLElement>(".inline-error")!;
      const { values, error } = validateResultEntry(
        input.value,
        vm.objectiveNames.length,
      );
      if (error) {
        errorSpan.textContent = error;
        return;
      }
      try {
        render(await controller.submitResult(Number(form.dataset.id), values!));
      } catch (submitError) {
        errorSpan.textContent = `${describe(submitError)} — refresh and retry`;
      }
    });
  });
}

function mountControls(): void {
  el("start-run").addEventListener("click", async () => {
    if (!controller) return;
    const evaluator = el<HTMLInputElement>("evaluator-path").value.trim() || null;
    try {
      render(await controller.startRun(evaluator));
    } catch (error) {
      el("poll-error").textContent = describe(error);
    }
  });
  el("stop-run").addEventListener("click", async () => {
    if (!controller) return;
    render(await controller.stopRun());
  });
  el("claim-next").addEventListener("click", async () => {
    if (!controller || !session) return;
    render(await controller.claim(`ui-${session.token.length}`));
  });
  for (const axis of ["x", "y"] as const) {
    el<HTMLSelectElement>(`objective-${axis}`).addEventListener("change", () => {
      if (!controller) return;
      const x = Number(el<HTMLSelectElement>("objective-x").value);
      const y = Number(el<HTMLSelectElement>("objective-y").value);
      render(controller.selectObjectivePair(x, y));
    });
  }
}

// ---------------------------------------------------------------------------
// what-if panel

function renderWhatIfControls(vm: ViewModel): void {
  const pane = el("whatif-controls");
  if (pane.childElementCount > 0) return; // build once per experiment
  if (!controller) return;
  const variables = currentVariables();
  pane.innerHTML = variables
    .map((v) => {
      if (v.kind === "binary") {
        return `<label>${esc(v.name)} <input type="checkbox" data-var="${esc(v.name)}"/></label>`;
      }
      if (v.kind === "categorical") {
        const options = (v.categories ?? [])
          .map((c) => `<option>${esc(c)}</option>`)
          .join("");
        return `<label>${esc(v.name)} <select data-var="${esc(v.name)}">${options}</select></label>`;
      }
      const [lo, hi] = v.bounds ?? [0, 1];
      const step = v.kind === "discrete" ? 1 : (hi - lo) / 100;
      return (
        `<label>${esc(v.name)} <input type="range" data-var="${esc(v.name)}"` +
        ` min="${lo}" max="${hi}" step="${step}" value="${(lo + hi) / 2}"/>` +
        `<span class="value"></span></label>`
      );
    })
    .join("");
  pane.querySelectorAll("input,select").forEach((node) => {
    node.addEventListener(node instanceof HTMLSelectElement ? "change" : "input", () =>
      refreshWhatIf(),
    );
  });
  void refreshWhatIf();
}

function currentVariables(): VariableDoc[] {
  // variables never change after creation; read them off the last poll
  return controller ? controller.view().problem.variables : [];
}

let lastPredictToken = 0;

async function refreshWhatIf(): Promise<void> {
  if (!api || !session?.activeExperiment || !controller) return;
  const design: Design = {};
  el("whatif-controls")
    .querySelectorAll<HTMLElement>("[data-var]")
    .forEach((node) => {
      const name = node.dataset.var!;
      if (node instanceof HTMLInputElement && node.type === "checkbox") {
        design[name] = node.checked;
      } else if (node instanceof HTMLSelectElement) {
        design[name] = node.value;
      } else if (node instanceof HTMLInputElement) {
        design[name] = Number(node.value);
        const label = node.parentElement?.querySelector(".value");
        if (label) label.textContent = node.value;
      }
    });
  const token = ++lastPredictToken;
  try {
    const response: PredictResponse = await api.predict(
      session.activeExperiment,
      design,
    );
    if (token !== lastPredictToken) return; // superseded by a newer edit
    const vm = controller.view();
    el("whatif-readout").innerHTML = response.predicted
      .map(
        (p) =>
          `<span class="pred">${esc(p.objective)}: ${p.mean.toPrecision(5)}` +
          ` ± ${p.std.toPrecision(3)}</span>`,
      )
      .join(" ");
    const xi = vm.selections.objectiveX;
    const yi = vm.selections.objectiveY;
    el("whatif-scatter").innerHTML = renderScatter(
      vm.scatter,
      vm.objectiveNames[xi],
      vm.objectiveNames[yi],
      {
        x: response.predicted[xi].mean,
        y: response.predicted[yi].mean,
        rx: response.predicted[xi].std,
        ry: response.predicted[yi].std,
      },
    );
    el("whatif-error").textContent = "";
  } catch (error) {
    if (token === lastPredictToken) el("whatif-error").textContent = describe(error);
  }
}

// ---------------------------------------------------------------------------
// wizard dialog

function renderWizard(): void {
  if (!wizard) return;
  const pane = el("wizard-body");
  const state = wizard;
  const stepIndex = WIZARD_STEPS.indexOf(state.step);
  const nav = WIZARD_STEPS.map(
    (step, i) =>
      `<span class="${i === stepIndex ? "current" : i < stepIndex ? "done" : ""}">` +
      `${i + 1}. ${step}</span>`,
  ).join("");
  const errors = state.errors
    .map((e) => `<li><b>${esc(e.field)}</b>: ${esc(e.message)}</li>`)
    .join("");
  pane.innerHTML =
    `<nav class="steps">${nav}</nav>` +
    `<div id="wizard-step"></div>` +
    (errors ? `<ul class="errors">${errors}</ul>` : "") +
    `<div class="wizard-buttons">` +
    `<button id="wizard-back" ${stepIndex === 0 ? "disabled" : ""}>back</button>` +
    (state.step === "review"
      ? `<button id="wizard-submit" ${readyToSubmit(state) ? "" : "disabled"}>create experiment</button>`
      : `<button id="wizard-next">next</button>`) +
    `</div>`;
  renderWizardStep(state);
  el("wizard-back").addEventListener("click", () => {
    wizard = back(state);
    renderWizard();
  });
  if (state.step === "review") {
    el("wizard-submit").addEventListener("click", () => void submitWizard());
  } else {
    el("wizard-next").addEventListener("click", () => {
      wizard = next(readWizardInputs(state));
      renderWizard();
    });
  }
}

function renderWizardStep(state: WizardState): void {
  const pane = el("wizard-step");
  if (state.step === "variables") {
    pane.innerHTML =
      `<p>One line per variable: <code>name kind [lo hi | cat1,cat2,...]</code></p>` +
      `<textarea id="wizard-variables" rows="6">${esc(
        state.variables
          .map((v) =>
            v.kind === "categorical"
              ? `${v.name} categorical ${(v.categories ?? []).join(",")}`
              : v.kind === "binary"
                ? `${v.name} binary`
                : `${v.name} ${v.kind} ${v.bounds?.[0] ?? ""} ${v.bounds?.[1] ?? ""}`,
          )
          .join("\n"),
      )}</textarea>`;
  } else if (state.step === "constraints") {
    pane.innerHTML =
      `<p>Optional linear constraints, one per line:` +
      ` <code>name coef*var + coef*var + offset &lt;= 0</code></p>` +
      `<textarea id="wizard-constraints" rows="4">${esc(
        state.constraints
          .map((c) => {
            const terms = Object.entries(c.coefficients ?? {})
              .map(([name, coef]) => `${coef}*${name}`)
              .join(" + ");
            return `${c.name} ${terms} + ${c.offset ?? 0} <= 0`;
          })
          .join("\n"),
      )}</textarea>`;
  } else if (state.step === "objectives") {
    pane.innerHTML =
      `<p>One per line: <code>name minimize|maximize</code> (at least two)</p>` +
      `<textarea id="wizard-objectives" rows="4">${esc(
        state.objectives.map((o) => `${o.name} ${o.sense ?? "minimize"}`).join("\n"),
      )}</textarea>`;
  } else if (state.step === "algorithm") {
    const rc = state.runConfig;
    pane.innerHTML = `
      <label>preset
        <select id="wizard-preset">
          ${["parego", "tsemo_style", "usemo_style", "custom"]
            .map((p) => `<option ${p === rc.preset ? "selected" : ""}>${p}</option>`)
            .join("")}
        </select></label>
      <label>evaluation mode
        <select id="wizard-mode">
          ${["sequential", "sync_batch", "async_batch"]
            .map((m) => `<option ${m === rc.eval_mode ? "selected" : ""}>${m}</option>`)
            .join("")}
        </select></label>
      <label>batch size <input id="wizard-batch" type="number" min="1" value="${rc.batch_size}"/></label>
      <label>budget <input id="wizard-budget" type="number" min="0" value="${rc.budget}"/></label>
      <label>initial samples <input id="wizard-ninit" type="number" min="2" value="${rc.n_init}"/></label>
      <label>seed <input id="wizard-seed" type="number" value="${rc.seed}"/></label>`;
  } else {
    pane.innerHTML =
      `<label>experiment name <input id="wizard-name" value="${esc(state.name)}"/></label>` +
      `<pre>${esc(JSON.stringify(submissionPayload({ ...state, name: state.name || "?" }), null, 2))}</pre>`;
  }
}

function readWizardInputs(state: WizardState): WizardState {
  const updated = { ...state };
  if (state.step === "variables") {
    updated.variables = el<HTMLTextAreaElement>("wizard-variables")
      .value.split("\n")
      .map((line) => line.trim())
      .filter(Boolean)
      .map(parseVariableLine);
  } else if (state.step === "constraints") {
    updated.constraints = el<HTMLTextAreaElement>("wizard-constraints")
      .value.split("\n")
      .map((line) => line.trim())
      .filter(Boolean)
      .map(parseConstraintLine);
  } else if (state.step === "objectives") {
    updated.objectives = el<HTMLTextAreaElement>("wizard-objectives")
      .value.split("\n")
      .map((line) => line.trim())
      .filter(Boolean)
      .map((line) => {
        const [name, sense] = line.split(/\s+/);
        return { name, sense: (sense as "minimize" | "maximize") ?? "minimize" };
      });
  } else if (state.step === "algorithm") {
    updated.runConfig = {
      ...state.runConfig,
      preset: el<HTMLSelectElement>("wizard-preset").value,
      eval_mode: el<HTMLSelectElement>("wizard-mode").value,
      batch_size: Number(el<HTMLInputElement>("wizard-batch").value),
      budget: Number(el<HTMLInputElement>("wizard-budget").value),
      n_init: Number(el<HTMLInputElement>("wizard-ninit").value),
      seed: Number(el<HTMLInputElement>("wizard-seed").value),
    };
  } else {
    updated.name = el<HTMLInputElement>("wizard-name").value;
  }
  return updated;
}

export function parseVariableLine(line: string): VariableDoc {
  const parts = line.split(/\s+/);
  const [name, kind] = parts;
  if (kind === "binary") return { name, kind };
  if (kind === "categorical") {
    return { name, kind, categories: (parts[2] ?? "").split(",").filter(Boolean) };
  }
  return {
    name,
    kind: kind as "continuous" | "discrete",
    bounds: [Number(parts[2]), Number(parts[3])],
  };
}

export function parseConstraintLine(line: string): ConstraintDoc {
  // "name 2*x + 1*y + -3 <= 0"
  const [name, ...rest] = line.replace(/<=\s*0\s*$/, "").trim().split(/\s+/);
  const coefficients: Record<string, number> = {};
  let offset = 0;
  for (const term of rest.join(" ").split("+")) {
    const t = term.trim();
    if (!t) continue;
    if (t.includes("*")) {
      const [coef, variable] = t.split("*");
      coefficients[variable.trim()] = Number(coef);
    } else {
      offset += Number(t);
    }
  }
  return { name, kind: "linear", coefficients, offset };
}

async function submitWizard(): Promise<void> {
  if (!wizard || !api) return;
  const state = readWizardInputs(wizard);
  const payload = submissionPayload(state);
  try {
    await api.createExperiment(payload.name, payload.problem, payload.run_config);
    el<HTMLDialogElement>("wizard-dialog").close();
    wizard = null;
    await refreshExperimentList();
  } catch (error) {
    if (error instanceof ApiRequestError && error.status === 422) {
      wizard = applyServerError(state, error.message);
    } else {
      wizard = { ...state, errors: [{ field: "server", message: describe(error) }] };
    }
    renderWizard();
  }
}

// ---------------------------------------------------------------------------

export function mount(): void {
  mountConnect();
  mountControls();
}

if (typeof document !== "undefined" && document.getElementById("connect-form")) {
  mount();
}
