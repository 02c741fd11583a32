/** Patient-centric search: edit a summary (or pick a stored patient),
 * fetch ranked spaces once, then steer the checker threshold live.
 *
 * The slider never re-queries. The service already returned every
 * retrieved candidate (show_filtered), so moving the threshold only
 * re-labels rows as passed or below-threshold, in place and in the
 * exact order the service ranked them.
 */

import { ApiError, MatchClient, SearchGate } from "../api";
import { clear, el, find } from "../dom";
import { maxCheckerProb, passedCount, passesThreshold } from "../filtering";
import { PatientMatchRequest, UiMatchRow } from "../types";

const DEFAULT_K = 10;
const DEFAULT_THRESHOLD = 0.5;

export interface PatientViewHandle {
  root: HTMLElement;
  /** Resolves when the most recently started search has settled. */
  settled(): Promise<void>;
}

function scoreText(row: UiMatchRow): string {
  const cosine = `cosine ${row.cosine.toFixed(3)}`;
  if (row.checker_prob === null) return cosine;
  return `${cosine} · checker ${row.checker_prob.toFixed(3)}`;
}

function buildRow(row: UiMatchRow): HTMLLIElement {
  const item = el("li", { class: "row", "data-space-id": row.space_id }, [
    el("span", { class: "rank", text: `#${row.rank}` }),
    el("span", { class: "ids", text: `${row.nct_id} · ${row.space_id}` }),
    el("span", { class: "scores", text: scoreText(row) }),
    el("span", { class: "badge pass-state" }),
    el("details", {}, [
      el("summary", { text: "criteria" }),
      el("pre", { class: "criteria", text: row.raw_text }),
    ]),
  ]);
  return item;
}

export function mountPatientView(root: HTMLElement,
                                 client: MatchClient): PatientViewHandle {
  root.classList.add("patient-view");

  const form = el("form", { class: "controls" }, [
    el("label", { text: "Query mode " }, [
      el("select", { "data-role": "mode" }, [
        el("option", { value: "text", text: "Free-text summary" }),
        el("option", { value: "id", text: "Stored patient" }),
      ]),
    ]),
    el("textarea", {
      "data-role": "summary",
      rows: "5",
      placeholder: "Patient summary, e.g. diagnosis, stage, prior treatment",
    }),
    el("input", {
      "data-role": "patient-id",
      placeholder: "patient id, e.g. synth_00012",
      hidden: "",
    }),
    el("label", { text: "Candidates " }, [
      el("input", {
        "data-role": "k", type: "number", min: "1",
        value: String(DEFAULT_K),
      }),
    ]),
    el("button", { "data-role": "search", type: "submit", text: "Search" }),
  ]);

  const slider = el("input", {
    "data-role": "threshold", type: "range",
    min: "0", max: "1", step: "0.01", value: String(DEFAULT_THRESHOLD),
  });
  const thresholdBar = el("div", { class: "threshold-bar" }, [
    el("label", { text: "Checker threshold " }, [slider]),
    el("output", { "data-role": "threshold-value" }),
    el("span", { "data-role": "pass-count", class: "pass-count" }),
  ]);

  const status = el("div", { "data-role": "status", class: "status" });
  const emptyState = el("div", { "data-role": "empty", class: "empty-state" });
  const results = el("ol", { "data-role": "results", class: "results" });
  root.append(form, thresholdBar, status, emptyState, results);

  const gate = new SearchGate();
  let rows: UiMatchRow[] = [];
  let fetched = false;
  let lastRequest: PatientMatchRequest | null = null;
  let pending: Promise<void> = Promise.resolve();

  const modeSelect = find<HTMLSelectElement>(root, "mode");
  const summaryBox = find<HTMLTextAreaElement>(root, "summary");
  const patientIdBox = find<HTMLInputElement>(root, "patient-id");

  modeSelect.addEventListener("change", () => {
    const byId = modeSelect.value === "id";
    summaryBox.hidden = byId;
    patientIdBox.hidden = !byId;
  });

  function threshold(): number {
    return Number(slider.value);
  }

  function applyThreshold(): void {
    const t = threshold();
    find<HTMLOutputElement>(root, "threshold-value").textContent =
      t.toFixed(2);
    const items = results.querySelectorAll<HTMLLIElement>("li.row");
    items.forEach((item, i) => {
      const passes = passesThreshold(rows[i].checker_prob, t);
      item.classList.toggle("passed", passes);
      item.classList.toggle("failed", !passes);
      const badge = item.querySelector(".pass-state")!;
      badge.textContent = passes ? "passed" : "below threshold";
      badge.classList.toggle("ok", passes);
    });
    const passed = passedCount(rows, t);
    find(root, "pass-count").textContent = fetched
      ? `${passed} of ${rows.length} pass at ${t.toFixed(2)}`
      : "";
    renderEmptyState(passed, t);
  }

  function renderEmptyState(passed: number, t: number): void {
    clear(emptyState);
    if (!fetched) return;
    if (rows.length === 0) {
      emptyState.append(el("p", { text: "The service returned no candidates for this query." }));
    } else if (passed === 0) {
      const top = maxCheckerProb(rows);
      const detail = top === null
        ? "No candidate carries a checker probability."
        : `The highest checker probability in this result set is ${top.toFixed(3)}.`;
      emptyState.append(el("p", {
        text: `No candidates pass at threshold ${t.toFixed(2)}. ${detail} ` +
              "Lower the slider to include candidates again; rows below " +
              "the threshold stay listed in rank order, dimmed.",
      }));
    }
  }

  function showError(message: string): void {
    clear(status);
    status.append(
      el("span", { class: "error-text", text: message }),
      el("button", { "data-role": "retry", type: "button", text: "Retry" }),
    );
    find(root, "retry").addEventListener("click", () => {
      if (lastRequest !== null) pending = runSearch(lastRequest);
    });
  }

  function renderRows(): void {
    clear(results);
    for (const row of rows) {
      results.append(buildRow(row));
    }
    applyThreshold();
  }

  async function runSearch(request: PatientMatchRequest): Promise<void> {
    lastRequest = request;
    const { ticket, signal } = gate.begin();
    clear(status);
    try {
      const response = await client.matchPatient(request, signal);
      if (!gate.isCurrent(ticket)) return;
      rows = response.candidates;
      fetched = true;
      renderRows();
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      if (!gate.isCurrent(ticket)) return;
      const message = err instanceof ApiError
        ? `Service error (${err.status}): ${err.message}`
        : `Request failed: ${(err as Error).message}`;
      showError(message);
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const k = Number(find<HTMLInputElement>(root, "k").value) || DEFAULT_K;
    const request: PatientMatchRequest = modeSelect.value === "id"
      ? { patient_id: patientIdBox.value.trim(), k }
      : { summary_text: summaryBox.value, k };
    pending = runSearch(request);
  });

  slider.addEventListener("input", applyThreshold);
  applyThreshold();

  return { root, settled: () => pending };
}
