/** Trial-centric view: pick an eligibility space, list the most relevant
 * patient summaries with split badges and anchor dates.
 *
 * Defaults to showing only the test split, matching how result tables
 * are reported; the toggle reveals the other splits. Split filtering
 * hides rows, threshold filtering dims them, and neither touches the
 * order the service ranked them in.
 */

import { ApiError, MatchClient, SearchGate } from "../api";
import { clear, el, find } from "../dom";
import { passesThreshold } from "../filtering";
import { SpaceMatchRequest, UiPatientRow } from "../types";

const DEFAULT_K = 20;
const DEFAULT_THRESHOLD = 0.5;

export interface SpaceViewHandle {
  root: HTMLElement;
  settled(): Promise<void>;
}

function scoreText(row: UiPatientRow): string {
  const cosine = `cosine ${row.cosine.toFixed(3)}`;
  if (row.checker_prob === null) return cosine;
  return `${cosine} · checker ${row.checker_prob.toFixed(3)}`;
}

function buildRow(row: UiPatientRow): HTMLLIElement {
  return el("li", {
    class: "row", "data-item-id": row.item_id, "data-split": row.split,
  }, [
    el("span", { class: "rank", text: `#${row.rank}` }),
    el("span", { class: "ids", text: row.patient_id }),
    el("span", { class: `badge split split-${row.split}`, text: row.split }),
    el("span", { class: "anchor-date", text: row.anchor_date }),
    el("span", { class: "scores", text: scoreText(row) }),
    el("span", { class: "badge pass-state" }),
    el("details", {}, [
      el("summary", { text: "summary text" }),
      el("pre", { class: "summary-text", text: row.text }),
    ]),
  ]);
}

export function mountSpaceView(root: HTMLElement,
                               client: MatchClient): SpaceViewHandle {
  root.classList.add("space-view");

  const form = el("form", { class: "controls" }, [
    el("label", { text: "Trial space " }, [
      el("input", {
        "data-role": "space-id",
        placeholder: "space id, e.g. NCT91000017#1",
      }),
    ]),
    el("label", { text: "Candidates " }, [
      el("input", {
        "data-role": "k", type: "number", min: "1",
        value: String(DEFAULT_K),
      }),
    ]),
    el("label", { class: "toggle", text: " test split only" }, [
      el("input", { "data-role": "test-only", type: "checkbox", checked: "" }),
    ]),
    el("button", { "data-role": "search", type: "submit", text: "Search" }),
  ]);
  // checkbox before its label text reads naturally
  const toggleLabel = form.querySelector("label.toggle")!;
  toggleLabel.prepend(toggleLabel.querySelector("input")!);

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
  let rows: UiPatientRow[] = [];
  let fetched = false;
  let lastRequest: SpaceMatchRequest | null = null;
  let pending: Promise<void> = Promise.resolve();

  const testOnly = find<HTMLInputElement>(root, "test-only");

  function threshold(): number {
    return Number(slider.value);
  }

  function applyFilters(): void {
    const t = threshold();
    find<HTMLOutputElement>(root, "threshold-value").textContent =
      t.toFixed(2);
    const items = results.querySelectorAll<HTMLLIElement>("li.row");
    let visible = 0;
    let visiblePassed = 0;
    items.forEach((item, i) => {
      const row = rows[i];
      const shown = !testOnly.checked || row.split === "test";
      item.hidden = !shown;
      const passes = passesThreshold(row.checker_prob, t);
      item.classList.toggle("passed", passes);
      item.classList.toggle("failed", !passes);
      const badge = item.querySelector(".pass-state")!;
      badge.textContent = passes ? "passed" : "below threshold";
      badge.classList.toggle("ok", passes);
      if (shown) {
        visible += 1;
        if (passes) visiblePassed += 1;
      }
    });
    find(root, "pass-count").textContent = fetched
      ? `${visiblePassed} of ${visible} shown pass at ${t.toFixed(2)}`
      : "";
    renderEmptyState(visible, visiblePassed, t);
  }

  function renderEmptyState(visible: number, visiblePassed: number,
                            t: number): void {
    clear(emptyState);
    if (!fetched) return;
    if (rows.length === 0) {
      emptyState.append(el("p", { text: "The service returned no candidates for this space." }));
    } else if (visible === 0) {
      emptyState.append(el("p", {
        text: "No candidates fall in the test split. Untick the split " +
              "filter to see train and validation patients too.",
      }));
    } else if (visiblePassed === 0) {
      emptyState.append(el("p", {
        text: `No shown candidates pass at threshold ${t.toFixed(2)}. ` +
              "Rows below the threshold stay listed in rank order, dimmed.",
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

  async function runSearch(request: SpaceMatchRequest): Promise<void> {
    lastRequest = request;
    const { ticket, signal } = gate.begin();
    clear(status);
    try {
      const response = await client.matchSpace(request, signal);
      if (!gate.isCurrent(ticket)) return;
      rows = response.candidates;
      fetched = true;
      clear(results);
      for (const row of rows) {
        results.append(buildRow(row));
      }
      applyFilters();
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
    const spaceId = find<HTMLInputElement>(root, "space-id").value.trim();
    pending = runSearch({ space_id: spaceId, k });
  });

  slider.addEventListener("input", applyFilters);
  testOnly.addEventListener("change", applyFilters);
  applyFilters();

  return { root, settled: () => pending };
}
