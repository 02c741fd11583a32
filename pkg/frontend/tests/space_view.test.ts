import { afterEach, beforeEach, expect, test } from "vitest";

import { passesThreshold } from "../src/filtering";
import { mountSpaceView, SpaceViewHandle } from "../src/views/space";
import {
  clientFor, mountRoot, renderedIds, setSlider, submitAndSettle,
} from "./helpers";
import { spacePayload, spaceRows, StubServer } from "./stub";

let stub: StubServer;
let view: SpaceViewHandle;

beforeEach(async () => {
  stub = await StubServer.start();
  view = mountSpaceView(mountRoot(), clientFor(stub));
});

afterEach(async () => {
  await stub.close();
});

function fillSpaceId(id: string): void {
  view.root.querySelector<HTMLInputElement>(
    '[data-role="space-id"]')!.value = id;
}

function visibleIds(): string[] {
  return [...view.root.querySelectorAll<HTMLElement>("li.row")]
    .filter((item) => !item.hidden)
    .map((item) => item.getAttribute("data-item-id")!);
}

test("rendered candidate count equals payload count", async () => {
  const rows = spaceRows(15);
  stub.onSpace = () => ({ json: spacePayload(rows) });
  fillSpaceId("NCT91000017#1");
  await submitAndSettle(view);

  // every candidate gets a node, in payload order; the split filter only
  // hides rows, it never drops or reorders them
  expect(view.root.querySelectorAll("li.row").length).toBe(rows.length);
  expect(renderedIds(view.root, "data-item-id"))
    .toEqual(rows.map((r) => r.item_id));
  expect(stub.requests.at(-1)!.body.space_id).toBe("NCT91000017#1");
});

test("split filter defaults to test-only and toggling shows a superset", async () => {
  const rows = spaceRows(15); // splits cycle test/train/validation
  stub.onSpace = () => ({ json: spacePayload(rows) });
  fillSpaceId("NCT91000017#1");
  await submitAndSettle(view);

  const toggle = view.root.querySelector<HTMLInputElement>(
    '[data-role="test-only"]')!;
  expect(toggle.checked).toBe(true);

  const testOnly = visibleIds();
  expect(testOnly).toEqual(
    rows.filter((r) => r.split === "test").map((r) => r.item_id));

  toggle.checked = false;
  toggle.dispatchEvent(new Event("change", { bubbles: true }));
  const all = visibleIds();
  expect(all).toEqual(rows.map((r) => r.item_id));

  toggle.checked = true;
  toggle.dispatchEvent(new Event("change", { bubbles: true }));
  // back on: visible rows are a subset of the unfiltered view
  for (const id of visibleIds()) {
    expect(all).toContain(id);
  }
  expect(visibleIds().length).toBeLessThan(all.length);
});

test("rows carry split badges and anchor dates", async () => {
  const rows = spaceRows(6);
  stub.onSpace = () => ({ json: spacePayload(rows) });
  fillSpaceId("NCT91000017#2");
  await submitAndSettle(view);

  const items = view.root.querySelectorAll<HTMLElement>("li.row");
  items.forEach((item, i) => {
    expect(item.querySelector(".badge.split")!.textContent)
      .toBe(rows[i].split);
    expect(item.querySelector(".anchor-date")!.textContent)
      .toBe(rows[i].anchor_date);
  });
});

test("unknown space id surfaces the 404 inline", async () => {
  stub.onSpace = () => ({
    status: 404, json: { detail: "unknown space_id 'NCT1#9'" },
  });
  fillSpaceId("NCT1#9");
  await submitAndSettle(view);

  const status = view.root.querySelector('[data-role="status"]')!;
  expect(status.textContent).toContain("404");
  expect(status.textContent).toContain("unknown space_id 'NCT1#9'");
  expect(view.root.querySelector('[data-role="retry"]')).not.toBeNull();
  expect(view.root.querySelectorAll("li.row").length).toBe(0);
});

test("threshold refilters the visible rows without reordering", async () => {
  const rows = spaceRows(18, 5);
  stub.onSpace = () => ({ json: spacePayload(rows) });
  fillSpaceId("NCT91000017#1");
  await submitAndSettle(view);

  for (const wanted of [0.0, 0.31, 0.62, 0.97]) {
    const t = setSlider(view.root, wanted);
    const visiblePassed = [...view.root.querySelectorAll<HTMLElement>(
      "li.row.passed")].filter((item) => !item.hidden).length;
    const expected = rows.filter(
      (r) => r.split === "test" && passesThreshold(r.checker_prob, t)).length;
    expect(visiblePassed).toBe(expected);
    expect(renderedIds(view.root, "data-item-id"))
      .toEqual(rows.map((r) => r.item_id));
  }
});
