import { MatchClient } from "../src/api";
import { StubServer } from "./stub";

export function clientFor(stub: StubServer, token = ""): MatchClient {
  return new MatchClient(() => ({ baseUrl: stub.baseUrl, token }));
}

export function mountRoot(): HTMLElement {
  document.body.innerHTML = "";
  const root = document.createElement("section");
  document.body.append(root);
  return root;
}

interface ViewHandle {
  root: HTMLElement;
  settled(): Promise<void>;
}

/** Submit the view's form and wait for the triggered search to finish. */
export async function submitAndSettle(view: ViewHandle): Promise<void> {
  const form = view.root.querySelector("form")!;
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
  await view.settled();
}

export function setSlider(root: HTMLElement, value: number): number {
  const slider = root.querySelector<HTMLInputElement>(
    '[data-role="threshold"]')!;
  slider.value = String(value);
  slider.dispatchEvent(new Event("input", { bubbles: true }));
  // the range input may clamp; filtering must agree with its actual value
  return Number(slider.value);
}

export function renderedIds(root: HTMLElement, attr: string): string[] {
  return [...root.querySelectorAll<HTMLElement>("li.row")].map(
    (item) => item.getAttribute(attr)!);
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
