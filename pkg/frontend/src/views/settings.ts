/** Settings panel: API base URL and an optional bearer token. */

import { el, find } from "../dom";
import { Settings } from "../config";

export function mountSettingsView(
  root: HTMLElement,
  current: () => Settings,
  onSave: (settings: Settings) => void,
): HTMLElement {
  root.classList.add("settings-view");
  const initial = current();
  root.append(
    el("label", { text: "API base URL " }, [
      el("input", {
        "data-role": "base-url",
        placeholder: "http://127.0.0.1:8780 (empty = same origin)",
        value: initial.baseUrl,
      }),
    ]),
    el("label", { text: "Bearer token " }, [
      el("input", {
        "data-role": "token", type: "password",
        placeholder: "only if the service requires one",
        value: initial.token,
      }),
    ]),
    el("button", { "data-role": "save", type: "button", text: "Save" }),
    el("span", { "data-role": "saved-note", class: "saved-note" }),
  );

  find(root, "save").addEventListener("click", () => {
    onSave({
      baseUrl: find<HTMLInputElement>(root, "base-url").value,
      token: find<HTMLInputElement>(root, "token").value,
    });
    find(root, "saved-note").textContent = "saved";
  });
  return root;
}
