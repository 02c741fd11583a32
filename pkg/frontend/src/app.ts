/** Page shell: tab bar over the two search views and the settings panel. */

import { MatchClient } from "./api";
import { loadSettings, saveSettings, Settings } from "./config";
import { el } from "./dom";
import { mountPatientView, PatientViewHandle } from "./views/patient";
import { mountSpaceView, SpaceViewHandle } from "./views/space";
import { mountSettingsView } from "./views/settings";

interface StringStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export interface AppHandle {
  patient: PatientViewHandle;
  space: SpaceViewHandle;
  show(tab: "patient" | "space" | "settings"): void;
}

export function createApp(root: HTMLElement, store: StringStore): AppHandle {
  let settings: Settings = loadSettings(store);
  const client = new MatchClient(() => settings);

  const panels = {
    patient: el("section", { class: "view", "data-view": "patient" }),
    space: el("section", { class: "view", "data-view": "space" }),
    settings: el("section", { class: "view", "data-view": "settings" }),
  };

  const tabs = el("nav", { class: "tabs" });
  const labels: Record<keyof typeof panels, string> = {
    patient: "Patient search",
    space: "Trial view",
    settings: "Settings",
  };

  function show(tab: keyof typeof panels): void {
    for (const [name, panel] of Object.entries(panels)) {
      panel.hidden = name !== tab;
    }
    tabs.querySelectorAll("button").forEach((button) => {
      button.classList.toggle("active", button.dataset.tab === tab);
    });
  }

  for (const name of Object.keys(panels) as (keyof typeof panels)[]) {
    const button = el("button", {
      type: "button", "data-tab": name, text: labels[name],
    });
    button.addEventListener("click", () => show(name));
    tabs.append(button);
  }

  const patient = mountPatientView(panels.patient, client);
  const space = mountSpaceView(panels.space, client);
  mountSettingsView(panels.settings, () => settings, (next) => {
    settings = next;
    saveSettings(store, next);
  });

  root.append(
    el("header", {}, [el("h1", { text: "Trial matcher" }), tabs]),
    panels.patient, panels.space, panels.settings,
  );
  show("patient");
  return { patient, space, show };
}
