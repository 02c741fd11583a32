/** Persisted client settings: where the service lives and, when the
 * deployment requires it, the bearer token to send. There is no login
 * flow; the token is pasted into the settings panel. */

export interface Settings {
  baseUrl: string;
  token: string;
}

const STORAGE_KEY = "trialmatch.ui.settings";

export const DEFAULT_SETTINGS: Settings = { baseUrl: "", token: "" };

interface StringStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function loadSettings(store: StringStore): Settings {
  const raw = store.getItem(STORAGE_KEY);
  if (raw === null) return { ...DEFAULT_SETTINGS };
  try {
    const parsed = JSON.parse(raw) as Partial<Settings>;
    return {
      baseUrl: typeof parsed.baseUrl === "string" ? parsed.baseUrl : "",
      token: typeof parsed.token === "string" ? parsed.token : "",
    };
  } catch {
    return { ...DEFAULT_SETTINGS };
  }
}

export function saveSettings(store: StringStore, settings: Settings): void {
  store.setItem(STORAGE_KEY, JSON.stringify(settings));
}

/** Strip a trailing slash so path joining stays predictable. An empty
 * base URL means same-origin relative requests. */
export function normalizeBaseUrl(url: string): string {
  return url.trim().replace(/\/+$/, "");
}
