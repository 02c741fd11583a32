/** Thin typed client for the match service's /v1 endpoints. */

import { normalizeBaseUrl, Settings } from "./config";
import {
  PatientMatchRequest,
  PatientMatchResponse,
  SpaceMatchRequest,
  SpaceMatchResponse,
} from "./types";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return `${response.status} ${response.statusText}`;
  }
}

export class MatchClient {
  // settings are read per request so the panel takes effect immediately
  constructor(private readonly settings: () => Settings) {}

  private async post<T>(path: string, body: unknown,
                        signal?: AbortSignal): Promise<T> {
    const { baseUrl, token } = this.settings();
    const headers: Record<string, string> = {
      "content-type": "application/json",
    };
    if (token) headers["authorization"] = `Bearer ${token}`;
    const response = await fetch(normalizeBaseUrl(baseUrl) + path, {
      method: "POST",
      headers,
      body: JSON.stringify(body),
      signal,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response.json() as Promise<T>;
  }

  /** Ranked spaces for a patient. Always asks for filtered rows too:
   * the threshold slider works client-side on checker_prob, so the UI
   * needs every retrieved candidate, not just the passing ones. */
  matchPatient(request: PatientMatchRequest,
               signal?: AbortSignal): Promise<PatientMatchResponse> {
    return this.post("/v1/match/patient",
                     { ...request, show_filtered: true }, signal);
  }

  /** Ranked patient summaries for a trial space. */
  matchSpace(request: SpaceMatchRequest,
             signal?: AbortSignal): Promise<SpaceMatchResponse> {
    return this.post("/v1/match/space",
                     { ...request, show_filtered: true }, signal);
  }
}

/** Serializes searches within one view: starting a new search aborts the
 * previous request, and a response is applied only if its ticket is still
 * the latest. Guards against slow responses landing after fast ones. */
export class SearchGate {
  private seq = 0;
  private controller: AbortController | null = null;

  begin(): { ticket: number; signal: AbortSignal } {
    this.controller?.abort();
    this.controller = new AbortController();
    this.seq += 1;
    return { ticket: this.seq, signal: this.controller.signal };
  }

  isCurrent(ticket: number): boolean {
    return ticket === this.seq;
  }
}
