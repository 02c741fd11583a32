/** Mirrors of the match service's JSON payloads. */

/** One candidate space for a patient query, exactly as the service sends it. */
export interface UiMatchRow {
  space_id: string;
  nct_id: string;
  raw_text: string;
  rank: number;
  cosine: number;
  checker_prob: number | null;
  passed: boolean;
}

/** One candidate patient summary for a trial-space query. */
export interface UiPatientRow {
  item_id: string;
  patient_id: string;
  anchor_date: string;
  split: "train" | "validation" | "test";
  source: string;
  text: string;
  rank: number;
  cosine: number;
  checker_prob: number | null;
  passed: boolean;
}

export interface PatientMatchResponse {
  query_ref: string;
  k: number;
  threshold: number;
  as_of_date: string;
  candidates: UiMatchRow[];
}

export interface SpaceMatchResponse {
  query_ref: string;
  k: number;
  threshold: number;
  candidates: UiPatientRow[];
}

export interface PatientMatchRequest {
  summary_text?: string;
  patient_id?: string;
  k?: number;
  show_filtered?: boolean;
}

export interface SpaceMatchRequest {
  space_id?: string;
  space_text?: string;
  k?: number;
  show_filtered?: boolean;
}
