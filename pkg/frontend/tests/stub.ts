/** In-process HTTP stub standing in for the match service.
 *
 * Tests point the client's base URL at this server and program each
 * route with a responder; every request is recorded (path, body,
 * headers) so tests can assert what the UI actually sent.
 */

import { createServer, IncomingMessage, Server } from "node:http";
import { AddressInfo } from "node:net";

import {
  PatientMatchResponse,
  SpaceMatchResponse,
  UiMatchRow,
  UiPatientRow,
} from "../src/types";

export interface RecordedRequest {
  method: string;
  path: string;
  body: any;
  headers: Record<string, string | string[] | undefined>;
}

export interface StubReply {
  status?: number;
  json: unknown;
  delayMs?: number;
}

type Responder = (body: any) => StubReply;

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve) => {
    let data = "";
    req.on("data", (chunk) => (data += chunk));
    req.on("end", () => resolve(data));
  });
}

export class StubServer {
  readonly requests: RecordedRequest[] = [];
  onPatient: Responder = () => ({ json: patientPayload([]) });
  onSpace: Responder = () => ({ json: spacePayload([]) });
  baseUrl = "";
  private server!: Server;

  static async start(): Promise<StubServer> {
    const stub = new StubServer();
    stub.server = createServer(async (req, res) => {
      const raw = await readBody(req);
      const body = raw ? JSON.parse(raw) : null;
      const path = req.url ?? "";
      stub.requests.push({
        method: req.method ?? "", path, body, headers: req.headers,
      });
      let reply: StubReply;
      if (path === "/v1/match/patient") {
        reply = stub.onPatient(body);
      } else if (path === "/v1/match/space") {
        reply = stub.onSpace(body);
      } else {
        reply = { status: 404, json: { detail: `no route ${path}` } };
      }
      const send = () => {
        res.statusCode = reply.status ?? 200;
        res.setHeader("content-type", "application/json");
        res.end(JSON.stringify(reply.json));
      };
      if (reply.delayMs) {
        setTimeout(send, reply.delayMs);
      } else {
        send();
      }
    });
    await new Promise<void>((r) => stub.server.listen(0, "127.0.0.1", r));
    const { port } = stub.server.address() as AddressInfo;
    stub.baseUrl = `http://127.0.0.1:${port}`;
    return stub;
  }

  requestCount(path: string): number {
    return this.requests.filter((r) => r.path === path).length;
  }

  async close(): Promise<void> {
    await new Promise<void>((resolve) => this.server.close(() => resolve()));
  }
}

/** Deterministic generator so fixture scores are reproducible. */
export function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

/** Candidate spaces whose payload order is deliberately NOT cosine order:
 * any client-side sorting would be visible as an order change. */
export function patientRows(n: number, seed = 7): UiMatchRow[] {
  const rand = lcg(seed);
  return Array.from({ length: n }, (_, i) => ({
    space_id: `NCT9100${String(i).padStart(4, "0")}#1`,
    nct_id: `NCT9100${String(i).padStart(4, "0")}`,
    raw_text: `cancer type x${i}; histology y${i}`,
    rank: i + 1,
    cosine: Math.round(rand() * 1000) / 1000,
    checker_prob: Math.round(rand() * 1000) / 1000,
    passed: true,
  }));
}

const SPLITS: UiPatientRow["split"][] = ["test", "train", "validation"];

export function spaceRows(n: number, seed = 11): UiPatientRow[] {
  const rand = lcg(seed);
  return Array.from({ length: n }, (_, i) => ({
    item_id: `p${String(i).padStart(5, "0")}|2021-0${(i % 9) + 1}-15|standard_of_care`,
    patient_id: `p${String(i).padStart(5, "0")}`,
    anchor_date: `2021-0${(i % 9) + 1}-15`,
    split: SPLITS[i % 3],
    source: "standard_of_care",
    text: `patient ${i} with stage ii disease`,
    rank: i + 1,
    cosine: Math.round(rand() * 1000) / 1000,
    checker_prob: Math.round(rand() * 1000) / 1000,
    passed: true,
  }));
}

export function patientPayload(
  candidates: UiMatchRow[],
  threshold = 0.5,
): PatientMatchResponse {
  return {
    query_ref: "text:abcdef0123456789",
    k: candidates.length || 10,
    threshold,
    as_of_date: "2021-06-01",
    candidates,
  };
}

export function spacePayload(
  candidates: UiPatientRow[],
  threshold = 0.5,
): SpaceMatchResponse {
  return {
    query_ref: "NCT91000017#1",
    k: candidates.length || 20,
    threshold,
    candidates,
  };
}
