import { readFileSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../src/api.js";
import type { SessionState, SubmitChartResult } from "../src/types.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const fixtures = path.resolve(here, "../../tests/fixtures");

export function fixture(name: string): string {
  return readFileSync(path.join(fixtures, name), "utf-8");
}

export interface Bootstrapped {
  api: ApiClient;
  sessionId: string;
  secondChart: SubmitChartResult;
  state: SessionState;
}

/**
 * Builds a session in the canonical demo shape: dataset + knowledge +
 * intent, first chart submitted and its trend fact selected, second chart
 * submitted so a verified suggestion exists.
 */
export async function bootstrapSession(baseUrl: string): Promise<Bootstrapped> {
  const api = new ApiClient(baseUrl);
  const { session_id } = await api.createSession({
    dataset_csv: fixture("ev_cars.csv"),
    knowledge_docs: [
      { doc_id: "k1", title: "electric cars", body: fixture("ev_knowledge.txt") },
    ],
    intent: "compare hybrid and plug-in electric car sales",
  });
  await api.submitChart(session_id, JSON.parse(fixture("ev_chart_prius.json")));
  await api.selectFact(session_id, "c1.trend.0");
  const secondChart = await api.submitChart(
    session_id,
    JSON.parse(fixture("ev_chart_plugins.json")),
  );
  const state = await api.getSession(session_id);
  return { api, sessionId: session_id, secondChart, state };
}

export function mount(): HTMLElement {
  const node = document.createElement("div");
  document.body.appendChild(node);
  return node;
}

export const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export async function waitFor(
  check: () => Promise<boolean> | boolean,
  timeoutMs = 5000,
): Promise<void> {
  const start = Date.now();
  while (!(await check())) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition not met in time");
    }
    await sleep(25);
  }
}
