/**
 * App shell: session setup form, chart submission, and the two panels.
 * All authoritative state lives on the server; every change triggers a
 * refresh through GET /api/sessions/{id} guarded by the revision watermark.
 */

import { ApiClient } from "./api.js";
import { renderAnalysisPanel } from "./analysisPanel.js";
import { renderOrganizationPanel, renderRationaleDialog } from "./organizationPanel.js";
import { ViewState } from "./state.js";

const api = new ApiClient("");
const view = new ViewState();
let currentChartId: string | null = null;

function $(selector: string): HTMLElement {
  const node = document.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node;
}

async function refresh(): Promise<void> {
  if (!view.sessionId) return;
  const state = await api.getSession(view.sessionId);
  view.accept(state);
}

function renderAll(): void {
  if (!view.state || !view.sessionId) return;
  if (currentChartId) {
    renderAnalysisPanel($("#analysis"), {
      api,
      sessionId: view.sessionId,
      state: view.state,
      chartId: currentChartId,
      onMutated: (revision) => {
        view.watermark(revision);
        void refresh();
      },
      onSelected: (result) => {
        renderRationaleDialog(document.body, result.rationale, result.placed_by);
      },
    });
  }
  renderOrganizationPanel($("#organization"), {
    api,
    sessionId: view.sessionId,
    state: view.state,
    onMutated: (revision) => {
      view.watermark(revision);
      void refresh();
    },
  });
}

function wireExportDownload(): void {
  document.addEventListener("storydeck-export", (event) => {
    const { blob, filename } = (event as CustomEvent).detail;
    try {
      const url = URL.createObjectURL(blob);
      const a = document.createElement("a");
      a.href = url;
      a.download = filename;
      a.click();
      URL.revokeObjectURL(url);
    } catch {
      // environments without blob URLs: nothing to download into
    }
  });
}

function wireForms(): void {
  $("#create-session").addEventListener("click", async () => {
    const csv = ($("#dataset-csv") as HTMLTextAreaElement).value;
    const knowledge = ($("#knowledge") as HTMLTextAreaElement).value;
    const intent = ($("#intent") as HTMLInputElement).value;
    const created = await api.createSession({
      dataset_csv: csv,
      knowledge_docs: knowledge
        ? [{ doc_id: "k1", title: "knowledge", body: knowledge }]
        : [],
      intent,
    });
    view.bind(created.session_id);
    $("#session-id").textContent = created.session_id;
    await refresh();
  });

  $("#submit-chart").addEventListener("click", async () => {
    if (!view.sessionId) return;
    const spec = JSON.parse(($("#chart-spec") as HTMLTextAreaElement).value);
    const result = await api.submitChart(view.sessionId, spec);
    currentChartId = result.chart_id;
    view.watermark(result.revision);
    if (result.warning) {
      $("#warnings").textContent = result.warning;
    }
    await refresh();
  });

  $("#update-intent").addEventListener("click", async () => {
    if (!view.sessionId) return;
    const out = await api.putIntent(view.sessionId, ($("#intent") as HTMLInputElement).value);
    view.watermark(out.revision);
    await refresh();
  });
}

export function main(): void {
  view.onChange(renderAll);
  wireForms();
  wireExportDownload();
}

if (typeof window !== "undefined" && document.readyState !== "loading") {
  main();
} else if (typeof window !== "undefined") {
  document.addEventListener("DOMContentLoaded", main);
}
