/**
 * Analysis panel: the current chart on the left, fact candidates and their
 * meta relation suggestions on the right.
 *
 * Each suggestion renders as a three-card stack: the previous fact (hover
 * reveals its chart), the relation card (summary word, full description,
 * edit button, hover-to-verify evidence and intent link), and the current
 * fact with its add/remove buttons.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderChart } from "./chart.js";
import { factTypeColor } from "./palette.js";
import type { DataFact, MetaRelation, SelectionResult, SessionState } from "./types.js";

export interface AnalysisPanelContext {
  api: ApiClient;
  sessionId: string;
  state: SessionState;
  chartId: string;
  onMutated: (revision: number) => void;
  onSelected?: (result: SelectionResult) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function banner(container: HTMLElement, message: string): void {
  const box = container.querySelector<HTMLElement>(".banner");
  if (box) {
    box.textContent = message;
    box.hidden = false;
  }
}

function factChip(fact: DataFact): HTMLElement {
  const chip = el("span", "fact-type-chip", fact.fact_type);
  chip.style.background = factTypeColor(fact.fact_type);
  return chip;
}

function relationsFor(state: SessionState, factId: string): MetaRelation[] {
  return Object.values(state.meta_relations)
    .filter((r) => r.fact_a === factId || r.fact_b === factId)
    .filter((r) => r.status !== "rejected")
    .sort((a, b) => b.score - a.score);
}

function hoverReveal(card: HTMLElement, details: HTMLElement): void {
  details.classList.add("hover-details");
  card.appendChild(details);
  card.addEventListener("mouseenter", () => details.classList.add("visible"));
  card.addEventListener("mouseleave", () => details.classList.remove("visible"));
}

function previousFactCard(ctx: AnalysisPanelContext, fact: DataFact): HTMLElement {
  const card = el("div", "card previous-fact");
  card.append(factChip(fact), el("span", "fact-desc", fact.description));
  const chartCtx = ctx.state.charts[fact.chart_id];
  if (chartCtx) {
    const details = el("div", "previous-chart");
    details.appendChild(renderChart(chartCtx, fact.focus.map(([, v]) => v)));
    hoverReveal(card, details);
  }
  return card;
}

function relationCard(ctx: AnalysisPanelContext, rel: MetaRelation): HTMLElement {
  const card = el("div", "card meta-relation-card");
  card.dataset.relationId = rel.id;
  card.dataset.status = rel.status;

  const head = el("div", "relation-head");
  head.append(
    el("span", "relation-summary", rel.summary || "relation"),
    el("span", `relation-status status-${rel.status}`, rel.status),
    el("span", "relation-score", rel.score.toFixed(2)),
  );
  card.appendChild(head);
  card.appendChild(el("div", "relation-description", rel.type_description));

  // verification info: evidence quote and intent link, revealed on hover
  const verify = el("div", "relation-verify");
  const badge = el(
    "span",
    `evidence-badge ${rel.evidence_matched ? "matched" : "unmatched"}`,
    rel.evidence_matched ? "quote matched" : "quote unmatched",
  );
  verify.appendChild(badge);
  const details = el("div", "");
  details.append(
    el("blockquote", "evidence-quote", rel.evidence_quote),
    el("p", "intent-link", rel.intent_link),
  );
  hoverReveal(verify, details);
  card.appendChild(verify);

  const editBtn = el("button", "edit-relation", "edit");
  editBtn.addEventListener("click", () => {
    const editor = el("div", "relation-editor");
    const area = el("textarea", "relation-editor-text");
    area.value = rel.type_description;
    const save = el("button", "save-relation", "save");
    save.addEventListener("click", async () => {
      try {
        const out = await ctx.api.patchRelation(ctx.sessionId, rel.id, {
          type_description: area.value,
        });
        ctx.onMutated(out.revision);
      } catch (e) {
        banner(card.closest(".analysis-panel") as HTMLElement, (e as Error).message);
      }
    });
    editor.append(area, save);
    card.appendChild(editor);
  });
  card.appendChild(editBtn);
  return card;
}

function currentFactCard(
  ctx: AnalysisPanelContext,
  fact: DataFact,
  relation: MetaRelation | null,
): HTMLElement {
  const card = el("div", "card current-fact");
  card.append(factChip(fact), el("span", "fact-desc", fact.description));
  const inDeck = ctx.state.deck.slides.some((s) =>
    s.entries.some((e) => e.fact_id === fact.id),
  );
  if (!inDeck) {
    const add = el("button", "add-fact", "add to story");
    add.addEventListener("click", async () => {
      try {
        const result = await ctx.api.selectFact(ctx.sessionId, fact.id, relation?.id);
        ctx.onMutated(result.revision);
        ctx.onSelected?.(result);
      } catch (e) {
        const code = e instanceof ApiError ? ` [${e.code}]` : "";
        banner(card.closest(".analysis-panel") as HTMLElement, `${(e as Error).message}${code}`);
      }
    });
    card.appendChild(add);
  } else {
    const remove = el("button", "remove-fact", "remove from story");
    remove.addEventListener("click", async () => {
      try {
        const out = await ctx.api.patchDeck(ctx.sessionId, {
          op: "delete",
          fact_id: fact.id,
        });
        ctx.onMutated(out.revision);
      } catch (e) {
        banner(card.closest(".analysis-panel") as HTMLElement, (e as Error).message);
      }
    });
    card.appendChild(remove);
  }
  return card;
}

export function renderAnalysisPanel(
  container: HTMLElement,
  ctx: AnalysisPanelContext,
  pickedFactId?: string,
): void {
  container.textContent = "";
  container.classList.add("analysis-panel");
  const errors = el("div", "banner error");
  errors.hidden = true;
  container.appendChild(errors);

  const chartCtx = ctx.state.charts[ctx.chartId];
  if (!chartCtx) {
    banner(container, `no chart ${ctx.chartId} in this session`);
    return;
  }
  const candidates = Object.values(ctx.state.facts).filter(
    (f) => f.chart_id === ctx.chartId,
  );
  const picked =
    candidates.find((f) => f.id === pickedFactId) ?? candidates[0] ?? null;

  const body = el("div", "panel-body");
  const chartSide = el("div", "chart-side");
  chartSide.appendChild(renderChart(chartCtx, picked ? picked.focus.map(([, v]) => v) : []));
  body.appendChild(chartSide);

  const factsSide = el("div", "facts-side");

  const picker = el("div", "candidate-picker");
  for (const fact of candidates) {
    const btn = el("button", "candidate", `${fact.fact_type}: ${fact.description}`);
    if (picked && fact.id === picked.id) btn.classList.add("picked");
    btn.addEventListener("click", () => renderAnalysisPanel(container, ctx, fact.id));
    picker.appendChild(btn);
  }
  factsSide.appendChild(picker);

  if (picked) {
    const relations = relationsFor(ctx.state, picked.id);
    const best = relations[0] ?? null;
    for (const rel of relations) {
      const stack = el("div", "suggestion-stack");
      const otherId = rel.fact_a === picked.id ? rel.fact_b : rel.fact_a;
      const other = ctx.state.facts[otherId];
      if (other) stack.appendChild(previousFactCard(ctx, other));
      stack.appendChild(relationCard(ctx, rel));
      factsSide.appendChild(stack);
    }
    factsSide.appendChild(currentFactCard(ctx, picked, best));
  }
  body.appendChild(factsSide);
  container.appendChild(body);
}
