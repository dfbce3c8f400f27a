/**
 * Organization panel: the deck as slide blocks with one list item per fact.
 *
 * A list item's left end shows the incoming meta relation (summary plus the
 * index of the slide holding the previous fact), color-coded by the previous
 * fact's type; the right side shows the fact's index, type, and description.
 * Reorder and delete buttons mutate the deck through the API; the export
 * button downloads the rendered document.
 */

import { ApiClient } from "./api.js";
import { factTypeColor, FACT_TYPE_ORDER } from "./palette.js";
import type { PlacementRationale, SessionState } from "./types.js";

export interface OrganizationPanelContext {
  api: ApiClient;
  sessionId: string;
  state: SessionState;
  onMutated: (revision: number) => void;
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

function legend(): HTMLElement {
  const box = el("div", "type-legend");
  for (const t of FACT_TYPE_ORDER) {
    const item = el("span", "legend-item", t);
    item.style.borderLeftColor = factTypeColor(t);
    box.appendChild(item);
  }
  return box;
}

function slideIndexOfFact(state: SessionState, factId: string | null): number | null {
  if (factId === null) return null;
  for (let i = 0; i < state.deck.slides.length; i++) {
    if (state.deck.slides[i].entries.some((e) => e.fact_id === factId)) {
      return i;
    }
  }
  return null;
}

function relationChip(ctx: OrganizationPanelContext, entry: { incoming_meta_relation: string | null; prev_fact_id: string | null }): HTMLElement | null {
  if (!entry.incoming_meta_relation) return null;
  const rel = ctx.state.meta_relations[entry.incoming_meta_relation];
  if (!rel) return null;
  const prev = entry.prev_fact_id ? ctx.state.facts[entry.prev_fact_id] : null;
  const sourceSlide = slideIndexOfFact(ctx.state, entry.prev_fact_id);
  const chip = el("span", "relation-chip");
  chip.style.background = factTypeColor(prev?.fact_type ?? "value");
  chip.append(
    el("span", "chip-summary", rel.summary || "relation"),
    el("span", "chip-source", sourceSlide === null ? "" : `S${sourceSlide}`),
  );
  chip.title = rel.type_description;
  return chip;
}

async function moveEntry(
  container: HTMLElement,
  ctx: OrganizationPanelContext,
  factId: string,
  slide: number,
  position: number,
): Promise<void> {
  try {
    const out = await ctx.api.patchDeck(ctx.sessionId, {
      op: "move",
      fact_id: factId,
      slide,
      position,
    });
    ctx.onMutated(out.revision);
  } catch (e) {
    banner(container, (e as Error).message);
  }
}

export function renderOrganizationPanel(
  container: HTMLElement,
  ctx: OrganizationPanelContext,
): void {
  container.textContent = "";
  container.classList.add("organization-panel");
  const errors = el("div", "banner error");
  errors.hidden = true;
  container.appendChild(errors);
  container.appendChild(legend());

  const slides = el("div", "slides");
  let factIndex = 0;
  ctx.state.deck.slides.forEach((slide, si) => {
    const block = el("div", "slide-block");
    block.dataset.slide = String(si);

    const titleRow = el("div", "slide-title-row");
    titleRow.appendChild(el("span", "slide-title", slide.title || "(untitled)"));
    if (slide.title_locked) {
      titleRow.appendChild(el("span", "lock-indicator", "🔒"));
    }
    const retitle = el("button", "retitle", "retitle");
    retitle.addEventListener("click", async () => {
      const input = container.querySelector<HTMLInputElement>(".retitle-input");
      const title = input?.value ?? "";
      if (!title) return;
      try {
        const out = await ctx.api.patchDeck(ctx.sessionId, { op: "retitle", slide: si, title });
        ctx.onMutated(out.revision);
      } catch (e) {
        banner(container, (e as Error).message);
      }
    });
    titleRow.appendChild(retitle);
    block.appendChild(titleRow);

    const list = el("ol", "slide-facts");
    slide.entries.forEach((entry, ei) => {
      const fact = ctx.state.facts[entry.fact_id];
      const item = el("li", "fact-item");
      item.dataset.factId = entry.fact_id;
      const chip = relationChip(ctx, entry);
      if (chip) item.appendChild(chip);
      item.append(
        el("span", "fact-index", `#${factIndex}`),
        el("span", "fact-type", fact ? fact.fact_type : "?"),
        el("span", "fact-desc", fact ? fact.description : entry.fact_id),
      );
      if (fact) {
        item.querySelector<HTMLElement>(".fact-type")!.style.color = factTypeColor(
          fact.fact_type,
        );
      }
      if (entry.order_locked) {
        item.appendChild(el("span", "lock-indicator", "🔒"));
      }
      const up = el("button", "move-up", "↑");
      up.disabled = ei === 0;
      up.addEventListener("click", () =>
        moveEntry(container, ctx, entry.fact_id, si, ei - 1),
      );
      const down = el("button", "move-down", "↓");
      down.disabled = ei === slide.entries.length - 1;
      down.addEventListener("click", () =>
        moveEntry(container, ctx, entry.fact_id, si, ei + 1),
      );
      const del = el("button", "delete-fact", "✕");
      del.addEventListener("click", async () => {
        try {
          const out = await ctx.api.patchDeck(ctx.sessionId, {
            op: "delete",
            fact_id: entry.fact_id,
          });
          ctx.onMutated(out.revision);
        } catch (e) {
          banner(container, (e as Error).message);
        }
      });
      item.append(up, down, del);
      list.appendChild(item);
      factIndex += 1;
    });
    block.appendChild(list);
    slides.appendChild(block);
  });
  container.appendChild(slides);

  const retitleInput = el("input", "retitle-input");
  retitleInput.placeholder = "new slide title";
  container.appendChild(retitleInput);

  const exportBar = el("div", "export-bar");
  const format = el("select", "export-format");
  for (const f of ["markdown-slides", "html", "structured"]) {
    const opt = el("option", "", f) as HTMLOptionElement;
    opt.value = f;
    format.appendChild(opt);
  }
  const theme = el("select", "export-theme");
  for (const t of ["plain", "light", "dark", "ocean"]) {
    const opt = el("option", "", t) as HTMLOptionElement;
    opt.value = t;
    theme.appendChild(opt);
  }
  const exportBtn = el("button", "export-deck", "export");
  exportBtn.addEventListener("click", async () => {
    try {
      const blob = await ctx.api.fetchExport(ctx.sessionId, format.value, theme.value);
      const ext = { "markdown-slides": "md", html: "html", structured: "story.json" }[
        format.value
      ];
      container.dispatchEvent(
        new CustomEvent("storydeck-export", {
          bubbles: true,
          detail: { blob, filename: `story.${ext}` },
        }),
      );
    } catch (e) {
      banner(container, (e as Error).message);
    }
  });
  exportBar.append(format, theme, exportBtn);
  container.appendChild(exportBar);
}

/** The placement-rationale dialog shown right after an insertion. */
export function renderRationaleDialog(
  container: HTMLElement,
  rationale: { [K in keyof PlacementRationale]: string },
  placedBy: string,
): HTMLElement {
  const overlay = el("div", "rationale-dialog");
  overlay.appendChild(el("h3", "", `placement rationale (${placedBy})`));
  const list = el("dl", "rationale-entries");
  const keys: (keyof PlacementRationale)[] = [
    "topic_fit",
    "relation_to_previous",
    "relation_to_next",
    "intent_fit",
  ];
  for (const key of keys) {
    list.appendChild(el("dt", "", key.replaceAll("_", " ")));
    list.appendChild(el("dd", "", rationale[key] ?? ""));
  }
  overlay.appendChild(list);
  const close = el("button", "close-dialog", "close");
  close.addEventListener("click", () => overlay.remove());
  overlay.appendChild(close);
  container.appendChild(overlay);
  return overlay;
}
