/**
 * Payload shapes of the storydeck session API.
 * Field names mirror the service's JSON exactly.
 */

export type CellValue = string | number | null;

export interface ChartSpec {
  chart_id: string | null;
  mark: "bar" | "line" | "point";
  encoding: {
    x: { field: string; aggregate?: string };
    y: { field: string; aggregate?: string };
    color?: { field: string };
  };
  transform?: { filter: { field: string; equal: CellValue } }[];
}

export interface ChartContext {
  chart_id: string;
  spec: ChartSpec;
  subspace: [string, CellValue][];
  dimension: string;
  dimension_kind: string;
  breakdown: string | null;
  measures: [string, string][];
  table: [CellValue, number][];
  color_table: [CellValue, CellValue, number][];
}

export interface FactScores {
  importance: number;
  interest_alignment: number;
}

export interface DataFact {
  id: string;
  subspace: [string, CellValue][];
  dimension: string | null;
  measures: [string, string][];
  fact_type: string;
  parameters: Record<string, unknown>;
  focus: [string, CellValue][];
  scores: FactScores;
  description: string;
  chart_id: string;
}

export interface MetaRelation {
  id: string;
  fact_a: string;
  fact_b: string;
  type_description: string;
  summary: string;
  score: number;
  status: "suggested" | "accepted" | "edited" | "rejected" | "user_added";
  entities: string[];
  evidence_quote: string;
  evidence_matched: boolean;
  intent_link: string;
}

export interface FactEntry {
  fact_id: string;
  incoming_meta_relation: string | null;
  prev_fact_id: string | null;
  order_locked: boolean;
}

export interface Slide {
  title: string;
  title_locked: boolean;
  entries: FactEntry[];
}

export interface Deck {
  slides: Slide[];
  max_facts_per_slide: number;
  intent: string;
}

export interface SessionState {
  session_id: string;
  revision: number;
  dataset: { name: string; columns: { name: string; kind: string }[]; row_count: number };
  intent: string;
  knowledge_docs: { doc_id: string; title: string; body: string }[];
  charts: Record<string, ChartContext>;
  facts: Record<string, DataFact>;
  meta_relations: Record<string, MetaRelation>;
  deck: Deck;
  placements: { llm: number; fallback: number };
}

export interface SubmitChartResult {
  chart_id: string;
  chart: ChartContext;
  facts: DataFact[];
  suggestions: MetaRelation[];
  revision: number;
  warning?: string;
}

export interface PlacementRationale {
  topic_fit: string;
  relation_to_previous: string;
  relation_to_next: string;
  intent_fit: string;
}

export interface SelectionResult {
  deck: Deck;
  rationale: PlacementRationale;
  placed_by: "llm" | "fallback";
  revision: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: Record<string, unknown>;
}
