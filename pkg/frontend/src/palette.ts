/** Fixed 7-color categorical palette keyed by fact type, in enum order. */

export const FACT_TYPE_ORDER = [
  "value",
  "difference",
  "proportion",
  "trend",
  "rank",
  "extreme",
  "outlier",
] as const;

const COLORS = [
  "#4e79a7",
  "#f28e2b",
  "#59a14f",
  "#e15759",
  "#b07aa1",
  "#76b7b2",
  "#edc948",
];

export function factTypeColor(factType: string): string {
  const i = FACT_TYPE_ORDER.indexOf(factType as (typeof FACT_TYPE_ORDER)[number]);
  return COLORS[i >= 0 ? i : 0];
}
