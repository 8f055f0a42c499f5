/**
 * Cross-experiment overview table.
 *
 * Every cell is rebuilt from a single /overview response and numeric cells
 * carry the server's tokens verbatim; the client's only contribution is
 * row order (q ascending, stable) and badge styling.
 */

import { OverviewResponse, OverviewRow } from "./api.js";
import { toNumber } from "./json.js";

export const OVERVIEW_COLUMNS = [
  "experiment",
  "status",
  "p",
  "q",
  "chance to beat",
  "rejected",
  "ci level",
  "adjusted ci",
] as const;

function ciText(row: OverviewRow): string {
  if (row.ci === null) return "n/a";
  const lo = row.ci[0] === null ? "-inf" : row.ci[0];
  const hi = row.ci[1] === null ? "inf" : row.ci[1];
  return `[${lo}, ${hi}]`;
}

export function sortRowsByQ(rows: readonly OverviewRow[]): OverviewRow[] {
  // Array.prototype.sort is stable, so ties keep the server's id order.
  return [...rows].sort((a, b) => toNumber(a.q_value) - toNumber(b.q_value));
}

export function renderOverview(container: HTMLElement, overview: OverviewResponse): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  container.classList.remove("stale");

  const caption = doc.createElement("div");
  caption.className = "overview-caption";
  caption.textContent = `procedure ${overview.procedure}, alpha ${overview.alpha}`;
  container.appendChild(caption);

  const table = doc.createElement("table");
  table.className = "overview";
  const thead = doc.createElement("thead");
  const headRow = doc.createElement("tr");
  for (const name of OVERVIEW_COLUMNS) {
    const th = doc.createElement("th");
    th.textContent = name;
    headRow.appendChild(th);
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const tbody = doc.createElement("tbody");
  for (const row of sortRowsByQ(overview.rows)) {
    const tr = doc.createElement("tr");
    tr.dataset.id = row.id;

    const cells = [
      row.id,
      row.status,
      row.p_value,
      row.q_value,
      row.chance_to_beat,
      "", // badge cell, filled below
      row.ci_level_capped ? `${row.ci_level} (capped)` : row.ci_level,
      ciText(row),
    ];
    cells.forEach((text, i) => {
      const td = doc.createElement("td");
      if (i === 5) {
        const badge = doc.createElement("span");
        badge.className = row.rejected ? "badge rejected" : "badge";
        badge.textContent = row.rejected ? "rejected" : "not rejected";
        td.appendChild(badge);
      } else {
        td.textContent = text;
      }
      tr.appendChild(td);
    });
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  container.appendChild(table);
}

/** Network failure: keep the last table, badge it stale with a timestamp. */
export function markOverviewStale(container: HTMLElement, at: Date): void {
  container.classList.add("stale");
  let badge = container.querySelector<HTMLElement>(".stale-badge");
  if (!badge) {
    badge = container.ownerDocument.createElement("div");
    badge.className = "stale-badge";
    container.prepend(badge);
  }
  badge.textContent = `stale since ${at.toISOString()}`;
}
