/** Document list view: per-document annotation status with sortable
 * columns (count, triage, done, last update) and keyword search. */

import type { WorkspaceView } from './types.js';

export interface DocRow {
  workspace_id: string;
  doc_id: string;
  title: string;
  annotation_count: number;
  relation_count: number;
  triage_label: string | null;
  done: boolean;
  last_update: string;
}

export const DOC_COLUMNS: (keyof DocRow)[] = [
  'doc_id',
  'annotation_count',
  'relation_count',
  'triage_label',
  'done',
  'last_update',
];

export function rowsFromViews(views: WorkspaceView[]): DocRow[] {
  return views.map((v) => ({
    workspace_id: v.workspace_id,
    doc_id: v.doc_id,
    title: v.document.metadata['title'] ?? '',
    annotation_count: v.status.annotation_count,
    relation_count: v.status.relation_count,
    triage_label: v.status.triage_label,
    done: v.status.done,
    last_update: v.status.last_update,
  }));
}

export function sortRows(rows: DocRow[], column: keyof DocRow, descending = false): DocRow[] {
  const sorted = [...rows].sort((a, b) => {
    const va = a[column];
    const vb = b[column];
    if (va === null && vb === null) return 0;
    if (va === null) return -1;
    if (vb === null) return 1;
    if (typeof va === 'number' && typeof vb === 'number') return va - vb;
    if (typeof va === 'boolean' && typeof vb === 'boolean') {
      return Number(va) - Number(vb);
    }
    return String(va).localeCompare(String(vb));
  });
  return descending ? sorted.reverse() : sorted;
}

/** Case-insensitive keyword match over document id, title and metadata. */
export function filterRows(rows: DocRow[], keyword: string): DocRow[] {
  const needle = keyword.trim().toLowerCase();
  if (!needle) return rows;
  return rows.filter(
    (r) =>
      r.doc_id.toLowerCase().includes(needle) || r.title.toLowerCase().includes(needle),
  );
}

export interface DocListHandlers {
  onOpen?: (workspaceId: string) => void;
  onSort?: (column: keyof DocRow) => void;
  onSearch?: (keyword: string) => void;
}

export function renderDocList(
  container: HTMLElement,
  rows: DocRow[],
  handlers: DocListHandlers = {},
): void {
  container.innerHTML = '';
  container.classList.add('doc-list');

  const search = document.createElement('input');
  search.type = 'search';
  search.placeholder = 'Search documents';
  search.className = 'doc-search';
  if (handlers.onSearch) {
    search.addEventListener('input', () => handlers.onSearch!(search.value));
  }
  container.appendChild(search);

  const table = document.createElement('table');
  const head = document.createElement('thead');
  const headRow = document.createElement('tr');
  for (const column of DOC_COLUMNS) {
    const th = document.createElement('th');
    th.textContent = column;
    th.dataset.column = column;
    if (handlers.onSort) {
      th.addEventListener('click', () => handlers.onSort!(column));
    }
    headRow.appendChild(th);
  }
  head.appendChild(headRow);
  table.appendChild(head);

  const body = document.createElement('tbody');
  for (const row of rows) {
    const tr = document.createElement('tr');
    tr.dataset.workspaceId = row.workspace_id;
    tr.dataset.docId = row.doc_id;
    const cells: (string | number)[] = [
      row.doc_id,
      row.annotation_count,
      row.relation_count,
      row.triage_label ?? '',
      row.done ? 'done' : 'open',
      row.last_update,
    ];
    for (const value of cells) {
      const td = document.createElement('td');
      td.textContent = String(value);
      tr.appendChild(td);
    }
    if (handlers.onOpen) {
      tr.addEventListener('click', () => handlers.onOpen!(row.workspace_id));
    }
    body.appendChild(tr);
  }
  table.appendChild(body);
  container.appendChild(table);
}
