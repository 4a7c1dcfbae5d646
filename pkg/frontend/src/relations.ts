/** Right-side panel: entity table, relation table, and the click-to-pick
 * relation builder (2 to 8 nodes; the ninth pick is rejected before any
 * request is made). */

import type { AnnotationPayload, RelationPayload, WorkspaceView } from './types.js';

export const MAX_RELATION_NODES = 8;

export class RelationBuilder {
  picks: string[] = [];

  /** Returns false when the pick is rejected (duplicate or ninth node). */
  pick(annId: string): boolean {
    if (this.picks.includes(annId)) return false;
    if (this.picks.length >= MAX_RELATION_NODES) return false;
    this.picks.push(annId);
    return true;
  }

  unpick(annId: string): void {
    this.picks = this.picks.filter((id) => id !== annId);
  }

  clear(): void {
    this.picks = [];
  }

  canSubmit(): boolean {
    return this.picks.length >= 2 && this.picks.length <= MAX_RELATION_NODES;
  }
}

/** Resolve a concept id like "GENE:7157" against configured external URL
 * templates, e.g. {"GENE": "https://www.ncbi.nlm.nih.gov/gene/{id}"}. */
export function conceptUrl(
  templates: Record<string, string>,
  conceptId: string,
): string | null {
  const sep = conceptId.indexOf(':');
  if (sep <= 0) return null;
  const prefix = conceptId.slice(0, sep);
  const id = conceptId.slice(sep + 1);
  const template = templates[prefix];
  return template ? template.replace('{id}', encodeURIComponent(id)) : null;
}

export interface EntityTableHandlers {
  onRowClick?: (annId: string) => void;
  onDelete?: (annId: string) => void;
  onPick?: (annId: string) => void;
}

export function renderEntityTable(
  container: HTMLElement,
  annotations: AnnotationPayload[],
  conceptTemplates: Record<string, string>,
  handlers: EntityTableHandlers = {},
): void {
  container.innerHTML = '';
  container.classList.add('entity-table');
  const table = document.createElement('table');
  const head = document.createElement('thead');
  head.innerHTML = '<tr><th>Type</th><th>Concept ID</th><th>Text</th><th></th></tr>';
  table.appendChild(head);
  const body = document.createElement('tbody');
  for (const ann of annotations) {
    const tr = document.createElement('tr');
    tr.dataset.annId = ann.ann_id;

    const typeCell = document.createElement('td');
    typeCell.textContent = ann.entity_type;
    tr.appendChild(typeCell);

    const conceptCell = document.createElement('td');
    if (ann.concept_id) {
      const url = conceptUrl(conceptTemplates, ann.concept_id);
      if (url) {
        const link = document.createElement('a');
        link.href = url;
        link.target = '_blank';
        link.rel = 'noreferrer';
        link.textContent = ann.concept_id;
        conceptCell.appendChild(link);
      } else {
        conceptCell.textContent = ann.concept_id;
      }
    }
    tr.appendChild(conceptCell);

    const textCell = document.createElement('td');
    textCell.textContent = ann.surface_text;
    tr.appendChild(textCell);

    const actions = document.createElement('td');
    if (handlers.onPick) {
      const pick = document.createElement('button');
      pick.textContent = 'pick';
      pick.className = 'pick-btn';
      pick.addEventListener('click', (ev) => {
        ev.stopPropagation();
        handlers.onPick!(ann.ann_id);
      });
      actions.appendChild(pick);
    }
    if (handlers.onDelete) {
      const del = document.createElement('button');
      del.textContent = 'delete';
      del.className = 'delete-btn';
      del.addEventListener('click', (ev) => {
        ev.stopPropagation();
        handlers.onDelete!(ann.ann_id);
      });
      actions.appendChild(del);
    }
    tr.appendChild(actions);

    if (handlers.onRowClick) {
      tr.addEventListener('click', () => handlers.onRowClick!(ann.ann_id));
    }
    body.appendChild(tr);
  }
  table.appendChild(body);
  container.appendChild(table);
}

export interface RelationTableHandlers {
  onNodeClick?: (annId: string) => void;
  onDelete?: (relId: string) => void;
}

export function renderRelationTable(
  container: HTMLElement,
  relations: RelationPayload[],
  handlers: RelationTableHandlers = {},
): void {
  container.innerHTML = '';
  container.classList.add('relation-table');
  const table = document.createElement('table');
  const head = document.createElement('thead');
  head.innerHTML = '<tr><th>Type</th><th>Nodes</th><th></th></tr>';
  table.appendChild(head);
  const body = document.createElement('tbody');
  for (const rel of relations) {
    const tr = document.createElement('tr');
    tr.dataset.relId = rel.rel_id;

    const typeCell = document.createElement('td');
    typeCell.textContent = rel.relation_type;
    tr.appendChild(typeCell);

    const nodesCell = document.createElement('td');
    for (const node of rel.nodes) {
      const chip = document.createElement('button');
      chip.className = 'node-chip';
      chip.dataset.annId = node.ann_id;
      chip.textContent = node.role ? `${node.role}: ${node.ann_id}` : node.ann_id;
      if (handlers.onNodeClick) {
        chip.addEventListener('click', () => handlers.onNodeClick!(node.ann_id));
      }
      nodesCell.appendChild(chip);
    }
    tr.appendChild(nodesCell);

    const actions = document.createElement('td');
    if (handlers.onDelete) {
      const del = document.createElement('button');
      del.textContent = 'delete';
      del.className = 'delete-btn';
      del.addEventListener('click', () => handlers.onDelete!(rel.rel_id));
      actions.appendChild(del);
    }
    tr.appendChild(actions);
    body.appendChild(tr);
  }
  table.appendChild(body);
  container.appendChild(table);
}

/** Scroll the document view to an annotation's highlight (relation nodes
 * may live in any passage of a full-text article). */
export function scrollToAnnotation(documentRoot: HTMLElement, annId: string): boolean {
  const spans = documentRoot.querySelectorAll<HTMLElement>('span.hl');
  for (const span of spans) {
    const ids = (span.dataset.annIds ?? '').split(',');
    if (ids.includes(annId)) {
      if (typeof span.scrollIntoView === 'function') span.scrollIntoView();
      span.classList.add('flash');
      return true;
    }
  }
  return false;
}
