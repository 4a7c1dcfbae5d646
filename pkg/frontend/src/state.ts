/** Editor state: a pure function of the last server snapshot plus pending
 * optimistic edits.  A hard refresh therefore reproduces the same screen
 * minus anything not yet acknowledged by the server. */

import type { AnnotationPayload, DocumentPayload, WorkspaceView } from './types.js';

export interface SpanSelection {
  start: number;
  length: number;
}

export interface EditorState {
  view: WorkspaceView | null;
  currentPassage: number;
  selection: SpanSelection | null;
  activeType: string | null;
  conceptId: string;
  allOccurrences: boolean;
  picks: string[]; // annotation ids picked for a relation in progress
  pending: AnnotationPayload[]; // optimistic, ids prefixed "tmp-"
  error: string | null;
}

export function initialState(): EditorState {
  return {
    view: null,
    currentPassage: 0,
    selection: null,
    activeType: null,
    conceptId: '',
    allOccurrences: false,
    picks: [],
    pending: [],
    error: null,
  };
}

let tempCounter = 0;

export function makePending(
  span: SpanSelection,
  entityType: string,
  conceptId: string | null,
  doc: DocumentPayload,
): AnnotationPayload {
  tempCounter += 1;
  return {
    ann_id: `tmp-${tempCounter}`,
    start: span.start,
    length: span.length,
    surface_text: documentText(doc).slice(span.start, span.start + span.length),
    entity_type: entityType,
    concept_id: conceptId,
    annotator: 'you',
    updated_at: '',
  };
}

export function documentText(doc: DocumentPayload): string {
  return doc.passages.map((p) => p.text).join('');
}

/** Server snapshot merged with optimistic edits, the single source for
 * rendering. */
export function visibleAnnotations(state: EditorState): AnnotationPayload[] {
  if (!state.view) return [...state.pending];
  return [...state.view.annotations, ...state.pending];
}

export function dropPending(state: EditorState, tempId: string): void {
  state.pending = state.pending.filter((a) => a.ann_id !== tempId);
}

/** Mirror of the server's span rule: inside the document and inside one
 * passage.  Returns null when valid, else the violated rule, so invalid
 * selections are rejected before any request is made. */
export function validateSelection(doc: DocumentPayload, span: SpanSelection): string | null {
  if (span.length < 1) return 'selection is empty';
  if (span.start < 0) return 'selection starts before the document';
  const total = documentText(doc).length;
  if (span.start + span.length > total) return 'selection runs past the document';
  for (const p of doc.passages) {
    const end = p.offset + p.text.length;
    if (p.offset <= span.start && span.start < end) {
      if (span.start + span.length > end) {
        return 'selection crosses a passage boundary';
      }
      return null;
    }
  }
  return 'selection falls in no passage';
}

export function passageIndexAt(doc: DocumentPayload, offset: number): number {
  for (let i = 0; i < doc.passages.length; i++) {
    const p = doc.passages[i];
    if (p.offset <= offset && offset < p.offset + p.text.length) return i;
  }
  return 0;
}

// -- reading-position persistence (remembers the paragraph across sessions)

function positionKey(workspaceId: string): string {
  return `corpusforge.position.${workspaceId}`;
}

export function savePosition(storage: Storage, workspaceId: string, passageIndex: number): void {
  storage.setItem(positionKey(workspaceId), String(passageIndex));
}

export function restorePosition(storage: Storage, workspaceId: string, passageCount: number): number {
  const raw = storage.getItem(positionKey(workspaceId));
  if (raw === null) return 0;
  const index = Number.parseInt(raw, 10);
  if (Number.isNaN(index) || index < 0 || index >= passageCount) return 0;
  return index;
}
