/** Document renderer: passage blocks with type-colored highlights and
 * agreement-cue underlines, figure captions with their images inline, a
 * passage navigator, and DOM-selection-to-span mapping.
 *
 * Overlapping and nested annotations are handled by splitting each
 * passage at every annotation boundary and tagging each run of text with
 * every annotation covering it. */

import type {
  AnnotationPayload,
  CueFlagPayload,
  DocumentPayload,
  PassagePayload,
  WorkspaceView,
} from './types.js';

export interface Segment {
  start: number; // global offsets
  end: number;
  annIds: string[];
}

export function segmentPassage(
  passage: PassagePayload,
  annotations: AnnotationPayload[],
): Segment[] {
  const pStart = passage.offset;
  const pEnd = passage.offset + passage.text.length;
  const covering = annotations.filter((a) => a.start < pEnd && a.start + a.length > pStart);
  const cuts = new Set<number>([pStart, pEnd]);
  for (const a of covering) {
    cuts.add(Math.max(pStart, a.start));
    cuts.add(Math.min(pEnd, a.start + a.length));
  }
  const points = [...cuts].sort((x, y) => x - y);
  const segments: Segment[] = [];
  for (let i = 0; i + 1 < points.length; i++) {
    const [s, e] = [points[i], points[i + 1]];
    if (s >= e) continue;
    const ids = covering
      .filter((a) => a.start <= s && e <= a.start + a.length)
      .map((a) => a.ann_id);
    segments.push({ start: s, end: e, annIds: ids });
  }
  return segments;
}

/** Underline style class for a cue value; empty string means no underline
 * (singletons and un-cued annotations render highlight color only). */
export function cueClassFor(cue: string | undefined): string {
  switch (cue) {
    case 'full_agreement':
      return 'cue-full';
    case 'concept_mismatch':
      return 'cue-concept';
    case 'span_partial':
      return 'cue-partial';
    default:
      return '';
  }
}

const CUE_SEVERITY = ['concept_mismatch', 'span_partial', 'full_agreement'];

function strongestCue(
  annIds: string[],
  overlay: Record<string, CueFlagPayload>,
): string | undefined {
  const cues = annIds
    .map((id) => overlay[id]?.cue)
    .filter((c): c is string => typeof c === 'string');
  for (const severity of CUE_SEVERITY) {
    if (cues.includes(severity)) return severity;
  }
  return undefined;
}

export interface EditorHandlers {
  onAnnotationClick?: (annIds: string[], event: MouseEvent) => void;
  onJump?: (passageIndex: number) => void;
}

function colorMap(view: WorkspaceView): Record<string, string> {
  const map: Record<string, string> = {};
  for (const t of view.schema.entity_types) map[t.name] = t.display_color;
  return map;
}

function isFigurePassage(view: WorkspaceView, index: number): boolean {
  return view.document.figures.some((f) => f.caption_passage_index === index);
}

function renderSegments(
  target: HTMLElement,
  passage: PassagePayload,
  annotations: AnnotationPayload[],
  view: WorkspaceView,
  handlers: EditorHandlers,
): void {
  const colors = colorMap(view);
  const byId = new Map(annotations.map((a) => [a.ann_id, a]));
  for (const seg of segmentPassage(passage, annotations)) {
    const text = passage.text.slice(seg.start - passage.offset, seg.end - passage.offset);
    if (seg.annIds.length === 0) {
      target.appendChild(document.createTextNode(text));
      continue;
    }
    const span = document.createElement('span');
    span.className = 'hl';
    span.dataset.annIds = seg.annIds.join(',');
    const first = byId.get(seg.annIds[0]);
    if (first && colors[first.entity_type]) {
      span.style.backgroundColor = colors[first.entity_type];
    }
    const cue = strongestCue(seg.annIds, view.cue_overlay);
    const cueClass = cueClassFor(cue);
    if (cueClass) span.classList.add(cueClass);
    span.title = seg.annIds
      .map((id) => {
        const a = byId.get(id);
        return a ? `${a.entity_type}${a.concept_id ? ' ' + a.concept_id : ''}` : id;
      })
      .join(' | ');
    span.textContent = text;
    if (handlers.onAnnotationClick) {
      span.addEventListener('click', (ev) =>
        handlers.onAnnotationClick!(seg.annIds, ev as MouseEvent),
      );
    }
    target.appendChild(span);
  }
}

export function renderDocument(
  container: HTMLElement,
  view: WorkspaceView,
  annotations: AnnotationPayload[],
  handlers: EditorHandlers = {},
): void {
  container.innerHTML = '';
  container.classList.add('document-view');
  view.document.passages.forEach((passage, index) => {
    const section = document.createElement('section');
    section.className = 'passage';
    section.dataset.index = String(index);
    section.dataset.offset = String(passage.offset);
    section.id = `passage-${index}`;
    if (passage.infons['section']) section.dataset.section = passage.infons['section'];

    if (isFigurePassage(view, index)) {
      const fig = view.document.figures.find((f) => f.caption_passage_index === index)!;
      const figure = document.createElement('figure');
      figure.className = 'doc-figure';
      if (fig.image_url) {
        const img = document.createElement('img');
        img.src = fig.image_url;
        img.alt = fig.label;
        figure.appendChild(img);
      }
      const caption = document.createElement('figcaption');
      caption.className = 'passage-text';
      caption.dataset.offset = String(passage.offset);
      renderSegments(caption, passage, annotations, view, handlers);
      figure.appendChild(caption);
      section.appendChild(figure);
    } else {
      const block = document.createElement('div');
      block.className = 'passage-text';
      block.dataset.offset = String(passage.offset);
      renderSegments(block, passage, annotations, view, handlers);
      section.appendChild(block);
    }
    container.appendChild(section);
  });
}

/** Left-side navigator: one entry per passage for full-text browsing. */
export function renderNavigator(
  container: HTMLElement,
  doc: DocumentPayload,
  currentIndex: number,
  onJump: (index: number) => void,
): void {
  container.innerHTML = '';
  container.classList.add('navigator');
  const list = document.createElement('ul');
  doc.passages.forEach((p, index) => {
    const item = document.createElement('li');
    const link = document.createElement('a');
    link.href = `#passage-${index}`;
    const section = p.infons['section'] || p.infons['section_type'] || 'passage';
    link.textContent = `${section}: ${p.text.slice(0, 32)}`;
    link.dataset.index = String(index);
    if (index === currentIndex) item.classList.add('current');
    link.addEventListener('click', (ev) => {
      ev.preventDefault();
      onJump(index);
    });
    item.appendChild(link);
    list.appendChild(item);
  });
  container.appendChild(list);
}

export interface SelectionLike {
  anchorNode: Node | null;
  anchorOffset: number;
  focusNode: Node | null;
  focusOffset: number;
}

function globalOffsetOf(node: Node, offsetInNode: number): number | null {
  let el: Node | null = node;
  while (el && !(el instanceof HTMLElement && el.classList.contains('passage-text'))) {
    el = el.parentNode;
  }
  if (!el) return null;
  const textRoot = el as HTMLElement;
  const passageOffset = Number.parseInt(textRoot.dataset.offset ?? '', 10);
  if (Number.isNaN(passageOffset)) return null;
  let acc = 0;
  const walker = document.createTreeWalker(textRoot, NodeFilter.SHOW_TEXT);
  let current = walker.nextNode();
  while (current) {
    if (current === node) return passageOffset + acc + offsetInNode;
    acc += (current.textContent ?? '').length;
    current = walker.nextNode();
  }
  // Selection anchored on an element rather than a text node.
  if (node === textRoot) return passageOffset + (offsetInNode === 0 ? 0 : acc);
  return null;
}

/** Map a DOM selection inside the rendered document to a global span.
 * Returns null for collapsed or out-of-document selections. */
export function selectionToSpan(selection: SelectionLike): { start: number; length: number } | null {
  if (!selection.anchorNode || !selection.focusNode) return null;
  const a = globalOffsetOf(selection.anchorNode, selection.anchorOffset);
  const b = globalOffsetOf(selection.focusNode, selection.focusOffset);
  if (a === null || b === null) return null;
  const start = Math.min(a, b);
  const length = Math.abs(a - b);
  if (length === 0) return null;
  return { start, length };
}
