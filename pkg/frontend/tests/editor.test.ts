import { beforeEach, describe, expect, it } from 'vitest';

import { EditorController } from '../src/controller.js';
import { renderDocument, selectionToSpan } from '../src/editor.js';
import { renderEntityTable } from '../src/relations.js';
import { visibleAnnotations } from '../src/state.js';
import type { EditorState } from '../src/state.js';
import { FakeServer, figure4View } from './fixtures.js';

function makeController(server: FakeServer) {
  const renders: EditorState[] = [];
  const controller = new EditorController(server.client(), window.localStorage, (state) => {
    renders.push(state);
  });
  return { controller, renders };
}

describe('annotation by selection', () => {
  let server: FakeServer;

  beforeEach(() => {
    window.localStorage.clear();
    server = new FakeServer(figure4View());
  });

  it('creates an annotation that lands in the entity table and on the server', async () => {
    const { controller } = makeController(server);
    await controller.open('ws-f4');
    // select "regulate" (offset 24, length 8) and choose the Disease type
    controller.state.activeType = 'Disease';
    controller.setSelection({ start: 24, length: 8 });
    const ok = await controller.createFromSelection();
    expect(ok).toBe(true);

    // persisted server-side
    const onServer = server.view.annotations.find((a) => a.surface_text === 'regulate');
    expect(onServer).toBeDefined();
    expect(onServer!.entity_type).toBe('Disease');

    // visible in the right-side table after re-render from the snapshot
    const table = document.createElement('div');
    renderEntityTable(table, visibleAnnotations(controller.state), {});
    const texts = [...table.querySelectorAll('td:nth-child(3)')].map((td) => td.textContent);
    expect(texts).toContain('regulate');

    // and highlighted in the document
    const docView = document.createElement('div');
    renderDocument(docView, controller.state.view!, visibleAnnotations(controller.state));
    const highlighted = [...docView.querySelectorAll('span.hl')].map((s) => s.textContent);
    expect(highlighted).toContain('regulate');
  });

  it('rejects a cross-passage selection inline, before any request', async () => {
    const { controller } = makeController(server);
    await controller.open('ws-f4');
    const requestsBefore = server.requests.length;
    controller.state.activeType = 'GENE';
    // passage 0 ends at 43; this selection straddles the boundary
    controller.setSelection({ start: 40, length: 6 });
    expect(controller.state.error).toContain('crosses a passage boundary');
    const ok = await controller.createFromSelection();
    expect(ok).toBe(false);
    const mutations = server.requests
      .slice(requestsBefore)
      .filter((r) => r.method !== 'GET');
    expect(mutations).toEqual([]);
  });

  it('rolls back the optimistic highlight when the server rejects', async () => {
    const { controller } = makeController(server);
    await controller.open('ws-f4');
    controller.state.activeType = 'GENE';
    controller.setSelection({ start: 5, length: 3 });
    server.failNext = 'duplicate annotation';
    const sizeBefore = controller.state.view!.annotations.length;
    const ok = await controller.createFromSelection();
    expect(ok).toBe(false);
    expect(controller.state.pending).toEqual([]);
    expect(controller.state.error).toBe('duplicate annotation');
    expect(visibleAnnotations(controller.state).length).toBe(sizeBefore);
  });

  it('annotates all occurrences at once when asked', async () => {
    const { controller } = makeController(server);
    await controller.open('ws-f4');
    controller.state.activeType = 'GENE';
    controller.state.allOccurrences = true;
    // "and" occurs twice in passage 0
    controller.setSelection({ start: 5, length: 3 });
    const ok = await controller.createFromSelection();
    expect(ok).toBe(true);
    const hits = server.view.annotations.filter((a) => a.surface_text === 'and');
    expect(hits.length).toBe(2);
  });

  it('remembers the reading position across sessions', async () => {
    const first = makeController(server);
    await first.controller.open('ws-f4');
    first.controller.jumpTo(1);
    const second = makeController(server);
    await second.controller.open('ws-f4');
    expect(second.controller.state.currentPassage).toBe(1);
  });
});

describe('selection mapping', () => {
  it('maps a DOM selection inside one passage to the global span', () => {
    const view = figure4View();
    const container = document.createElement('div');
    document.body.appendChild(container);
    renderDocument(container, view, view.annotations);
    // select "second" in passage 1: local offsets 2..8
    const passageOffset = view.document.passages[1].offset;
    expect(view.document.passages[1].text.slice(2, 8)).toBe('second');
    const textBlock = container.querySelectorAll<HTMLElement>('.passage-text')[1];
    const textNode = [...textBlock.childNodes].find((n) => n.nodeType === Node.TEXT_NODE)!;
    const span = selectionToSpan({
      anchorNode: textNode,
      anchorOffset: 2,
      focusNode: textNode,
      focusOffset: 8,
    });
    expect(span).toEqual({ start: passageOffset + 2, length: 6 });
  });

  it('maps selections across highlight spans by summing text nodes', () => {
    const view = figure4View();
    const container = document.createElement('div');
    renderDocument(container, view, view.annotations);
    const firstBlock = container.querySelectorAll<HTMLElement>('.passage-text')[0];
    // anchor inside the Chk1 highlight, focus in the trailing text node
    const chk1Text = [...firstBlock.querySelectorAll('span.hl')][0].firstChild!;
    const afterNode = [...firstBlock.childNodes].find(
      (n) => n.nodeType === Node.TEXT_NODE && (n.textContent ?? '').startsWith(' and'),
    )!;
    const span = selectionToSpan({
      anchorNode: chk1Text,
      anchorOffset: 0,
      focusNode: afterNode,
      focusOffset: 4,
    });
    expect(span).toEqual({ start: 0, length: 8 }); // "Chk1 and"
  });

  it('returns null for collapsed selections', () => {
    const view = figure4View();
    const container = document.createElement('div');
    renderDocument(container, view, view.annotations);
    const block = container.querySelector<HTMLElement>('.passage-text')!;
    const node = block.firstChild!;
    expect(
      selectionToSpan({ anchorNode: node, anchorOffset: 1, focusNode: node, focusOffset: 1 }),
    ).toBeNull();
  });
});
