import { beforeEach, describe, expect, it, vi } from 'vitest';

import { EditorController } from '../src/controller.js';
import { renderDocument } from '../src/editor.js';
import {
  RelationBuilder,
  conceptUrl,
  renderRelationTable,
  scrollToAnnotation,
} from '../src/relations.js';
import { FakeServer, figure4View } from './fixtures.js';

describe('relation builder', () => {
  it('accepts up to eight picks and rejects the ninth client-side', () => {
    const builder = new RelationBuilder();
    for (let i = 1; i <= 8; i++) {
      expect(builder.pick(`A${i}`)).toBe(true);
    }
    expect(builder.pick('A9')).toBe(false);
    expect(builder.picks.length).toBe(8);
  });

  it('rejects duplicate picks', () => {
    const builder = new RelationBuilder();
    expect(builder.pick('A1')).toBe(true);
    expect(builder.pick('A1')).toBe(false);
  });

  it('needs at least two picks to submit', () => {
    const builder = new RelationBuilder();
    builder.pick('A1');
    expect(builder.canSubmit()).toBe(false);
    builder.pick('A2');
    expect(builder.canSubmit()).toBe(true);
  });
});

describe('relation creation through the controller', () => {
  let server: FakeServer;
  let controller: EditorController;

  beforeEach(async () => {
    window.localStorage.clear();
    server = new FakeServer(figure4View());
    controller = new EditorController(server.client(), window.localStorage, () => {});
    await controller.open('ws-f4');
  });

  it('creates a relation from picks and lists it', async () => {
    controller.pickForRelation('A1');
    controller.pickForRelation('A4');
    const ok = await controller.submitRelation('gene-disease', ['gene', 'disease']);
    expect(ok).toBe(true);
    expect(server.view.relations.length).toBe(1);
    expect(server.view.relations[0].nodes).toEqual([
      { ann_id: 'A1', role: 'gene' },
      { ann_id: 'A4', role: 'disease' },
    ]);
    const table = document.createElement('div');
    renderRelationTable(table, controller.state.view!.relations);
    expect(table.querySelectorAll('tbody tr').length).toBe(1);
    expect(table.querySelectorAll('.node-chip').length).toBe(2);
  });

  it('ninth pick is refused with an explanatory error', () => {
    for (let i = 0; i < 8; i++) controller.pickForRelation(`X${i}`);
    const accepted = controller.pickForRelation('X8');
    expect(accepted).toBe(false);
    expect(controller.state.error).toContain('eight');
  });

  it('server-side violations surface as errors', async () => {
    controller.pickForRelation('A1');
    controller.pickForRelation('A4');
    server.failNext = 'node-type mismatch';
    const ok = await controller.submitRelation('gene-disease');
    expect(ok).toBe(false);
    expect(controller.state.error).toBe('node-type mismatch');
  });
});

describe('relation table navigation', () => {
  it('clicking a node scrolls the document to that annotation', () => {
    const view = figure4View();
    const docRoot = document.createElement('div');
    document.body.appendChild(docRoot);
    renderDocument(docRoot, view, view.annotations);
    const spy = vi.fn();
    for (const span of docRoot.querySelectorAll<HTMLElement>('span.hl')) {
      span.scrollIntoView = spy;
    }
    const found = scrollToAnnotation(docRoot, 'A3');
    expect(found).toBe(true);
    expect(spy).toHaveBeenCalledOnce();
    const missing = scrollToAnnotation(docRoot, 'does-not-exist');
    expect(missing).toBe(false);
  });

  it('node chips call the navigation handler', () => {
    const view = figure4View();
    view.relations = [
      {
        rel_id: 'R1', relation_type: 'gene-disease',
        nodes: [{ ann_id: 'A1', role: 'gene' }, { ann_id: 'A4', role: 'disease' }],
        annotator: 'user-self-id', updated_at: '',
      },
    ];
    const container = document.createElement('div');
    const clicked: string[] = [];
    renderRelationTable(container, view.relations, { onNodeClick: (id) => clicked.push(id) });
    (container.querySelector('.node-chip') as HTMLElement).click();
    expect(clicked).toEqual(['A1']);
  });
});

describe('concept links', () => {
  it('resolves prefixes against configured URL templates', () => {
    const templates = {
      GENE: 'https://www.ncbi.nlm.nih.gov/gene/{id}',
      MESH: 'https://meshb.nlm.nih.gov/record/ui?ui={id}',
    };
    expect(conceptUrl(templates, 'GENE:7157')).toBe('https://www.ncbi.nlm.nih.gov/gene/7157');
    expect(conceptUrl(templates, 'MESH:D001943')).toBe(
      'https://meshb.nlm.nih.gov/record/ui?ui=D001943',
    );
    expect(conceptUrl(templates, 'UNKNOWN:1')).toBeNull();
    expect(conceptUrl(templates, 'no-prefix')).toBeNull();
  });
});
