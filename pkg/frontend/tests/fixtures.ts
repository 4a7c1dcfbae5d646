/** Shared fixtures: a Figure-4-style workspace view, a full-text view with
 * figures, and a fake server that speaks the API wire protocol over an
 * in-memory workspace (so "persisted server-side" is checkable). */

import type {
  AnnotationPayload,
  RelationPayload,
  SchemaPayload,
  WorkspaceView,
} from '../src/types.js';
import { ApiClient, type FetchLike } from '../src/api.js';

export const SCHEMA: SchemaPayload = {
  entity_types: [
    { name: 'GENE', display_color: '#ffd43b' },
    { name: 'Disease', display_color: '#ff8787' },
  ],
  relation_types: [
    { name: 'gene-disease', node_types: ['GENE', 'Disease'], min_arity: 2, max_arity: 2 },
    { name: 'association', node_types: null, min_arity: 2, max_arity: 8 },
  ],
  triage_labels: ['relevant', 'irrelevant'],
};

// passage 0: "Chk1 and Wee1 and Cdc25 regulate mitosis. "  (43 chars)
// passage 1: "A second passage about genes. "                (30 chars)
export function figure4View(): WorkspaceView {
  const text0 = 'Chk1 and Wee1 and Cdc25 regulate mitosis. ';
  const text1 = 'A second passage about genes. ';
  const annotations: AnnotationPayload[] = [
    {
      ann_id: 'A1', start: 0, length: 4, surface_text: 'Chk1', entity_type: 'GENE',
      concept_id: 'GENE:1111', annotator: 'user-self-id', updated_at: '',
    },
    {
      ann_id: 'A2', start: 9, length: 4, surface_text: 'Wee1', entity_type: 'GENE',
      concept_id: 'GENE:7465', annotator: 'user-self-id', updated_at: '',
    },
    {
      ann_id: 'A3', start: 18, length: 5, surface_text: 'Cdc25', entity_type: 'GENE',
      concept_id: 'GENE:993', annotator: 'user-self-id', updated_at: '',
    },
    {
      ann_id: 'A4', start: 33, length: 7, surface_text: 'mitosis', entity_type: 'Disease',
      concept_id: null, annotator: 'user-self-id', updated_at: '',
    },
  ];
  return {
    workspace_id: 'ws-f4',
    project_id: 'p-1',
    round_number: 2,
    round_kind: 'INDIVIDUAL',
    round_status: 'ACTIVE',
    doc_id: 'doc-f4',
    owner: 'user-self-id',
    document: {
      doc_id: 'doc-f4',
      metadata: { title: 'Checkpoint kinases' },
      passages: [
        { offset: 0, text: text0, infons: { section: 'paragraph' } },
        { offset: text0.length, text: text1, infons: { section: 'paragraph' } },
      ],
      figures: [],
    },
    annotations,
    relations: [],
    status: {
      triage_label: null, done: false, annotation_count: 4, relation_count: 0,
      last_update: '2026-01-01T00:00:00+00:00',
    },
    cue_overlay: {
      A1: { cue: 'full_agreement', partners: { 'Annotator B': 'STRICT' } },
      A2: {
        cue: 'concept_mismatch',
        partners: { 'Annotator B': 'SPAN_TYPE' },
        variants: [
          { partner: 'Annotator B', start: 9, length: 4, entity_type: 'GENE',
            concept_id: 'GENE:0000', level: 'SPAN_TYPE' },
        ],
      },
      A3: { cue: 'singleton', partners: { 'Annotator B': 'none' } },
      A4: { cue: 'span_partial', partners: { 'Annotator B': 'OVERLAP_TYPE' } },
    },
    schema: SCHEMA,
    partners: ['Annotator B'],
  };
}

export function fullTextView(): WorkspaceView {
  const passages = [
    { offset: 0, text: 'Full text mining corpus study. ', infons: { section: 'title' } },
    { offset: 31, text: 'Intro paragraph about genes. ', infons: { section: 'paragraph' } },
    {
      offset: 60, text: 'Figure 1. Workflow overview. ',
      infons: { section_type: 'fig_caption', file: 'bin/fig1.jpg', fig_label: 'Figure 1' },
    },
    { offset: 89, text: 'Methods follow. ', infons: { section: 'paragraph' } },
    {
      offset: 105, text: 'Figure 2. Agreement levels. ',
      infons: { section_type: 'fig_caption', file: 'bin/fig2.jpg', fig_label: 'Figure 2' },
    },
  ];
  return {
    workspace_id: 'ws-ft',
    project_id: 'p-1',
    round_number: 1,
    round_kind: 'INDIVIDUAL',
    round_status: 'ACTIVE',
    doc_id: 'PMC0001',
    owner: 'user-self-id',
    document: {
      doc_id: 'PMC0001',
      metadata: { title: 'Full text mining corpus study.' },
      passages,
      figures: [
        { label: 'Figure 1', caption_passage_index: 2, image_url: 'bin/fig1.jpg' },
        { label: 'Figure 2', caption_passage_index: 4, image_url: 'bin/fig2.jpg' },
      ],
    },
    annotations: [],
    relations: [],
    status: {
      triage_label: null, done: false, annotation_count: 0, relation_count: 0,
      last_update: '',
    },
    cue_overlay: {},
    schema: SCHEMA,
    partners: ['Annotator A'],
  };
}

/** Minimal in-memory server honoring the workspace endpoints the editor
 * uses; state mutates exactly like the real service so round trips are
 * meaningful. */
export class FakeServer {
  view: WorkspaceView;
  requests: { method: string; path: string; body: unknown }[] = [];
  failNext: string | null = null;
  private seq = 100;

  constructor(view: WorkspaceView) {
    this.view = view;
  }

  private docText(): string {
    return this.view.document.passages.map((p) => p.text).join('');
  }

  private spanViolation(start: number, length: number): string | null {
    if (length < 1) return 'span length must be >= 1';
    if (start < 0 || start + length > this.docText().length) return 'span out of range';
    for (const p of this.view.document.passages) {
      const end = p.offset + p.text.length;
      if (p.offset <= start && start < end) {
        return start + length <= end ? null : 'span crosses passage boundary';
      }
    }
    return 'span in no passage';
  }

  fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? 'GET';
    const path = url.replace(/^.*\/api\/v1/, '');
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.requests.push({ method, path, body });

    const json = (status: number, data: unknown) =>
      new Response(JSON.stringify(data), {
        status,
        headers: { 'Content-Type': 'application/json' },
      });

    if (this.failNext) {
      const message = this.failNext;
      this.failNext = null;
      return json(400, { error: message });
    }

    if (method === 'GET' && path === `/workspaces/${this.view.workspace_id}`) {
      return json(200, this.view);
    }
    if (method === 'POST' && path === `/workspaces/${this.view.workspace_id}/annotations`) {
      const violation = this.spanViolation(body.start, body.length);
      if (violation) return json(400, { error: violation });
      const ann: AnnotationPayload = {
        ann_id: `S${++this.seq}`,
        start: body.start,
        length: body.length,
        surface_text: this.docText().slice(body.start, body.start + body.length),
        entity_type: body.entity_type,
        concept_id: body.concept_id ?? null,
        annotator: this.view.owner,
        updated_at: 'now',
      };
      this.view.annotations.push(ann);
      this.view.status.annotation_count = this.view.annotations.length;
      return json(201, ann);
    }
    if (
      method === 'POST' &&
      path === `/workspaces/${this.view.workspace_id}/annotations/all-occurrences`
    ) {
      const text = this.docText();
      const created: AnnotationPayload[] = [];
      let at = text.indexOf(body.surface);
      while (at !== -1) {
        if (
          this.spanViolation(at, body.surface.length) === null &&
          !this.view.annotations.some(
            (a) =>
              a.start === at &&
              a.length === body.surface.length &&
              a.entity_type === body.entity_type &&
              a.concept_id === (body.concept_id ?? null),
          )
        ) {
          const ann: AnnotationPayload = {
            ann_id: `S${++this.seq}`,
            start: at,
            length: body.surface.length,
            surface_text: body.surface,
            entity_type: body.entity_type,
            concept_id: body.concept_id ?? null,
            annotator: this.view.owner,
            updated_at: 'now',
          };
          this.view.annotations.push(ann);
          created.push(ann);
        }
        at = text.indexOf(body.surface, at + 1);
      }
      this.view.status.annotation_count = this.view.annotations.length;
      return json(201, { created });
    }
    const annDelete = path.match(
      new RegExp(`^/workspaces/${this.view.workspace_id}/annotations/(.+)$`),
    );
    if (method === 'DELETE' && annDelete) {
      const annId = decodeURIComponent(annDelete[1]);
      this.view.annotations = this.view.annotations.filter((a) => a.ann_id !== annId);
      this.view.relations = this.view.relations.filter(
        (r) => !r.nodes.some((n) => n.ann_id === annId),
      );
      this.view.status.annotation_count = this.view.annotations.length;
      return json(200, { deleted: annId, cascaded_relations: [] });
    }
    if (method === 'POST' && path === `/workspaces/${this.view.workspace_id}/relations`) {
      if (body.nodes.length < 2 || body.nodes.length > 8) {
        return json(400, { error: 'relation arity must be 2..8' });
      }
      const rel: RelationPayload = {
        rel_id: `R${++this.seq}`,
        relation_type: body.relation_type,
        nodes: body.nodes,
        annotator: this.view.owner,
        updated_at: 'now',
      };
      this.view.relations.push(rel);
      this.view.status.relation_count = this.view.relations.length;
      return json(201, rel);
    }
    if (method === 'PATCH' && path === `/workspaces/${this.view.workspace_id}/status`) {
      if ('done' in body) this.view.status.done = body.done;
      if ('triage_label' in body) this.view.status.triage_label = body.triage_label;
      return json(200, this.view.status);
    }
    return json(404, { error: `no route ${method} ${path}` });
  };

  client(): ApiClient {
    return new ApiClient('http://fake', 'token', this.fetchFn);
  }
}
