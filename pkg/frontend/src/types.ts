/** Wire payloads of the corpusforge HTTP API (JSON bodies under /api/v1). */

export interface PassagePayload {
  offset: number;
  text: string;
  infons: Record<string, string>;
}

export interface FigurePayload {
  label: string;
  caption_passage_index: number;
  image_url: string | null;
}

export interface DocumentPayload {
  doc_id: string;
  metadata: Record<string, string>;
  passages: PassagePayload[];
  figures: FigurePayload[];
}

export interface AnnotationPayload {
  ann_id: string;
  start: number;
  length: number;
  surface_text: string;
  entity_type: string;
  concept_id: string | null;
  annotator: string;
  updated_at: string;
  infons?: Record<string, string>;
}

export interface RelationNodePayload {
  ann_id: string;
  role: string;
}

export interface RelationPayload {
  rel_id: string;
  relation_type: string;
  nodes: RelationNodePayload[];
  annotator: string;
  updated_at: string;
}

export interface VariantPayload {
  partner: string;
  start: number;
  length: number;
  entity_type: string;
  concept_id: string | null;
  level: string;
}

export interface CueFlagPayload {
  cue: string; // full_agreement | concept_mismatch | span_partial | singleton
  partners: Record<string, string>;
  variants?: VariantPayload[];
}

export interface StatusPayload {
  triage_label: string | null;
  done: boolean;
  annotation_count: number;
  relation_count: number;
  last_update: string;
}

export interface EntityTypePayload {
  name: string;
  display_color: string;
}

export interface RelationTypePayload {
  name: string;
  node_types: string[] | null;
  min_arity: number;
  max_arity: number;
}

export interface SchemaPayload {
  entity_types: EntityTypePayload[];
  relation_types: RelationTypePayload[];
  triage_labels: string[];
}

export interface WorkspaceView {
  workspace_id: string;
  project_id: string;
  round_number: number;
  round_kind: string; // INDIVIDUAL | COLLABORATIVE
  round_status: string;
  doc_id: string;
  owner: string;
  document: DocumentPayload;
  annotations: AnnotationPayload[];
  relations: RelationPayload[];
  status: StatusPayload;
  cue_overlay: Record<string, CueFlagPayload>;
  schema: SchemaPayload;
  partners?: string[]; // pseudonym labels (individual rounds)
  identities?: Record<string, string>; // manager views only
  participants?: string[]; // collaborative rounds
}

export interface ProjectSummary {
  project_id: string;
  name: string;
  status: string;
  document_count: number;
  documents: string[];
  rounds: { number: number; kind: string; status: string }[];
  role: string | null;
  schema: SchemaPayload;
}
