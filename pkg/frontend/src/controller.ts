/** Editor controller: optimistic edits reconciled against the server.
 *
 * Every mutation follows the same shape: render the optimistic state
 * immediately, send the request (auto-save: there is no save button),
 * then either adopt the fresh server snapshot or roll the optimistic
 * edit back and surface the rejection. */

import { ApiClient, ApiError } from './api.js';
import {
  EditorState,
  dropPending,
  initialState,
  makePending,
  passageIndexAt,
  restorePosition,
  savePosition,
  validateSelection,
} from './state.js';
import { RelationBuilder } from './relations.js';

export class EditorController {
  state: EditorState = initialState();
  builder = new RelationBuilder();
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private storage: Storage,
    private rerender: (state: EditorState) => void,
  ) {}

  async open(workspaceId: string): Promise<void> {
    const view = await this.api.getWorkspace(workspaceId);
    this.state.view = view;
    this.state.pending = [];
    this.state.error = null;
    this.state.currentPassage = restorePosition(
      this.storage,
      workspaceId,
      view.document.passages.length,
    );
    if (!this.state.activeType && view.schema.entity_types.length) {
      this.state.activeType = view.schema.entity_types[0].name;
    }
    this.rerender(this.state);
  }

  async refresh(): Promise<void> {
    if (!this.state.view) return;
    this.state.view = await this.api.getWorkspace(this.state.view.workspace_id);
    this.rerender(this.state);
  }

  /** Poll for live updates (manager and collaborative views re-fetch). */
  startPolling(intervalMs = 3000): void {
    this.stopPolling();
    this.timer = setInterval(() => {
      void this.refresh().catch(() => undefined);
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  jumpTo(passageIndex: number): void {
    this.state.currentPassage = passageIndex;
    if (this.state.view) {
      savePosition(this.storage, this.state.view.workspace_id, passageIndex);
    }
    this.rerender(this.state);
  }

  setSelection(span: { start: number; length: number } | null): void {
    this.state.selection = span;
    this.state.error = null;
    if (span && this.state.view) {
      const violation = validateSelection(this.state.view.document, span);
      if (violation) this.state.error = violation;
    }
    this.rerender(this.state);
  }

  /** Create an annotation from the current selection and active type;
   * optionally annotate every occurrence of the selected text at once. */
  async createFromSelection(): Promise<boolean> {
    const { view, selection, activeType } = this.state;
    if (!view || !selection) {
      this.state.error = 'select some text first';
      this.rerender(this.state);
      return false;
    }
    if (!activeType) {
      this.state.error = 'choose an entity type';
      this.rerender(this.state);
      return false;
    }
    // Client-side validation mirrors the server: invalid selections are
    // reported inline and never sent.
    const violation = validateSelection(view.document, selection);
    if (violation) {
      this.state.error = violation;
      this.rerender(this.state);
      return false;
    }
    const concept = this.state.conceptId.trim() || null;
    const pending = makePending(selection, activeType, concept, view.document);
    this.state.pending.push(pending);
    this.rerender(this.state);
    try {
      if (this.state.allOccurrences) {
        await this.api.annotateAllOccurrences(view.workspace_id, {
          surface: pending.surface_text,
          entity_type: activeType,
          concept_id: concept,
        });
      } else {
        await this.api.createAnnotation(view.workspace_id, {
          start: selection.start,
          length: selection.length,
          entity_type: activeType,
          concept_id: concept,
        });
      }
      dropPending(this.state, pending.ann_id);
      this.state.selection = null;
      await this.refresh();
      return true;
    } catch (err) {
      // rollback: the optimistic highlight disappears, the violation shows
      dropPending(this.state, pending.ann_id);
      this.state.error = err instanceof ApiError ? err.message : String(err);
      this.rerender(this.state);
      return false;
    }
  }

  async deleteAnnotation(annId: string): Promise<void> {
    if (!this.state.view) return;
    try {
      await this.api.deleteAnnotation(this.state.view.workspace_id, annId);
      await this.refresh();
    } catch (err) {
      this.state.error = err instanceof ApiError ? err.message : String(err);
      this.rerender(this.state);
    }
  }

  /** Relation building: picks accumulate by clicking annotations; the
   * ninth pick is rejected client-side. */
  pickForRelation(annId: string): boolean {
    const accepted = this.builder.pick(annId);
    if (!accepted) {
      this.state.error =
        this.builder.picks.length >= 8
          ? 'relations take at most eight nodes'
          : 'annotation already picked';
    } else {
      this.state.error = null;
    }
    this.state.picks = [...this.builder.picks];
    this.rerender(this.state);
    return accepted;
  }

  async submitRelation(relationType: string, roles: string[] = []): Promise<boolean> {
    if (!this.state.view) return false;
    if (!this.builder.canSubmit()) {
      this.state.error = 'pick between two and eight annotations first';
      this.rerender(this.state);
      return false;
    }
    const nodes = this.builder.picks.map((annId, i) => ({
      ann_id: annId,
      role: roles[i] ?? '',
    }));
    try {
      await this.api.createRelation(this.state.view.workspace_id, {
        relation_type: relationType,
        nodes,
      });
      this.builder.clear();
      this.state.picks = [];
      await this.refresh();
      return true;
    } catch (err) {
      this.state.error = err instanceof ApiError ? err.message : String(err);
      this.rerender(this.state);
      return false;
    }
  }

  async setDone(done: boolean): Promise<void> {
    if (!this.state.view) return;
    await this.api.updateStatus(this.state.view.workspace_id, { done });
    await this.refresh();
  }

  async setTriage(label: string | null): Promise<void> {
    if (!this.state.view) return;
    try {
      await this.api.updateStatus(this.state.view.workspace_id, { triage_label: label });
      await this.refresh();
    } catch (err) {
      this.state.error = err instanceof ApiError ? err.message : String(err);
      this.rerender(this.state);
    }
  }
}
