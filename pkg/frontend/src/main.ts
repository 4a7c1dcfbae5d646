/** Application shell: login, project/document lists, and the editor page
 * (navigator left, document center, entity/relation tabs right). */

import { ApiClient, ApiError } from './api.js';
import { EditorController } from './controller.js';
import { renderDocument, renderNavigator, selectionToSpan } from './editor.js';
import { DocRow, filterRows, renderDocList, rowsFromViews, sortRows } from './doclist.js';
import { renderEntityTable, renderRelationTable, scrollToAnnotation } from './relations.js';
import { visibleAnnotations } from './state.js';
import type { EditorState } from './state.js';
import type { WorkspaceView } from './types.js';

interface UiConfig {
  serverUrl: string;
  conceptUrlTemplates: Record<string, string>;
  pollMs: number;
}

const DEFAULT_CONFIG: UiConfig = {
  serverUrl: '',
  conceptUrlTemplates: {
    GENE: 'https://www.ncbi.nlm.nih.gov/gene/{id}',
    MESH: 'https://meshb.nlm.nih.gov/record/ui?ui={id}',
  },
  pollMs: 3000,
};

export function buildAppShell(root: HTMLElement): Record<string, HTMLElement> {
  root.innerHTML = `
    <header class="topbar">
      <span class="brand">corpusforge</span>
      <span id="whoami"></span>
      <span id="error-bar" class="error-bar" role="alert"></span>
    </header>
    <main class="layout">
      <aside id="left-panel"></aside>
      <section id="center-panel"></section>
      <aside id="right-panel">
        <nav class="tabs">
          <button id="tab-entities" class="active">Entities</button>
          <button id="tab-relations">Relations</button>
        </nav>
        <div id="entity-panel"></div>
        <div id="relation-panel" hidden></div>
        <div id="editor-controls"></div>
      </aside>
    </main>`;
  const byId = (id: string) => root.querySelector<HTMLElement>(`#${id}`)!;
  return {
    left: byId('left-panel'),
    center: byId('center-panel'),
    entityPanel: byId('entity-panel'),
    relationPanel: byId('relation-panel'),
    controls: byId('editor-controls'),
    errorBar: byId('error-bar'),
    whoami: byId('whoami'),
    tabEntities: byId('tab-entities'),
    tabRelations: byId('tab-relations'),
  };
}

export class App {
  api: ApiClient;
  controller: EditorController;
  panels: Record<string, HTMLElement>;
  config: UiConfig;
  docRows: DocRow[] = [];
  sortColumn: keyof DocRow | null = null;
  sortDescending = false;
  keyword = '';

  constructor(root: HTMLElement, config: Partial<UiConfig> = {}, api?: ApiClient) {
    this.config = { ...DEFAULT_CONFIG, ...config };
    this.api = api ?? new ApiClient(this.config.serverUrl);
    this.panels = buildAppShell(root);
    this.controller = new EditorController(this.api, window.localStorage, (state) =>
      this.renderEditor(state),
    );
    this.panels.tabEntities.addEventListener('click', () => this.showTab('entities'));
    this.panels.tabRelations.addEventListener('click', () => this.showTab('relations'));
    // attached once: the center element persists across re-renders
    this.panels.center.addEventListener('mouseup', () => {
      if (!this.controller.state.view) return;
      const selection = window.getSelection();
      if (selection) this.controller.setSelection(selectionToSpan(selection));
    });
  }

  showTab(which: 'entities' | 'relations'): void {
    const entities = which === 'entities';
    this.panels.entityPanel.hidden = !entities;
    this.panels.relationPanel.hidden = entities;
    this.panels.tabEntities.classList.toggle('active', entities);
    this.panels.tabRelations.classList.toggle('active', !entities);
  }

  setError(message: string | null): void {
    this.panels.errorBar.textContent = message ?? '';
  }

  // -- document list page ---------------------------------------------------

  async openRound(roundId: string): Promise<void> {
    const views = await this.api.listWorkspaces(roundId);
    this.docRows = rowsFromViews(views);
    this.renderDocListPage();
  }

  renderDocListPage(): void {
    let rows = filterRows(this.docRows, this.keyword);
    if (this.sortColumn) rows = sortRows(rows, this.sortColumn, this.sortDescending);
    renderDocList(this.panels.center, rows, {
      onOpen: (workspaceId) => void this.openWorkspace(workspaceId),
      onSort: (column) => {
        this.sortDescending = this.sortColumn === column ? !this.sortDescending : false;
        this.sortColumn = column;
        this.renderDocListPage();
      },
      onSearch: (keyword) => {
        this.keyword = keyword;
        this.renderDocListPage();
      },
    });
  }

  // -- editor page ----------------------------------------------------------

  async openWorkspace(workspaceId: string): Promise<void> {
    await this.controller.open(workspaceId);
    const view = this.controller.state.view!;
    // Live views: managers watch edits in real time (their payloads carry
    // the identity map), collaborative rounds show partners' changes;
    // both refetch on a timer.
    const isManagerView = view.identities !== undefined;
    if (view.round_kind === 'COLLABORATIVE' || isManagerView) {
      this.controller.startPolling(this.config.pollMs);
    } else {
      this.controller.stopPolling();
    }
  }

  renderEditor(state: EditorState): void {
    if (!state.view) return;
    const view = state.view;
    this.setError(state.error);
    const annotations = visibleAnnotations(state);

    renderNavigator(this.panels.left, view.document, state.currentPassage, (index) => {
      this.controller.jumpTo(index);
      const target = this.panels.center.querySelector<HTMLElement>(`#passage-${index}`);
      if (target && typeof target.scrollIntoView === 'function') target.scrollIntoView();
    });

    renderDocument(this.panels.center, view, annotations, {
      onAnnotationClick: (annIds) => {
        if (annIds.length) this.controller.pickForRelation(annIds[0]);
      },
    });

    renderEntityTable(this.panels.entityPanel, annotations, this.config.conceptUrlTemplates, {
      onRowClick: (annId) => scrollToAnnotation(this.panels.center, annId),
      onDelete: (annId) => void this.controller.deleteAnnotation(annId),
      onPick: (annId) => this.controller.pickForRelation(annId),
    });
    renderRelationTable(this.panels.relationPanel, view.relations, {
      onNodeClick: (annId) => scrollToAnnotation(this.panels.center, annId),
      onDelete: (relId) =>
        void this.api
          .deleteRelation(view.workspace_id, relId)
          .then(() => this.controller.refresh()),
    });
    this.renderControls(state);
  }

  renderControls(state: EditorState): void {
    const view = state.view!;
    const controls = this.panels.controls;
    controls.innerHTML = '';

    const typeSelect = document.createElement('select');
    typeSelect.id = 'entity-type-select';
    for (const t of view.schema.entity_types) {
      const option = document.createElement('option');
      option.value = t.name;
      option.textContent = t.name;
      if (t.name === state.activeType) option.selected = true;
      typeSelect.appendChild(option);
    }
    typeSelect.addEventListener('change', () => {
      this.controller.state.activeType = typeSelect.value;
    });
    controls.appendChild(typeSelect);

    // concept ids are typed by hand, no lookup
    const concept = document.createElement('input');
    concept.id = 'concept-input';
    concept.placeholder = 'Concept ID (manual)';
    concept.value = state.conceptId;
    concept.addEventListener('input', () => {
      this.controller.state.conceptId = concept.value;
    });
    controls.appendChild(concept);

    const allOcc = document.createElement('label');
    const allOccBox = document.createElement('input');
    allOccBox.type = 'checkbox';
    allOccBox.id = 'all-occurrences';
    allOccBox.checked = state.allOccurrences;
    allOccBox.addEventListener('change', () => {
      this.controller.state.allOccurrences = allOccBox.checked;
    });
    allOcc.appendChild(allOccBox);
    allOcc.appendChild(document.createTextNode(' all occurrences'));
    controls.appendChild(allOcc);

    const annotate = document.createElement('button');
    annotate.id = 'annotate-btn';
    annotate.textContent = 'Annotate selection';
    annotate.addEventListener('click', () => void this.controller.createFromSelection());
    controls.appendChild(annotate);

    const relTypeSelect = document.createElement('select');
    relTypeSelect.id = 'relation-type-select';
    for (const t of view.schema.relation_types) {
      const option = document.createElement('option');
      option.value = t.name;
      option.textContent = t.name;
      relTypeSelect.appendChild(option);
    }
    controls.appendChild(relTypeSelect);

    const picks = document.createElement('span');
    picks.id = 'pick-count';
    picks.textContent = `${state.picks.length} picked`;
    controls.appendChild(picks);

    const relate = document.createElement('button');
    relate.id = 'relate-btn';
    relate.textContent = 'Create relation';
    relate.addEventListener('click', () =>
      void this.controller.submitRelation(relTypeSelect.value),
    );
    controls.appendChild(relate);

    const done = document.createElement('button');
    done.id = 'done-btn';
    done.textContent = view.status.done ? 'Done (complete)' : 'Mark done';
    done.addEventListener('click', () => void this.controller.setDone(!view.status.done));
    controls.appendChild(done);

    if (view.round_kind === 'INDIVIDUAL' && view.partners) {
      const partners = document.createElement('div');
      partners.className = 'partner-labels';
      partners.textContent = view.partners.length
        ? `Partners: ${view.partners.join(', ')}`
        : 'No partners on this document';
      controls.appendChild(partners);
    }
  }
}

export function bootstrap(): void {
  const root = document.getElementById('app');
  if (!root) return;
  const app = new App(root);
  const loginBox = document.createElement('form');
  loginBox.innerHTML = `
    <input id="login-user" placeholder="user id">
    <input id="login-secret" type="password" placeholder="secret">
    <button type="submit">Sign in</button>`;
  loginBox.addEventListener('submit', (ev) => {
    ev.preventDefault();
    const user = (root.querySelector('#login-user') as HTMLInputElement).value;
    const secret = (root.querySelector('#login-secret') as HTMLInputElement).value;
    void app.api
      .login(user, secret)
      .then(async (session) => {
        app.api.setToken(session.token);
        loginBox.remove();
        const projects = await app.api.listProjects();
        const active = projects.find((p) => p.rounds.some((r) => r.status === 'ACTIVE'));
        if (active) {
          const round = active.rounds.filter((r) => r.status === 'ACTIVE').pop()!;
          await app.openRound(`${active.project_id}:${round.number}`);
        }
      })
      .catch((err) => app.setError(err instanceof ApiError ? err.message : String(err)));
  });
  root.prepend(loginBox);
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  bootstrap();
}
