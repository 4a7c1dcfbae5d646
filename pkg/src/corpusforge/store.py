"""Embedded single-file relational store (SQLite).

The store is write-through: every acknowledged mutation commits before the
operation returns, so a process kill after any acknowledged edit loses
nothing.  BioC export/import remains the interchange format; this file is
never shipped.

Schema (one row per domain fact; nested value objects as JSON columns):

    users(user_id PK, display_name, role, secret)
    sessions(token PK, user_id, expires_at)
    projects(project_id PK, name, status, schema_json)
    project_members(project_id, user_id, role)
    documents(project_id, doc_id, position, metadata_json, passages_json,
              figures_json, seed_annotations_json, seed_relations_json)
    rounds(project_id, number, kind, status, report_json, warnings_json)
    assignments(project_id, round_number, doc_id, user_id, pseudonym)
    workspaces(workspace_id PK, project_id, round_number, doc_id, owner,
               triage_label, done, annotation_count, relation_count,
               last_update)
    annotations(workspace_id, ann_id, start, length, surface_text,
                entity_type, concept_id, annotator, updated_at, infons_json)
    relations(workspace_id, rel_id, relation_type, nodes_json, annotator,
              updated_at, infons_json)
    overlays(workspace_id, item_id, flag_json)
"""

from __future__ import annotations

import json
import sqlite3
import threading
from contextlib import contextmanager
from pathlib import Path

from .model import (
    Annotation,
    CueFlag,
    Document,
    DocumentStatus,
    FigureRef,
    Passage,
    Relation,
    Workspace,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    display_name TEXT NOT NULL,
    role TEXT NOT NULL,
    secret TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user_id TEXT NOT NULL,
    expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS projects (
    project_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    status TEXT NOT NULL,
    schema_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS project_members (
    project_id TEXT NOT NULL,
    user_id TEXT NOT NULL,
    role TEXT NOT NULL,
    PRIMARY KEY (project_id, user_id)
);
CREATE TABLE IF NOT EXISTS documents (
    project_id TEXT NOT NULL,
    doc_id TEXT NOT NULL,
    position INTEGER NOT NULL,
    metadata_json TEXT NOT NULL,
    passages_json TEXT NOT NULL,
    figures_json TEXT NOT NULL,
    seed_annotations_json TEXT NOT NULL,
    seed_relations_json TEXT NOT NULL,
    PRIMARY KEY (project_id, doc_id)
);
CREATE TABLE IF NOT EXISTS rounds (
    project_id TEXT NOT NULL,
    number INTEGER NOT NULL,
    kind TEXT NOT NULL,
    status TEXT NOT NULL,
    report_json TEXT,
    warnings_json TEXT,
    PRIMARY KEY (project_id, number)
);
CREATE TABLE IF NOT EXISTS assignments (
    project_id TEXT NOT NULL,
    round_number INTEGER NOT NULL,
    doc_id TEXT NOT NULL,
    user_id TEXT NOT NULL,
    PRIMARY KEY (project_id, round_number, doc_id, user_id)
);
CREATE TABLE IF NOT EXISTS pseudonyms (
    project_id TEXT NOT NULL,
    round_number INTEGER NOT NULL,
    doc_id TEXT NOT NULL,
    user_id TEXT NOT NULL,
    label TEXT NOT NULL,
    PRIMARY KEY (project_id, round_number, doc_id, user_id)
);
CREATE TABLE IF NOT EXISTS workspaces (
    workspace_id TEXT PRIMARY KEY,
    project_id TEXT NOT NULL,
    round_number INTEGER NOT NULL,
    doc_id TEXT NOT NULL,
    owner TEXT NOT NULL,
    triage_label TEXT,
    done INTEGER NOT NULL DEFAULT 0,
    annotation_count INTEGER NOT NULL DEFAULT 0,
    relation_count INTEGER NOT NULL DEFAULT 0,
    last_update TEXT NOT NULL DEFAULT '',
    UNIQUE (project_id, round_number, doc_id, owner)
);
CREATE TABLE IF NOT EXISTS annotations (
    workspace_id TEXT NOT NULL,
    ann_id TEXT NOT NULL,
    start INTEGER NOT NULL,
    length INTEGER NOT NULL,
    surface_text TEXT NOT NULL,
    entity_type TEXT NOT NULL,
    concept_id TEXT,
    annotator TEXT NOT NULL,
    updated_at TEXT NOT NULL,
    infons_json TEXT NOT NULL DEFAULT '{}',
    PRIMARY KEY (workspace_id, ann_id)
);
CREATE TABLE IF NOT EXISTS relations (
    workspace_id TEXT NOT NULL,
    rel_id TEXT NOT NULL,
    relation_type TEXT NOT NULL,
    nodes_json TEXT NOT NULL,
    annotator TEXT NOT NULL,
    updated_at TEXT NOT NULL,
    infons_json TEXT NOT NULL DEFAULT '{}',
    PRIMARY KEY (workspace_id, rel_id)
);
CREATE TABLE IF NOT EXISTS overlays (
    workspace_id TEXT NOT NULL,
    item_id TEXT NOT NULL,
    flag_json TEXT NOT NULL,
    PRIMARY KEY (workspace_id, item_id)
);
"""


class Store:
    """Write-through SQLite wrapper.  One connection, serialized by a lock;
    callers group multi-row mutations with the transaction() context so a
    whole operation commits or rolls back atomically."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.RLock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    @contextmanager
    def transaction(self):
        with self._lock:
            try:
                yield self._conn
                self._conn.commit()
            except Exception:
                self._conn.rollback()
                raise

    def _rows(self, sql: str, args: tuple = ()) -> list[sqlite3.Row]:
        with self._lock:
            return self._conn.execute(sql, args).fetchall()

    # -- users / sessions ---------------------------------------------------

    def save_user(self, user_id: str, display_name: str, role: str, secret: str) -> None:
        with self.transaction() as c:
            c.execute(
                "INSERT OR REPLACE INTO users VALUES (?,?,?,?)",
                (user_id, display_name, role, secret),
            )

    def load_users(self) -> list[sqlite3.Row]:
        return self._rows("SELECT * FROM users ORDER BY user_id")

    def save_session(self, token: str, user_id: str, expires_at: str) -> None:
        with self.transaction() as c:
            c.execute("INSERT OR REPLACE INTO sessions VALUES (?,?,?)", (token, user_id, expires_at))

    def load_sessions(self) -> list[sqlite3.Row]:
        return self._rows("SELECT * FROM sessions")

    def delete_session(self, token: str) -> None:
        with self.transaction() as c:
            c.execute("DELETE FROM sessions WHERE token = ?", (token,))

    # -- projects -----------------------------------------------------------

    def save_project(self, project_id: str, name: str, status: str, schema_json: dict) -> None:
        with self.transaction() as c:
            c.execute(
                "INSERT OR REPLACE INTO projects VALUES (?,?,?,?)",
                (project_id, name, status, json.dumps(schema_json)),
            )

    def set_project_status(self, project_id: str, status: str) -> None:
        with self.transaction() as c:
            c.execute("UPDATE projects SET status = ? WHERE project_id = ?", (status, project_id))

    def save_member(self, project_id: str, user_id: str, role: str) -> None:
        with self.transaction() as c:
            c.execute(
                "INSERT OR REPLACE INTO project_members VALUES (?,?,?)",
                (project_id, user_id, role),
            )

    def save_document(
        self,
        project_id: str,
        doc: Document,
        position: int,
        seed_annotations: list[Annotation],
        seed_relations: list[Relation],
    ) -> None:
        with self.transaction() as c:
            c.execute(
                "INSERT INTO documents VALUES (?,?,?,?,?,?,?,?)",
                (
                    project_id,
                    doc.doc_id,
                    position,
                    json.dumps(doc.metadata),
                    json.dumps(
                        [{"offset": p.offset, "text": p.text, "infons": p.infons}
                         for p in doc.passages]
                    ),
                    json.dumps(
                        [{"label": f.label, "caption_passage_index": f.caption_passage_index,
                          "image_url": f.image_url} for f in doc.figures]
                    ),
                    json.dumps([a.to_json() for a in seed_annotations]),
                    json.dumps([r.to_json() for r in seed_relations]),
                ),
            )

    def save_round(self, project_id: str, number: int, kind: str, status: str,
                   report_json: dict | None = None, warnings_json: list | None = None) -> None:
        with self.transaction() as c:
            c.execute(
                "INSERT OR REPLACE INTO rounds VALUES (?,?,?,?,?,?)",
                (
                    project_id, number, kind, status,
                    json.dumps(report_json) if report_json is not None else None,
                    json.dumps(warnings_json) if warnings_json is not None else None,
                ),
            )

    def save_round_bundle(
        self,
        project_id: str,
        number: int,
        kind: str,
        status: str,
        assignment_rows: list[tuple[str, str]],  # (doc_id, user_id)
        pseudonym_rows: list[tuple[str, str, str]],  # (doc_id, user_id, label)
        workspaces: list[Workspace],
        project_status: str | None = None,
    ) -> None:
        """Persist a freshly started round atomically: the round row, its
        assignments and pseudonym labels, and every seeded workspace commit
        together or not at all (a round must never exist half-seeded on
        disk)."""
        with self.transaction() as c:
            c.execute(
                "INSERT OR REPLACE INTO rounds VALUES (?,?,?,?,?,?)",
                (project_id, number, kind, status, None, None),
            )
            for doc_id, user_id in assignment_rows:
                c.execute(
                    "INSERT OR REPLACE INTO assignments VALUES (?,?,?,?)",
                    (project_id, number, doc_id, user_id),
                )
            for doc_id, user_id, label in pseudonym_rows:
                c.execute(
                    "INSERT OR REPLACE INTO pseudonyms VALUES (?,?,?,?,?)",
                    (project_id, number, doc_id, user_id, label),
                )
            for ws in workspaces:
                self._put_workspace_row(c, project_id, ws)
                for ann in ws.annotations.values():
                    self._put_annotation_row(c, ws.workspace_id, ann)
                for rel in ws.relations.values():
                    self._put_relation_row(c, ws.workspace_id, rel)
                for item_id, flag in ws.cue_overlay.items():
                    c.execute(
                        "INSERT INTO overlays VALUES (?,?,?)",
                        (ws.workspace_id, item_id, json.dumps(flag.to_json())),
                    )
            if project_status is not None:
                c.execute(
                    "UPDATE projects SET status = ? WHERE project_id = ?",
                    (project_status, project_id),
                )

    # -- workspaces ----------------------------------------------------------

    def save_workspace(self, project_id: str, ws: Workspace) -> None:
        """Persist a whole workspace (metadata, annotations, relations,
        overlay) in one transaction; used at creation/seeding time."""
        with self.transaction() as c:
            self._put_workspace_row(c, project_id, ws)
            c.execute("DELETE FROM annotations WHERE workspace_id = ?", (ws.workspace_id,))
            c.execute("DELETE FROM relations WHERE workspace_id = ?", (ws.workspace_id,))
            c.execute("DELETE FROM overlays WHERE workspace_id = ?", (ws.workspace_id,))
            for ann in ws.annotations.values():
                self._put_annotation_row(c, ws.workspace_id, ann)
            for rel in ws.relations.values():
                self._put_relation_row(c, ws.workspace_id, rel)
            for item_id, flag in ws.cue_overlay.items():
                c.execute(
                    "INSERT INTO overlays VALUES (?,?,?)",
                    (ws.workspace_id, item_id, json.dumps(flag.to_json())),
                )

    @staticmethod
    def _put_workspace_row(c, project_id: str, ws: Workspace) -> None:
        c.execute(
            "INSERT OR REPLACE INTO workspaces VALUES (?,?,?,?,?,?,?,?,?,?)",
            (
                ws.workspace_id, project_id, ws.round_number, ws.doc_id, ws.owner,
                ws.status.triage_label, int(ws.status.done),
                ws.status.annotation_count, ws.status.relation_count,
                ws.status.last_update,
            ),
        )

    @staticmethod
    def _put_annotation_row(c, workspace_id: str, ann: Annotation) -> None:
        c.execute(
            "INSERT OR REPLACE INTO annotations VALUES (?,?,?,?,?,?,?,?,?,?)",
            (
                workspace_id, ann.ann_id, ann.span.start, ann.span.length,
                ann.surface_text, ann.entity_type, ann.concept_id,
                ann.annotator, ann.updated_at, json.dumps(ann.infons),
            ),
        )

    @staticmethod
    def _put_relation_row(c, workspace_id: str, rel: Relation) -> None:
        c.execute(
            "INSERT OR REPLACE INTO relations VALUES (?,?,?,?,?,?,?)",
            (
                workspace_id, rel.rel_id, rel.relation_type,
                json.dumps([{"ann_id": n.ann_id, "role": n.role} for n in rel.nodes]),
                rel.annotator, rel.updated_at, json.dumps(rel.infons),
            ),
        )

    def save_annotation(self, project_id: str, ws: Workspace, ann: Annotation) -> None:
        with self.transaction() as c:
            self._put_annotation_row(c, ws.workspace_id, ann)
            self._put_workspace_row(c, project_id, ws)

    def delete_annotation(self, project_id: str, ws: Workspace, ann_id: str,
                          cascaded_rel_ids: list[str]) -> None:
        with self.transaction() as c:
            c.execute(
                "DELETE FROM annotations WHERE workspace_id = ? AND ann_id = ?",
                (ws.workspace_id, ann_id),
            )
            c.execute(
                "DELETE FROM overlays WHERE workspace_id = ? AND item_id = ?",
                (ws.workspace_id, ann_id),
            )
            for rel_id in cascaded_rel_ids:
                c.execute(
                    "DELETE FROM relations WHERE workspace_id = ? AND rel_id = ?",
                    (ws.workspace_id, rel_id),
                )
            self._put_workspace_row(c, project_id, ws)

    def save_annotations(self, project_id: str, ws: Workspace, anns: list[Annotation]) -> None:
        with self.transaction() as c:
            for ann in anns:
                self._put_annotation_row(c, ws.workspace_id, ann)
            self._put_workspace_row(c, project_id, ws)

    def save_relation(self, project_id: str, ws: Workspace, rel: Relation) -> None:
        with self.transaction() as c:
            self._put_relation_row(c, ws.workspace_id, rel)
            self._put_workspace_row(c, project_id, ws)

    def delete_relation(self, project_id: str, ws: Workspace, rel_id: str) -> None:
        with self.transaction() as c:
            c.execute(
                "DELETE FROM relations WHERE workspace_id = ? AND rel_id = ?",
                (ws.workspace_id, rel_id),
            )
            c.execute(
                "DELETE FROM overlays WHERE workspace_id = ? AND item_id = ?",
                (ws.workspace_id, rel_id),
            )
            self._put_workspace_row(c, project_id, ws)

    def save_workspace_status(self, project_id: str, ws: Workspace) -> None:
        with self.transaction() as c:
            self._put_workspace_row(c, project_id, ws)

    # -- full reload ----------------------------------------------------------

    def load_workspaces(self, project_id: str) -> list[Workspace]:
        out = []
        for row in self._rows(
            "SELECT * FROM workspaces WHERE project_id = ? ORDER BY workspace_id", (project_id,)
        ):
            ws = Workspace(
                workspace_id=row["workspace_id"],
                round_number=row["round_number"],
                doc_id=row["doc_id"],
                owner=row["owner"],
                status=DocumentStatus(
                    triage_label=row["triage_label"],
                    done=bool(row["done"]),
                    annotation_count=row["annotation_count"],
                    relation_count=row["relation_count"],
                    last_update=row["last_update"],
                ),
            )
            for a in self._rows(
                "SELECT * FROM annotations WHERE workspace_id = ?", (ws.workspace_id,)
            ):
                ann = Annotation.from_json(
                    {
                        "ann_id": a["ann_id"],
                        "start": a["start"],
                        "length": a["length"],
                        "surface_text": a["surface_text"],
                        "entity_type": a["entity_type"],
                        "concept_id": a["concept_id"],
                        "annotator": a["annotator"],
                        "updated_at": a["updated_at"],
                        "infons": json.loads(a["infons_json"]),
                    }
                )
                ws.annotations[ann.ann_id] = ann
            for r in self._rows(
                "SELECT * FROM relations WHERE workspace_id = ?", (ws.workspace_id,)
            ):
                rel = Relation.from_json(
                    {
                        "rel_id": r["rel_id"],
                        "relation_type": r["relation_type"],
                        "nodes": json.loads(r["nodes_json"]),
                        "annotator": r["annotator"],
                        "updated_at": r["updated_at"],
                        "infons": json.loads(r["infons_json"]),
                    }
                )
                ws.relations[rel.rel_id] = rel
            for o in self._rows(
                "SELECT * FROM overlays WHERE workspace_id = ?", (ws.workspace_id,)
            ):
                ws.cue_overlay[o["item_id"]] = CueFlag.from_json(json.loads(o["flag_json"]))
            out.append(ws)
        return out

    def load_documents(self, project_id: str) -> list[tuple[Document, list[Annotation], list[Relation]]]:
        out = []
        for row in self._rows(
            "SELECT * FROM documents WHERE project_id = ? ORDER BY position", (project_id,)
        ):
            doc = Document(
                doc_id=row["doc_id"],
                metadata=json.loads(row["metadata_json"]),
                passages=[
                    Passage(p["offset"], p["text"], p["infons"])
                    for p in json.loads(row["passages_json"])
                ],
                figures=[
                    FigureRef(f["label"], f["caption_passage_index"], f["image_url"])
                    for f in json.loads(row["figures_json"])
                ],
            )
            seeds = [Annotation.from_json(a) for a in json.loads(row["seed_annotations_json"])]
            seed_rels = [Relation.from_json(r) for r in json.loads(row["seed_relations_json"])]
            out.append((doc, seeds, seed_rels))
        return out

    def load_projects(self) -> list[sqlite3.Row]:
        return self._rows("SELECT * FROM projects ORDER BY project_id")

    def load_members(self, project_id: str) -> list[sqlite3.Row]:
        return self._rows(
            "SELECT * FROM project_members WHERE project_id = ? ORDER BY user_id", (project_id,)
        )

    def load_rounds(self, project_id: str) -> list[sqlite3.Row]:
        return self._rows(
            "SELECT * FROM rounds WHERE project_id = ? ORDER BY number", (project_id,)
        )

    def load_assignments(self, project_id: str, round_number: int) -> list[sqlite3.Row]:
        return self._rows(
            "SELECT * FROM assignments WHERE project_id = ? AND round_number = ? "
            "ORDER BY doc_id, user_id",
            (project_id, round_number),
        )

    def load_pseudonyms(self, project_id: str, round_number: int) -> list[sqlite3.Row]:
        return self._rows(
            "SELECT * FROM pseudonyms WHERE project_id = ? AND round_number = ? "
            "ORDER BY doc_id, user_id",
            (project_id, round_number),
        )
