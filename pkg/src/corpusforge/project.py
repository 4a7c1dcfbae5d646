"""Project life cycle: projects, rounds, anonymized assignment, workspace
seeding, progress tracking, and final-corpus export.

All mutations of one project are serialized through a per-project lock and
written through to the store before the call returns (auto-save).  Reads
work on the in-memory aggregates.

Round semantics:

* INDIVIDUAL rounds give every assigned annotator a private workspace.
  Round 1 seeds from ingest-time annotations (pre-annotated BioC uploads);
  round N>1 seeds from the annotator's own round-(N-1) workspace plus an
  agreement-cue overlay computed against the prior round partners.
* COLLABORATIVE rounds create one SHARED workspace per document from the
  merge of all prior-round copies; partner identities are revealed.
* Pseudonyms ("Annotator A", ...) are drawn fresh per (round, document),
  so identities cannot be correlated across documents.
"""

from __future__ import annotations

import json
import random
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from . import model as m
from ._util import new_token, now_iso
from .agreement import build_agreement_report, corpus_report, cue_flags, merge_collaborative_seed
from .agreement.report import CorpusReport
from .bioc import BioCCollection, BioCDocument, collection_for_export, import_plain_text, parse_bioc, serialize_bioc
from .errors import (
    ForbiddenError,
    NotFoundError,
    StateError,
    ValidationError,
)
from .pmc import FetchRequest, PmcClient
from .store import Store

ROLE_ADMIN = "ADMIN"
ROLE_MANAGER = "MANAGER"
ROLE_ANNOTATOR = "ANNOTATOR"
ROLES = (ROLE_ADMIN, ROLE_MANAGER, ROLE_ANNOTATOR)

PROJECT_SETUP = "SETUP"
PROJECT_ACTIVE = "ACTIVE"
PROJECT_FINALIZED = "FINALIZED"

ROUND_INDIVIDUAL = "INDIVIDUAL"
ROUND_COLLABORATIVE = "COLLABORATIVE"
ROUND_ACTIVE = "ACTIVE"
ROUND_CLOSED = "CLOSED"

SESSION_TTL_HOURS = 24


@dataclass
class User:
    user_id: str
    display_name: str
    role: str
    secret: str = ""

    def public_json(self) -> dict:
        return {"user_id": self.user_id, "display_name": self.display_name, "role": self.role}


@dataclass
class Round:
    number: int
    kind: str
    status: str
    assignments: dict[str, list[str]] = field(default_factory=dict)  # doc_id -> user_ids
    pseudonyms: dict[tuple[str, str], str] = field(default_factory=dict)  # (doc,user) -> label
    report: dict | None = None
    warnings: list | None = None

    def label_of(self, doc_id: str, user_id: str) -> str | None:
        return self.pseudonyms.get((doc_id, user_id))

    def to_json(self) -> dict:
        return {
            "number": self.number,
            "kind": self.kind,
            "status": self.status,
            "assignments": {d: list(u) for d, u in self.assignments.items()},
            "warnings": self.warnings,
        }


@dataclass
class DocumentRecord:
    document: m.Document
    seed_annotations: list[m.Annotation] = field(default_factory=list)
    seed_relations: list[m.Relation] = field(default_factory=list)


@dataclass
class Project:
    project_id: str
    name: str
    schema: m.AnnotationSchema
    status: str = PROJECT_SETUP
    members: dict[str, str] = field(default_factory=dict)  # user_id -> project role
    documents: dict[str, DocumentRecord] = field(default_factory=dict)
    doc_order: list[str] = field(default_factory=list)
    rounds: list[Round] = field(default_factory=list)
    workspaces: dict[str, m.Workspace] = field(default_factory=dict)
    ws_index: dict[tuple[int, str, str], str] = field(default_factory=dict)

    def active_round(self) -> Round | None:
        for r in self.rounds:
            if r.status == ROUND_ACTIVE:
                return r
        return None

    def round(self, number: int) -> Round:
        if not 1 <= number <= len(self.rounds):
            raise NotFoundError(f"project {self.project_id} has no round {number}")
        return self.rounds[number - 1]

    def workspace(self, workspace_id: str) -> m.Workspace:
        ws = self.workspaces.get(workspace_id)
        if ws is None:
            raise NotFoundError(f"unknown workspace {workspace_id}")
        return ws

    def workspaces_of_round(self, number: int) -> list[m.Workspace]:
        return [ws for ws in self.workspaces.values() if ws.round_number == number]

    def managers(self) -> list[str]:
        return sorted(u for u, role in self.members.items() if role == ROLE_MANAGER)

    def to_json(self) -> dict:
        return {
            "project_id": self.project_id,
            "name": self.name,
            "status": self.status,
            "schema": self.schema.to_json(),
            "members": dict(self.members),
            "documents": list(self.doc_order),
            "rounds": [r.to_json() for r in self.rounds],
        }


def _locked(fn):
    """Serialize a registry mutation through the project's write lock.
    Decorated methods take project_id as their first positional argument."""

    def wrapper(self, project_id, *args, **kwargs):
        with self.lock(project_id):
            return fn(self, project_id, *args, **kwargs)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def balanced_assignment(doc_ids: list[str], annotators: list[str], k: int) -> dict[str, list[str]]:
    """Assign each document to k annotators minimizing the maximum load;
    ties break by user_id order, so the result is deterministic."""
    if k < 1:
        raise ValidationError("annotators_per_doc must be >= 1")
    if len(annotators) < k:
        raise ValidationError(
            f"need at least {k} annotators, project has {len(annotators)}"
        )
    load = {u: 0 for u in annotators}
    out = {}
    for doc_id in doc_ids:
        chosen = sorted(annotators, key=lambda u: (load[u], u))[:k]
        out[doc_id] = sorted(chosen)
        for u in chosen:
            load[u] += 1
    return out


class ProjectRegistry:
    """All mutable platform state: users, sessions, projects.  Every
    mutation is persisted before it returns."""

    def __init__(self, store: Store, rng: random.Random | None = None,
                 pmc_client: PmcClient | None = None):
        self.store = store
        self.rng = rng or random.Random()
        self.pmc_client = pmc_client or PmcClient()
        self.users: dict[str, User] = {}
        self.sessions: dict[str, dict] = {}
        self.projects: dict[str, Project] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.RLock()
        self._load()

    def lock(self, project_id: str) -> threading.RLock:
        """Per-project write lock: one writer per project, lock-free reads."""
        with self._registry_lock:
            return self._locks.setdefault(project_id, threading.RLock())

    # -- loading --------------------------------------------------------------

    def _load(self) -> None:
        for row in self.store.load_users():
            self.users[row["user_id"]] = User(
                row["user_id"], row["display_name"], row["role"], row["secret"]
            )
        for row in self.store.load_sessions():
            self.sessions[row["token"]] = {
                "token": row["token"],
                "user_id": row["user_id"],
                "expires_at": row["expires_at"],
            }
        for prow in self.store.load_projects():
            project = Project(
                project_id=prow["project_id"],
                name=prow["name"],
                schema=m.AnnotationSchema.from_json(json.loads(prow["schema_json"])),
                status=prow["status"],
            )
            for mrow in self.store.load_members(project.project_id):
                project.members[mrow["user_id"]] = mrow["role"]
            for doc, seeds, seed_rels in self.store.load_documents(project.project_id):
                project.documents[doc.doc_id] = DocumentRecord(doc, seeds, seed_rels)
                project.doc_order.append(doc.doc_id)
            for rrow in self.store.load_rounds(project.project_id):
                rnd = Round(
                    number=rrow["number"], kind=rrow["kind"], status=rrow["status"],
                    report=json.loads(rrow["report_json"]) if rrow["report_json"] else None,
                    warnings=json.loads(rrow["warnings_json"]) if rrow["warnings_json"] else None,
                )
                for arow in self.store.load_assignments(project.project_id, rnd.number):
                    rnd.assignments.setdefault(arow["doc_id"], []).append(arow["user_id"])
                for prow_ in self.store.load_pseudonyms(project.project_id, rnd.number):
                    rnd.pseudonyms[(prow_["doc_id"], prow_["user_id"])] = prow_["label"]
                project.rounds.append(rnd)
            for ws in self.store.load_workspaces(project.project_id):
                project.workspaces[ws.workspace_id] = ws
                project.ws_index[(ws.round_number, ws.doc_id, ws.owner)] = ws.workspace_id
            self.projects[project.project_id] = project

    # -- users & sessions -----------------------------------------------------

    def add_user(self, user_id: str, display_name: str, role: str) -> User:
        if role not in ROLES:
            raise ValidationError(f"unknown role '{role}' (expected one of {ROLES})")
        if not user_id:
            raise ValidationError("user_id must be non-empty")
        if user_id in self.users:
            raise ValidationError(f"user {user_id} already exists")
        user = User(user_id, display_name or user_id, role, secret=new_token())
        self.store.save_user(user.user_id, user.display_name, user.role, user.secret)
        self.users[user_id] = user
        return user

    def get_user(self, user_id: str) -> User:
        user = self.users.get(user_id)
        if user is None:
            raise NotFoundError(f"unknown user {user_id}")
        return user

    def create_session(self, user_id: str, secret: str) -> dict:
        user = self.users.get(user_id)
        if user is None or user.secret != secret:
            raise ForbiddenError("invalid credentials")
        token = new_token()
        expires = (datetime.now(timezone.utc) + timedelta(hours=SESSION_TTL_HOURS)).isoformat()
        session = {"token": token, "user_id": user_id, "expires_at": expires}
        self.store.save_session(token, user_id, expires)
        self.sessions[token] = session
        return session

    def resolve_session(self, token: str) -> User:
        session = self.sessions.get(token)
        if session is None:
            raise NotFoundError("unknown session token")
        if datetime.fromisoformat(session["expires_at"]) <= datetime.now(timezone.utc):
            self.sessions.pop(token, None)
            self.store.delete_session(token)
            raise NotFoundError("session expired")
        return self.get_user(session["user_id"])

    # -- project setup ----------------------------------------------------------

    def get_project(self, project_id: str) -> Project:
        project = self.projects.get(project_id)
        if project is None:
            raise NotFoundError(f"unknown project {project_id}")
        return project

    def find_workspace(self, workspace_id: str) -> tuple[Project, m.Workspace]:
        for project in self.projects.values():
            ws = project.workspaces.get(workspace_id)
            if ws is not None:
                return project, ws
        raise NotFoundError(f"unknown workspace {workspace_id}")

    def project_summary_for(self, user: User, project: Project) -> dict:
        """Listing payload.  Managers and admins see the member roster;
        annotators see only their own membership, which keeps individual
        rounds anonymous at the wire."""
        summary = {
            "project_id": project.project_id,
            "name": project.name,
            "status": project.status,
            "document_count": len(project.documents),
            "documents": list(project.doc_order),
            "rounds": [
                {"number": r.number, "kind": r.kind, "status": r.status} for r in project.rounds
            ],
            "role": project.members.get(user.user_id),
            "schema": project.schema.to_json(),
        }
        if user.role == ROLE_ADMIN or project.members.get(user.user_id) == ROLE_MANAGER:
            summary["members"] = dict(project.members)
            summary["round_details"] = [r.to_json() for r in project.rounds]
        return summary

    def create_project(
        self,
        name: str,
        schema: m.AnnotationSchema,
        manager: str,
        members: list[tuple[str, str]] | None = None,
    ) -> Project:
        schema.validate()
        manager_user = self.get_user(manager)
        if manager_user.role not in (ROLE_MANAGER, ROLE_ADMIN):
            raise ForbiddenError(f"user {manager} cannot manage projects (role {manager_user.role})")
        project = Project(
            project_id=f"p-{uuid.uuid4().hex[:10]}",
            name=name,
            schema=schema,
        )
        project.members[manager] = ROLE_MANAGER
        for user_id, role in members or []:
            self.get_user(user_id)
            if role not in (ROLE_MANAGER, ROLE_ANNOTATOR):
                raise ValidationError(f"project role must be MANAGER or ANNOTATOR, got '{role}'")
            project.members.setdefault(user_id, role)
        self.store.save_project(project.project_id, name, project.status, project.schema.to_json())
        for user_id, role in project.members.items():
            self.store.save_member(project.project_id, user_id, role)
        self.projects[project.project_id] = project
        return project

    def _require_mutable(self, project: Project) -> None:
        if project.status == PROJECT_FINALIZED:
            raise StateError(f"project {project.project_id} is finalized (read-only)")

    @_locked
    def ingest_documents(self, project_id: str, source: str, payload) -> list[m.Document]:
        """source: upload-bioc (payload: bytes) | upload-text (payload:
        (text, doc_id)) | fetch-pubmed / fetch-pmc (payload: external id)."""
        project = self.get_project(project_id)
        self._require_mutable(project)
        if project.active_round() is not None:
            raise StateError("cannot ingest documents while a round is active")

        incoming: list[DocumentRecord] = []
        if source == "upload-bioc":
            coll = parse_bioc(payload)
            for bdoc in coll.documents:
                incoming.append(DocumentRecord(bdoc.document, bdoc.annotations, bdoc.relations))
        elif source == "upload-text":
            text, doc_id = payload
            incoming.append(DocumentRecord(import_plain_text(text, doc_id)))
        elif source in ("fetch-pubmed", "fetch-pmc"):
            req = FetchRequest("pubmed" if source == "fetch-pubmed" else "pmc", payload)
            coll = self.pmc_client.fetch_document(req)
            for bdoc in coll.documents:
                incoming.append(DocumentRecord(bdoc.document, bdoc.annotations, bdoc.relations))
        else:
            raise ValidationError(f"unknown ingest source '{source}'")

        for rec in incoming:
            if rec.document.doc_id in project.documents:
                raise ValidationError(
                    f"duplicate document id {rec.document.doc_id} in project {project_id}"
                )
        added = []
        for rec in incoming:
            rec.document.validate()
            position = len(project.doc_order)
            self.store.save_document(
                project_id, rec.document, position, rec.seed_annotations, rec.seed_relations
            )
            project.documents[rec.document.doc_id] = rec
            project.doc_order.append(rec.document.doc_id)
            added.append(rec.document)
        return added

    # -- rounds -----------------------------------------------------------------

    def _draw_pseudonyms(self, doc_id: str, participants: list[str]) -> dict[tuple[str, str], str]:
        order = list(participants)
        self.rng.shuffle(order)
        return {(doc_id, user): f"Annotator {chr(ord('A') + i)}" for i, user in enumerate(order)}

    @_locked
    def start_round(
        self,
        project_id: str,
        kind: str,
        annotators_per_doc: int = 2,
        assignment: dict[str, list[str]] | None = None,
    ) -> Round:
        project = self.get_project(project_id)
        self._require_mutable(project)
        if kind not in (ROUND_INDIVIDUAL, ROUND_COLLABORATIVE):
            raise ValidationError(f"unknown round kind '{kind}'")
        if project.active_round() is not None:
            raise StateError("a round is already active")
        if not project.documents:
            raise ValidationError("project has no documents")
        if kind == ROUND_COLLABORATIVE and not project.rounds:
            raise StateError("a collaborative round requires at least one prior round")

        number = len(project.rounds) + 1
        prior = project.rounds[-1] if project.rounds else None

        if kind == ROUND_COLLABORATIVE and assignment is None and prior is not None:
            assignment = {d: list(users) for d, users in prior.assignments.items()}
        if assignment is None:
            pool = sorted(u for u, r in project.members.items() if r == ROLE_ANNOTATOR)
            assignment = balanced_assignment(project.doc_order, pool, annotators_per_doc)
        else:
            for doc_id, users in assignment.items():
                if doc_id not in project.documents:
                    raise NotFoundError(f"assignment names unknown document {doc_id}")
                for user_id in users:
                    if user_id not in project.members:
                        raise ValidationError(f"assignee {user_id} is not a project member")

        rnd = Round(number=number, kind=kind, status=ROUND_ACTIVE, assignments=assignment)

        if kind == ROUND_INDIVIDUAL:
            for doc_id, users in assignment.items():
                participants = set(users)
                if prior is not None:
                    participants |= set(prior.assignments.get(doc_id, []))
                rnd.pseudonyms.update(self._draw_pseudonyms(doc_id, sorted(participants)))
            workspaces = self._seed_individual(project, rnd, prior)
        else:
            workspaces = self._seed_collaborative(project, rnd, prior)

        assignment_rows = [
            (doc_id, user_id)
            for doc_id, users in rnd.assignments.items()
            for user_id in users
        ]
        # Pseudonyms cover prior-round partners too (overlay attribution),
        # not just the users assigned in this round.
        pseudonym_rows = [
            (doc_id, user_id, label)
            for (doc_id, user_id), label in rnd.pseudonyms.items()
        ]
        going_active = project.status == PROJECT_SETUP
        self.store.save_round_bundle(
            project_id, number, kind, ROUND_ACTIVE,
            assignment_rows, pseudonym_rows, workspaces,
            project_status=PROJECT_ACTIVE if going_active else None,
        )
        for ws in workspaces:
            project.workspaces[ws.workspace_id] = ws
            project.ws_index[(ws.round_number, ws.doc_id, ws.owner)] = ws.workspace_id
        project.rounds.append(rnd)
        if going_active:
            project.status = PROJECT_ACTIVE
        return rnd

    def _new_workspace(self, number: int, doc_id: str, owner: str) -> m.Workspace:
        return m.Workspace(
            workspace_id=f"ws-{uuid.uuid4().hex[:12]}",
            round_number=number,
            doc_id=doc_id,
            owner=owner,
        )

    def _seed_individual(self, project: Project, rnd: Round, prior: Round | None) -> list[m.Workspace]:
        out = []
        for doc_id in project.doc_order:
            users = rnd.assignments.get(doc_id, [])
            rec = project.documents[doc_id]
            for user_id in users:
                ws = self._new_workspace(rnd.number, doc_id, user_id)
                if prior is None:
                    # Round 1: pre-annotation seeds, adopted by the owner.
                    for seed in rec.seed_annotations:
                        ws.annotations[seed.ann_id] = m.Annotation(
                            ann_id=seed.ann_id,
                            span=seed.span,
                            surface_text=seed.surface_text,
                            entity_type=seed.entity_type,
                            concept_id=seed.concept_id,
                            annotator=user_id,
                            updated_at=now_iso(),
                            infons=dict(seed.infons),
                        )
                    for rel in rec.seed_relations:
                        ws.relations[rel.rel_id] = m.Relation(
                            rel_id=rel.rel_id,
                            relation_type=rel.relation_type,
                            nodes=list(rel.nodes),
                            annotator=user_id,
                            updated_at=now_iso(),
                            infons=dict(rel.infons),
                        )
                else:
                    src = self._prior_workspace_of(project, prior, doc_id, user_id)
                    if src is not None:
                        for ann in src.annotations.values():
                            ws.annotations[ann.ann_id] = m.Annotation(
                                ann_id=ann.ann_id, span=ann.span,
                                surface_text=ann.surface_text,
                                entity_type=ann.entity_type, concept_id=ann.concept_id,
                                annotator=user_id, updated_at=ann.updated_at,
                                infons=dict(ann.infons),
                            )
                        for rel in src.relations.values():
                            ws.relations[rel.rel_id] = m.Relation(
                                rel_id=rel.rel_id, relation_type=rel.relation_type,
                                nodes=list(rel.nodes), annotator=user_id,
                                updated_at=rel.updated_at, infons=dict(rel.infons),
                            )
                        ws.status.triage_label = src.status.triage_label
                    # Review round: cues against every prior partner's set,
                    # labeled with this round's fresh pseudonyms.
                    partner_sets = []
                    for partner in prior.assignments.get(doc_id, []):
                        if partner == user_id:
                            continue
                        pws = self._prior_workspace_of(project, prior, doc_id, partner)
                        if pws is not None:
                            label = rnd.label_of(doc_id, partner) or "Annotator ?"
                            partner_sets.append((label, pws.annotation_list()))
                    if partner_sets:
                        ws.cue_overlay = cue_flags(ws.annotation_list(), partner_sets, doc_id)
                ws.refresh_counts()
                out.append(ws)
        return out

    def _prior_workspace_of(
        self, project: Project, prior: Round, doc_id: str, user_id: str
    ) -> m.Workspace | None:
        if prior.kind == ROUND_COLLABORATIVE:
            ws_id = project.ws_index.get((prior.number, doc_id, m.SHARED_OWNER))
        else:
            ws_id = project.ws_index.get((prior.number, doc_id, user_id))
        return project.workspaces.get(ws_id) if ws_id else None

    def _seed_collaborative(self, project: Project, rnd: Round, prior: Round) -> list[m.Workspace]:
        out = []
        for doc_id in project.doc_order:
            if doc_id not in rnd.assignments:
                continue
            versions = []
            labels = []
            if prior.kind == ROUND_INDIVIDUAL:
                for user_id in sorted(prior.assignments.get(doc_id, [])):
                    pws = self._prior_workspace_of(project, prior, doc_id, user_id)
                    if pws is not None:
                        versions.append(pws)
                        labels.append(
                            prior.label_of(doc_id, user_id) or f"Annotator {len(labels) + 1}"
                        )
            ws_id = f"ws-{uuid.uuid4().hex[:12]}"
            if len(versions) >= 2:
                ws = merge_collaborative_seed(versions, labels, ws_id, rnd.number)
            else:
                # Single prior copy, or prior round already collaborative:
                # carry the state over unchanged.
                ws = self._new_workspace(rnd.number, doc_id, m.SHARED_OWNER)
                ws.workspace_id = ws_id
                src = versions[0] if versions else project.workspaces.get(
                    project.ws_index.get((prior.number, doc_id, m.SHARED_OWNER), "")
                )
                if src is not None:
                    for ann in src.annotations.values():
                        ws.annotations[ann.ann_id] = self._copy_ann(ann)
                    for rel in src.relations.values():
                        ws.relations[rel.rel_id] = self._copy_rel(rel)
                    ws.cue_overlay = {
                        k: m.CueFlag.from_json(v.to_json()) for k, v in src.cue_overlay.items()
                    }
                    ws.status.triage_label = src.status.triage_label
                ws.refresh_counts()
            out.append(ws)
        return out

    @_locked
    def close_round(self, project_id: str, number: int) -> Round:
        project = self.get_project(project_id)
        self._require_mutable(project)
        rnd = project.round(number)
        if rnd.status != ROUND_ACTIVE:
            raise StateError(f"round {number} is not active")

        sets_by_doc: dict[str, dict[str, tuple[list, list]]] = {}
        warnings = []
        for ws in project.workspaces_of_round(number):
            sets_by_doc.setdefault(ws.doc_id, {})[ws.owner] = (
                ws.annotation_list(), ws.relation_list()
            )
            if not ws.status.done:
                warnings.append({"doc_id": ws.doc_id, "annotator": ws.owner, "undone": True})
        report = build_agreement_report(
            {d: per for d, per in sets_by_doc.items() if len(per) >= 2}
        )
        rnd.status = ROUND_CLOSED
        rnd.report = report.to_json()
        rnd.warnings = warnings
        self.store.save_round(project_id, number, rnd.kind, ROUND_CLOSED, rnd.report, warnings)
        return rnd

    @_locked
    def finalize_project(self, project_id: str) -> Project:
        project = self.get_project(project_id)
        if project.active_round() is not None:
            raise StateError("close the active round before finalizing")
        project.status = PROJECT_FINALIZED
        self.store.set_project_status(project_id, PROJECT_FINALIZED)
        return project

    # -- editing (auto-save write-through) ---------------------------------------

    def _editable(self, project: Project, workspace_id: str) -> m.Workspace:
        self._require_mutable(project)
        ws = project.workspace(workspace_id)
        rnd = project.round(ws.round_number)
        if rnd.status != ROUND_ACTIVE:
            raise StateError(f"round {ws.round_number} is closed; workspace is frozen")
        return ws

    def check_edit_access(self, user: User, project: Project, ws: m.Workspace) -> None:
        if user.role == ROLE_ADMIN:
            return
        if ws.owner == user.user_id:
            return
        if ws.owner == m.SHARED_OWNER:
            rnd = project.round(ws.round_number)
            if user.user_id in rnd.assignments.get(ws.doc_id, []):
                return
        raise ForbiddenError(f"user {user.user_id} may not edit workspace {ws.workspace_id}")

    @_locked
    def add_annotation(self, project_id: str, workspace_id: str, actor: str,
                       start: int, length: int, entity_type: str,
                       concept_id: str | None = None) -> m.Annotation:
        project = self.get_project(project_id)
        ws = self._editable(project, workspace_id)
        doc = project.documents[ws.doc_id].document
        ann = m.add_annotation(
            ws, doc, project.schema, m.Span(start, length), entity_type, concept_id,
            annotator=actor,
        )
        self.store.save_annotation(project_id, ws, ann)
        return ann

    @_locked
    def update_annotation(self, project_id: str, workspace_id: str, actor: str,
                          ann_id: str, **changes) -> m.Annotation:
        project = self.get_project(project_id)
        ws = self._editable(project, workspace_id)
        doc = project.documents[ws.doc_id].document
        span = None
        if "start" in changes or "length" in changes:
            old = ws.annotations.get(ann_id)
            if old is None:
                raise NotFoundError(f"unknown annotation id {ann_id}")
            span = m.Span(
                changes.get("start", old.span.start), changes.get("length", old.span.length)
            )
        ann = m.update_annotation(
            ws, doc, project.schema, ann_id,
            span=span,
            entity_type=changes.get("entity_type"),
            concept_id=changes.get("concept_id", ...),
            annotator=actor,
        )
        self.store.save_annotation(project_id, ws, ann)
        return ann

    @_locked
    def delete_annotation(self, project_id: str, workspace_id: str, ann_id: str) -> list[str]:
        project = self.get_project(project_id)
        ws = self._editable(project, workspace_id)
        cascaded = m.delete_annotation(ws, ann_id)
        self.store.delete_annotation(project_id, ws, ann_id, cascaded)
        return cascaded

    @_locked
    def annotate_all_occurrences(self, project_id: str, workspace_id: str, actor: str,
                                 surface: str, entity_type: str,
                                 concept_id: str | None = None) -> list[m.Annotation]:
        project = self.get_project(project_id)
        ws = self._editable(project, workspace_id)
        doc = project.documents[ws.doc_id].document
        created = m.annotate_all_occurrences(
            ws, doc, project.schema, surface, entity_type, concept_id, annotator=actor
        )
        self.store.save_annotations(project_id, ws, created)
        return created

    @_locked
    def add_relation(self, project_id: str, workspace_id: str, actor: str,
                     relation_type: str, nodes: list[tuple[str, str]]) -> m.Relation:
        project = self.get_project(project_id)
        ws = self._editable(project, workspace_id)
        rel = m.add_relation(ws, project.schema, relation_type, nodes, annotator=actor)
        self.store.save_relation(project_id, ws, rel)
        return rel

    @_locked
    def delete_relation(self, project_id: str, workspace_id: str, rel_id: str) -> None:
        project = self.get_project(project_id)
        ws = self._editable(project, workspace_id)
        m.delete_relation(ws, rel_id)
        self.store.delete_relation(project_id, ws, rel_id)

    @_locked
    def set_status(self, project_id: str, workspace_id: str,
                   triage: str | None = ..., done: bool | None = None) -> m.DocumentStatus:
        project = self.get_project(project_id)
        ws = self._editable(project, workspace_id)
        status = m.set_document_status(ws, project.schema, triage=triage, done=done)
        self.store.save_workspace_status(project_id, ws)
        return status

    # -- views ---------------------------------------------------------------------

    def workspace_view(self, requester_id: str, project_id: str, workspace_id: str) -> dict:
        """The one payload builder for workspace data.  Enforces the
        anonymity contract: in INDIVIDUAL rounds an annotator's view names
        partners only by pseudonym; managers and admins see identity maps;
        collaborative views reveal participant identities."""
        project = self.get_project(project_id)
        ws = project.workspace(workspace_id)
        requester = self.get_user(requester_id)
        rnd = project.round(ws.round_number)
        is_manager = (
            requester.role == ROLE_ADMIN
            or project.members.get(requester_id) == ROLE_MANAGER
        )
        is_owner = ws.owner == requester_id
        is_collab_member = (
            ws.owner == m.SHARED_OWNER
            and requester_id in rnd.assignments.get(ws.doc_id, [])
        )
        if not (is_manager or is_owner or is_collab_member):
            raise ForbiddenError(f"user {requester_id} may not view workspace {workspace_id}")

        rec = project.documents[ws.doc_id]
        doc = rec.document
        payload = {
            "workspace_id": ws.workspace_id,
            "project_id": project.project_id,
            "round_number": ws.round_number,
            "round_kind": rnd.kind,
            "round_status": rnd.status,
            "doc_id": ws.doc_id,
            "owner": ws.owner,
            "document": {
                "doc_id": doc.doc_id,
                "metadata": dict(doc.metadata),
                "passages": [
                    {"offset": p.offset, "text": p.text, "infons": dict(p.infons)}
                    for p in doc.passages
                ],
                "figures": [
                    {
                        "label": f.label,
                        "caption_passage_index": f.caption_passage_index,
                        "image_url": f.image_url,
                    }
                    for f in doc.figures
                ],
            },
            "annotations": [a.to_json() for a in ws.annotation_list()],
            "relations": [r.to_json() for r in ws.relation_list()],
            "status": {
                "triage_label": ws.status.triage_label,
                "done": ws.status.done,
                "annotation_count": ws.status.annotation_count,
                "relation_count": ws.status.relation_count,
                "last_update": ws.status.last_update,
            },
            "cue_overlay": {k: v.to_json() for k, v in ws.cue_overlay.items()},
            "schema": project.schema.to_json(),
        }

        if rnd.kind == ROUND_INDIVIDUAL:
            partner_labels = sorted(
                label
                for (doc_id, user_id), label in rnd.pseudonyms.items()
                if doc_id == ws.doc_id and user_id != ws.owner
            )
            payload["partners"] = partner_labels
            if is_manager:
                payload["identities"] = {
                    label: user_id
                    for (doc_id, user_id), label in sorted(rnd.pseudonyms.items())
                    if doc_id == ws.doc_id
                }
        else:
            payload["participants"] = sorted(rnd.assignments.get(ws.doc_id, []))
        return payload

    def list_workspaces(self, requester_id: str, project_id: str, round_number: int) -> list[dict]:
        project = self.get_project(project_id)
        requester = self.get_user(requester_id)
        rnd = project.round(round_number)
        is_manager = (
            requester.role == ROLE_ADMIN
            or project.members.get(requester_id) == ROLE_MANAGER
        )
        out = []
        for ws in sorted(project.workspaces_of_round(round_number),
                         key=lambda w: (w.doc_id, w.owner)):
            visible = (
                is_manager
                or ws.owner == requester_id
                or (ws.owner == m.SHARED_OWNER
                    and requester_id in rnd.assignments.get(ws.doc_id, []))
            )
            if visible:
                out.append(self.workspace_view(requester_id, project_id, ws.workspace_id))
        return out

    def progress_report(self, project_id: str, sort_by: str | None = None,
                        descending: bool = False, keyword: str | None = None) -> list[dict]:
        project = self.get_project(project_id)
        if not project.rounds:
            return []
        rows = []
        for ws in project.workspaces.values():
            doc = project.documents[ws.doc_id].document
            if keyword:
                haystack = " ".join([doc.doc_id, *doc.metadata.values()]).lower()
                if keyword.lower() not in haystack:
                    continue
            rows.append(
                {
                    "round": ws.round_number,
                    "doc_id": ws.doc_id,
                    "annotator": ws.owner,
                    "annotation_count": ws.status.annotation_count,
                    "relation_count": ws.status.relation_count,
                    "triage_label": ws.status.triage_label,
                    "done": ws.status.done,
                    "last_update": ws.status.last_update,
                }
            )
        rows.sort(key=lambda r: (r["round"], r["doc_id"], r["annotator"]))
        if sort_by:
            if rows and sort_by not in rows[0]:
                raise ValidationError(f"unknown sort column '{sort_by}'")
            rows.sort(key=lambda r: (r[sort_by] is None, r[sort_by]), reverse=descending)
        return rows

    def corpus_report(self, project_id: str, round_number: int | None = None) -> CorpusReport:
        project = self.get_project(project_id)
        if not project.documents:
            raise ValidationError("project has no documents")
        if round_number is None:
            round_number = len(project.rounds)
        if round_number:
            project.round(round_number)
        workspaces_by_doc: dict[str, list[m.Workspace]] = {}
        for ws in project.workspaces_of_round(round_number):
            workspaces_by_doc.setdefault(ws.doc_id, []).append(ws)
        docs = [project.documents[d].document for d in project.doc_order]
        return corpus_report(docs, workspaces_by_doc, round_number)

    # -- export -----------------------------------------------------------------

    def export_corpus(
        self,
        project_id: str,
        source_round: int | None = None,
        strip_identities: bool = False,
        owners: dict[str, str] | None = None,
    ) -> tuple[bytes, list[dict]]:
        """Serialize the chosen round's corpus as BioC XML.  Returns
        (xml bytes, warning manifest rows for unresolved flagged items)."""
        project = self.get_project(project_id)
        if not project.documents:
            raise ValidationError("project has no documents to export")
        rnd: Round | None = None
        if source_round is not None:
            rnd = project.round(source_round)
        else:
            for candidate in reversed(project.rounds):
                if candidate.kind == ROUND_COLLABORATIVE:
                    rnd = candidate
                    break
            if rnd is None and project.rounds:
                rnd = project.rounds[-1]

        warnings: list[dict] = []
        bdocs: list[BioCDocument] = []
        for doc_id in project.doc_order:
            rec = project.documents[doc_id]
            anns: list[m.Annotation] = []
            rels: list[m.Relation] = []
            ws = None
            if rnd is None:
                anns, rels = list(rec.seed_annotations), list(rec.seed_relations)
            else:
                ws = self._export_workspace_for(project, rnd, doc_id, owners)
                if ws is not None:
                    anns = [self._copy_ann(a) for a in ws.annotation_list()]
                    rels = [self._copy_rel(r) for r in ws.relation_list()]
                    for item_id, flag in sorted(ws.cue_overlay.items()):
                        warnings.append(
                            {
                                "doc_id": doc_id,
                                "owner": ws.owner,
                                "item_id": item_id,
                                "cue": flag.cue,
                            }
                        )
            if strip_identities:
                label_map = self._strip_map(project, rnd, doc_id)
                for a in anns:
                    a.annotator = self._strip_label(a.annotator, label_map)
                for r in rels:
                    r.annotator = self._strip_label(r.annotator, label_map)
            bdocs.append(BioCDocument(rec.document, anns, rels))

        coll = collection_for_export(
            bdocs,
            key=f"{project.project_id}.key",
            infons={"project": project.name, "project_id": project.project_id},
        )
        return serialize_bioc(coll), warnings

    def _export_workspace_for(
        self, project: Project, rnd: Round, doc_id: str, owners: dict[str, str] | None
    ) -> m.Workspace | None:
        if rnd.kind == ROUND_COLLABORATIVE:
            ws_id = project.ws_index.get((rnd.number, doc_id, m.SHARED_OWNER))
            return project.workspaces.get(ws_id) if ws_id else None
        assigned = sorted(rnd.assignments.get(doc_id, []))
        owner = (owners or {}).get(doc_id)
        if owner is None:
            owner = assigned[0] if assigned else None
        if owner is None:
            return None
        ws_id = project.ws_index.get((rnd.number, doc_id, owner))
        if ws_id is None:
            raise NotFoundError(f"no workspace for document {doc_id} owned by {owner}")
        return project.workspaces.get(ws_id)

    @staticmethod
    def _copy_ann(a: m.Annotation) -> m.Annotation:
        return m.Annotation(a.ann_id, a.span, a.surface_text, a.entity_type,
                            a.concept_id, a.annotator, a.updated_at, dict(a.infons))

    @staticmethod
    def _copy_rel(r: m.Relation) -> m.Relation:
        return m.Relation(r.rel_id, r.relation_type, list(r.nodes), r.annotator,
                          r.updated_at, dict(r.infons))

    def _strip_map(self, project: Project, rnd: Round | None, doc_id: str) -> dict[str, str]:
        """Member user id -> pseudonym for one document: the round's own
        pseudonyms where they exist, deterministic fresh labels otherwise."""
        label_map: dict[str, str] = {}
        if rnd is not None:
            for (d, user_id), label in rnd.pseudonyms.items():
                if d == doc_id:
                    label_map[user_id] = label
        taken = set(label_map.values())
        next_ord = 0
        for user_id in sorted(project.members):
            if user_id in label_map:
                continue
            while f"Annotator {chr(ord('A') + next_ord)}" in taken:
                next_ord += 1
            label_map[user_id] = f"Annotator {chr(ord('A') + next_ord)}"
            taken.add(label_map[user_id])
        return label_map

    @staticmethod
    def _strip_label(annotator: str, label_map: dict[str, str]) -> str:
        if not annotator:
            return annotator
        parts = annotator.split("+")
        return "+".join(label_map.get(p, p) for p in parts)
