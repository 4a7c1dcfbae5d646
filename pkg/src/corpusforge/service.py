"""HTTP service: JSON-over-HTTP mirror of the domain operations, with role
and anonymity enforcement at the wire boundary.

All workspace-bearing responses are produced by workspace_view, so the
anonymity contract (no partner identities in annotator-facing payloads
during individual rounds) holds for everything that leaves the process.
Auth is a bearer token minted by POST /api/v1/sessions; no cookies, so CLI
and browser clients are symmetric.

Status mapping: 400 validation, 401 auth, 403 role, 404 unknown resource,
409 life-cycle violation (e.g. editing a closed round's workspace).
"""

from __future__ import annotations

from fastapi import Body, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .agreement.report import report_to_tsv
from .errors import (
    AuthError,
    CorpusForgeError,
    ForbiddenError,
    NotFoundError,
    StateError,
    ValidationError,
)
from .model import AnnotationSchema
from .project import (
    PROJECT_FINALIZED,
    ROLE_ADMIN,
    ROLE_MANAGER,
    ROUND_INDIVIDUAL,
    Project,
    ProjectRegistry,
    User,
)

API = "/api/v1"


def authorize(user: User, action: str, project: Project | None = None,
              owner: str | None = None) -> tuple[bool, str]:
    """Role policy: ADMIN everything; MANAGER management and all views of
    their own projects; ANNOTATOR edits and views of their own workspaces
    only.  Returns (allow, reason)."""
    if user.role == ROLE_ADMIN:
        return True, ""
    if action == "add_user":
        return False, "only administrators may add users"
    is_member = project is not None and user.user_id in project.members
    is_manager = project is not None and project.members.get(user.user_id) == ROLE_MANAGER
    if action == "create_project":
        if user.role == ROLE_MANAGER:
            return True, ""
        return False, f"role {user.role} may not create projects"
    if action == "manage":
        if is_manager:
            return True, ""
        return False, "not a manager of this project"
    if action == "view_project":
        if is_member:
            return True, ""
        return False, "not a member of this project"
    if action == "edit_workspace":
        # Ownership detail is checked by the registry; any member may reach
        # the attempt.
        if is_member:
            return True, ""
        return False, "not a member of this project"
    return False, f"unknown action {action}"


def create_app(registry: ProjectRegistry) -> FastAPI:
    app = FastAPI(title="corpusforge", version="0.1.0", docs_url=None, redoc_url=None)

    @app.exception_handler(CorpusForgeError)
    def domain_error(request: Request, exc: CorpusForgeError):
        status = 400
        if isinstance(exc, AuthError):
            status = 401
        elif isinstance(exc, ForbiddenError):
            status = 403
        elif isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, StateError):
            status = 409
        elif isinstance(exc, ValidationError):
            status = 400
        return JSONResponse({"error": str(exc)}, status_code=status)

    def current_user(authorization: str | None) -> User:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthError("missing bearer token")
        token = authorization[len("Bearer "):].strip()
        try:
            return registry.resolve_session(token)
        except NotFoundError as e:
            raise AuthError(str(e))

    def require(user: User, action: str, project: Project | None = None) -> None:
        allowed, reason = authorize(user, action, project)
        if not allowed:
            raise ForbiddenError(reason)

    # -- sessions & users --------------------------------------------------

    @app.post(API + "/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        if "user_id" not in payload or "secret" not in payload:
            raise ValidationError("session request needs user_id and secret")
        return registry.create_session(payload["user_id"], payload["secret"])

    @app.post(API + "/users", status_code=201)
    def add_user(payload: dict = Body(...), authorization: str | None = Header(None)):
        user = current_user(authorization)
        require(user, "add_user")
        created = registry.add_user(
            payload.get("user_id", ""),
            payload.get("display_name", ""),
            payload.get("role", ""),
        )
        return {**created.public_json(), "secret": created.secret}

    # -- projects ------------------------------------------------------------

    @app.get(API + "/projects")
    def list_projects(authorization: str | None = Header(None)):
        user = current_user(authorization)
        out = []
        for project in sorted(registry.projects.values(), key=lambda p: p.project_id):
            if user.role == ROLE_ADMIN or user.user_id in project.members:
                out.append(registry.project_summary_for(user, project))
        return out

    @app.post(API + "/projects", status_code=201)
    def create_project(payload: dict = Body(...), authorization: str | None = Header(None)):
        user = current_user(authorization)
        require(user, "create_project")
        if "name" not in payload or "schema" not in payload:
            raise ValidationError("project creation needs name and schema")
        schema = AnnotationSchema.from_json(payload["schema"])
        members = [(mm["user_id"], mm["role"]) for mm in payload.get("members", [])]
        project = registry.create_project(payload["name"], schema, user.user_id, members)
        return registry.project_summary_for(user, project)

    @app.get(API + "/projects/{project_id}")
    def get_project(project_id: str, authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "view_project", project)
        return registry.project_summary_for(user, project)

    @app.post(API + "/projects/{project_id}/documents", status_code=201)
    async def upload_documents(project_id: str, request: Request,
                               authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        content_type = request.headers.get("content-type", "")
        body = await request.body()
        if "xml" in content_type:
            docs = registry.ingest_documents(project_id, "upload-bioc", body)
        elif "json" in content_type:
            import json as _json

            payload = _json.loads(body)
            if "text" not in payload or "doc_id" not in payload:
                raise ValidationError("text upload needs text and doc_id")
            docs = registry.ingest_documents(
                project_id, "upload-text", (payload["text"], payload["doc_id"])
            )
        else:
            raise ValidationError(
                f"unsupported content type {content_type!r} (use application/xml "
                f"for BioC or application/json for plain text)"
            )
        return {"documents": [d.doc_id for d in docs]}

    @app.post(API + "/projects/{project_id}/documents/fetch", status_code=201)
    def fetch_document(project_id: str, payload: dict = Body(...),
                       authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        source = payload.get("source", "")
        if source not in ("pubmed", "pmc"):
            raise ValidationError("source must be pubmed or pmc")
        docs = registry.ingest_documents(project_id, f"fetch-{source}", payload.get("id", ""))
        return {"documents": [d.doc_id for d in docs]}

    # -- rounds -----------------------------------------------------------------

    @app.post(API + "/projects/{project_id}/rounds", status_code=201)
    def start_round(project_id: str, payload: dict = Body(...),
                    authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        assignment = payload.get("assignment")
        if assignment is not None:
            assignment = {d: list(u) for d, u in assignment.items()}
        rnd = registry.start_round(
            project_id,
            payload.get("kind", ROUND_INDIVIDUAL).upper(),
            annotators_per_doc=int(payload.get("annotators_per_doc", 2)),
            assignment=assignment,
        )
        return {**rnd.to_json(), "round_id": f"{project_id}:{rnd.number}"}

    def _parse_round_id(round_id: str) -> tuple[str, int]:
        project_id, _, number = round_id.rpartition(":")
        if not project_id or not number.isdigit():
            raise ValidationError(f"round id must look like <project_id>:<number>, got {round_id!r}")
        return project_id, int(number)

    @app.post(API + "/rounds/{round_id}/close")
    def close_round(round_id: str, authorization: str | None = Header(None)):
        user = current_user(authorization)
        project_id, number = _parse_round_id(round_id)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        rnd = registry.close_round(project_id, number)
        return {**rnd.to_json(), "round_id": round_id, "report": rnd.report}

    @app.get(API + "/rounds/{round_id}/workspaces")
    def round_workspaces(round_id: str, authorization: str | None = Header(None)):
        user = current_user(authorization)
        project_id, number = _parse_round_id(round_id)
        project = registry.get_project(project_id)
        require(user, "view_project", project)
        return registry.list_workspaces(user.user_id, project_id, number)

    # -- workspaces ----------------------------------------------------------------

    @app.get(API + "/workspaces/{workspace_id}")
    def get_workspace(workspace_id: str, authorization: str | None = Header(None)):
        user = current_user(authorization)
        project, _ = registry.find_workspace(workspace_id)
        return registry.workspace_view(user.user_id, project.project_id, workspace_id)

    def _edit_context(workspace_id: str, authorization: str | None):
        user = current_user(authorization)
        project, ws = registry.find_workspace(workspace_id)
        require(user, "edit_workspace", project)
        registry.check_edit_access(user, project, ws)
        return user, project, ws

    @app.post(API + "/workspaces/{workspace_id}/annotations", status_code=201)
    def post_annotation(workspace_id: str, payload: dict = Body(...),
                        authorization: str | None = Header(None)):
        user, project, ws = _edit_context(workspace_id, authorization)
        for key in ("start", "length", "entity_type"):
            if key not in payload:
                raise ValidationError(f"annotation needs '{key}'")
        ann = registry.add_annotation(
            project.project_id, workspace_id, user.user_id,
            int(payload["start"]), int(payload["length"]),
            payload["entity_type"], payload.get("concept_id"),
        )
        return ann.to_json()

    @app.patch(API + "/workspaces/{workspace_id}/annotations/{ann_id}")
    def patch_annotation(workspace_id: str, ann_id: str, payload: dict = Body(...),
                         authorization: str | None = Header(None)):
        user, project, ws = _edit_context(workspace_id, authorization)
        changes = {}
        for key in ("start", "length"):
            if key in payload:
                changes[key] = int(payload[key])
        if "entity_type" in payload:
            changes["entity_type"] = payload["entity_type"]
        if "concept_id" in payload:
            changes["concept_id"] = payload["concept_id"]
        ann = registry.update_annotation(
            project.project_id, workspace_id, user.user_id, ann_id, **changes
        )
        return ann.to_json()

    @app.delete(API + "/workspaces/{workspace_id}/annotations/{ann_id}")
    def delete_annotation(workspace_id: str, ann_id: str,
                          authorization: str | None = Header(None)):
        user, project, ws = _edit_context(workspace_id, authorization)
        cascaded = registry.delete_annotation(project.project_id, workspace_id, ann_id)
        return {"deleted": ann_id, "cascaded_relations": cascaded}

    @app.post(API + "/workspaces/{workspace_id}/annotations/all-occurrences", status_code=201)
    def post_all_occurrences(workspace_id: str, payload: dict = Body(...),
                             authorization: str | None = Header(None)):
        user, project, ws = _edit_context(workspace_id, authorization)
        for key in ("surface", "entity_type"):
            if key not in payload:
                raise ValidationError(f"all-occurrences needs '{key}'")
        created = registry.annotate_all_occurrences(
            project.project_id, workspace_id, user.user_id,
            payload["surface"], payload["entity_type"], payload.get("concept_id"),
        )
        return {"created": [a.to_json() for a in created]}

    @app.post(API + "/workspaces/{workspace_id}/relations", status_code=201)
    def post_relation(workspace_id: str, payload: dict = Body(...),
                      authorization: str | None = Header(None)):
        user, project, ws = _edit_context(workspace_id, authorization)
        if "relation_type" not in payload or "nodes" not in payload:
            raise ValidationError("relation needs relation_type and nodes")
        nodes = [(n["ann_id"], n.get("role", "")) for n in payload["nodes"]]
        rel = registry.add_relation(
            project.project_id, workspace_id, user.user_id,
            payload["relation_type"], nodes,
        )
        return rel.to_json()

    @app.delete(API + "/workspaces/{workspace_id}/relations/{rel_id}")
    def delete_relation(workspace_id: str, rel_id: str,
                        authorization: str | None = Header(None)):
        user, project, ws = _edit_context(workspace_id, authorization)
        registry.delete_relation(project.project_id, workspace_id, rel_id)
        return {"deleted": rel_id}

    @app.patch(API + "/workspaces/{workspace_id}/status")
    def patch_status(workspace_id: str, payload: dict = Body(...),
                     authorization: str | None = Header(None)):
        user, project, ws = _edit_context(workspace_id, authorization)
        triage = payload["triage_label"] if "triage_label" in payload else ...
        done = payload.get("done")
        status = registry.set_status(project.project_id, workspace_id, triage=triage, done=done)
        return {
            "triage_label": status.triage_label,
            "done": status.done,
            "annotation_count": status.annotation_count,
            "relation_count": status.relation_count,
            "last_update": status.last_update,
        }

    # -- reports & export -----------------------------------------------------------

    @app.get(API + "/projects/{project_id}/progress")
    def progress(project_id: str, sort_by: str | None = Query(None),
                 descending: bool = Query(False), keyword: str | None = Query(None),
                 authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        return {"rows": registry.progress_report(project_id, sort_by, descending, keyword)}

    @app.get(API + "/projects/{project_id}/agreement")
    def agreement(project_id: str, level: str | None = Query(None),
                  round: int | None = Query(None),
                  authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        report = registry.corpus_report(project_id, round).agreement.to_json()
        if level:
            from .agreement import MatchLevel

            wanted = MatchLevel.parse(level).name
            for pair in report["pairs"]:
                pair["scores"] = {wanted: pair["scores"][wanted]}
                pair["match_counts"] = {wanted: pair["match_counts"][wanted]}
                pair["relation_scores"] = {wanted: pair["relation_scores"][wanted]}
                pair["per_document"] = {
                    d: {wanted: levels[wanted]} for d, levels in pair["per_document"].items()
                }
        return report

    @app.get(API + "/projects/{project_id}/report")
    def report(project_id: str, format: str = Query("json"),
               round: int | None = Query(None),
               authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        rep = registry.corpus_report(project_id, round)
        if format == "tsv":
            return PlainTextResponse(report_to_tsv(rep), media_type="text/tab-separated-values")
        return rep.to_json()

    @app.get(API + "/projects/{project_id}/export")
    def export(project_id: str, round: int | None = Query(None),
               strip: bool = Query(False),
               authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        data, warnings = registry.export_corpus(project_id, round, strip)
        return Response(
            content=data,
            media_type="application/xml",
            headers={"X-Warning-Count": str(len(warnings))},
        )

    @app.get(API + "/projects/{project_id}/export/manifest")
    def export_manifest(project_id: str, round: int | None = Query(None),
                        authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        _, warnings = registry.export_corpus(project_id, round, False)
        lines = ["doc_id\towner\titem_id\tcue"]
        for w in warnings:
            lines.append(f"{w['doc_id']}\t{w['owner']}\t{w['item_id']}\t{w['cue']}")
        return PlainTextResponse("\n".join(lines) + "\n", media_type="text/tab-separated-values")

    @app.post(API + "/projects/{project_id}/finalize")
    def finalize(project_id: str, authorization: str | None = Header(None)):
        user = current_user(authorization)
        project = registry.get_project(project_id)
        require(user, "manage", project)
        registry.finalize_project(project_id)
        return {"project_id": project_id, "status": PROJECT_FINALIZED}

    return app


def ensure_admin(registry: ProjectRegistry, user_id: str = "admin",
                 display_name: str = "Administrator") -> tuple[str, str] | None:
    """Seed the first admin account; returns (user_id, secret) when newly
    created, None when users already exist."""
    if registry.users:
        return None
    user = registry.add_user(user_id, display_name, ROLE_ADMIN)
    return user.user_id, user.secret
