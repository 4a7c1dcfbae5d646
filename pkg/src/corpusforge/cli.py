"""Administrator/manager command line: project setup, ingestion, round
control, reports, and export, all through the HTTP API (the CLI holds no
private state, so role and anonymity checks cannot be bypassed).

Config resolution: --server/--token flags, then CORPUSFORGE_SERVER_URL /
CORPUSFORGE_TOKEN, then ~/.config/corpusforge/config.json (written by
`corpusforge login`).

Exit codes: 0 success, 1 server or validation failure, 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx

API = "/api/v1"
DEFAULT_CONFIG = Path(os.environ.get("CORPUSFORGE_CONFIG_HOME", "~/.config/corpusforge")).expanduser() / "config.json"


class ApiClient:
    """Thin wrapper over httpx with error-to-exit-code mapping."""

    def __init__(self, client: httpx.Client, fmt: str = "table"):
        self.client = client
        self.fmt = fmt

    @classmethod
    def from_options(cls, server: str | None, token: str | None, fmt: str,
                     config_path: str | None) -> "ApiClient":
        file_cfg = {}
        path = Path(config_path).expanduser() if config_path else DEFAULT_CONFIG
        if path.exists():
            try:
                file_cfg = json.loads(path.read_text("utf-8"))
            except json.JSONDecodeError:
                raise click.ClickException(f"config file {path} is not valid JSON")
        server = server or os.environ.get("CORPUSFORGE_SERVER_URL") or file_cfg.get("server_url")
        token = token or os.environ.get("CORPUSFORGE_TOKEN") or file_cfg.get("token")
        if not server:
            click.echo("error: no server configured (use --server or `corpusforge login`)", err=True)
            sys.exit(1)
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        return cls(httpx.Client(base_url=server, headers=headers, timeout=60.0), fmt)

    def call(self, method: str, path: str, **kwargs) -> httpx.Response:
        try:
            return self.client.request(method, API + path, **kwargs)
        except httpx.HTTPError as e:
            click.echo(f"error: cannot reach server: {e}", err=True)
            sys.exit(1)

    def json(self, method: str, path: str, **kwargs):
        resp = self.call(method, path, **kwargs)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("error", resp.text)
            except Exception:
                detail = resp.text
            click.echo(f"error: {detail}", err=True)
            sys.exit(1)
        if not resp.content:
            return {}
        return resp.json()


def emit_rows(api: ApiClient, rows: list[dict], columns: list[str]) -> None:
    if api.fmt == "json":
        click.echo(json.dumps(rows, indent=2))
        return
    if api.fmt == "tsv":
        click.echo("\t".join(columns))
        for row in rows:
            click.echo("\t".join(_cell(row.get(c)) for c in columns))
        return
    widths = {c: len(c) for c in columns}
    for row in rows:
        for c in columns:
            widths[c] = max(widths[c], len(_cell(row.get(c))))
    click.echo("  ".join(c.ljust(widths[c]) for c in columns))
    for row in rows:
        click.echo("  ".join(_cell(row.get(c)).ljust(widths[c]) for c in columns))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


@click.group()
@click.option("--server", default=None, help="Server base URL, e.g. http://127.0.0.1:8713")
@click.option("--token", default=None, help="Bearer token (or CORPUSFORGE_TOKEN)")
@click.option("--format", "fmt", type=click.Choice(["table", "tsv", "json"]), default="table",
              show_default=True, help="Output format")
@click.option("--config", "config_path", default=None, help="Path to the CLI config file")
@click.pass_context
def main(ctx, server, token, fmt, config_path):
    """corpusforge: collaborative annotation project administration."""
    # serve and login manage their own connection details
    if ctx.obj is None:
        if ctx.invoked_subcommand not in ("serve", "login"):
            ctx.obj = ApiClient.from_options(server, token, fmt, config_path)
    else:
        ctx.obj.fmt = fmt


@main.command()
@click.option("--server", required=True)
@click.option("--user-id", required=True)
@click.option("--secret", required=True)
@click.option("--config", "config_path", default=None)
def login(server, user_id, secret, config_path):
    """Create a session and store the token in the CLI config file."""
    client = httpx.Client(base_url=server, timeout=60.0)
    resp = client.post(API + "/sessions", json={"user_id": user_id, "secret": secret})
    if resp.status_code >= 400:
        click.echo(f"error: {resp.json().get('error', resp.text)}", err=True)
        sys.exit(1)
    token = resp.json()["token"]
    path = Path(config_path).expanduser() if config_path else DEFAULT_CONFIG
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"server_url": server, "token": token}, indent=2), "utf-8")
    click.echo(f"session stored in {path}")


# -- user ------------------------------------------------------------------


@main.group()
def user():
    """User administration."""


@user.command("add")
@click.option("--user-id", required=True)
@click.option("--name", default="")
@click.option("--role", type=click.Choice(["ADMIN", "MANAGER", "ANNOTATOR"]), required=True)
@click.pass_obj
def user_add(api: ApiClient, user_id, name, role):
    """Create an account; prints the login secret once."""
    data = api.json("POST", "/users", json={"user_id": user_id, "display_name": name, "role": role})
    emit_rows(api, [data], ["user_id", "display_name", "role", "secret"])


# -- project ------------------------------------------------------------------


@main.group()
def project():
    """Project setup and inspection."""


@project.command("create")
@click.option("--name", required=True)
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True),
              help="JSON schema file: entity_types, relation_types, triage_labels")
@click.option("--member", "members", multiple=True,
              help="user_id:ROLE, repeatable (e.g. alice:ANNOTATOR)")
@click.pass_obj
def project_create(api: ApiClient, name, schema_path, members):
    schema = json.loads(Path(schema_path).read_text("utf-8"))
    member_list = []
    for item in members:
        user_id, _, role = item.partition(":")
        member_list.append({"user_id": user_id, "role": role or "ANNOTATOR"})
    data = api.json("POST", "/projects", json={"name": name, "schema": schema, "members": member_list})
    emit_rows(api, [data], ["project_id", "name", "status", "document_count"])


@project.command("list")
@click.pass_obj
def project_list(api: ApiClient):
    rows = api.json("GET", "/projects")
    emit_rows(api, rows, ["project_id", "name", "status", "document_count", "role"])


# -- doc ------------------------------------------------------------------


@main.group()
def doc():
    """Document ingestion and export."""


@doc.command("import")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--project", "project_id", required=True)
@click.pass_obj
def doc_import(api: ApiClient, files, project_id):
    """Import BioC XML (*.xml) or plain text files."""
    imported = []
    for name in files:
        path = Path(name)
        if path.suffix.lower() == ".xml":
            data = api.json(
                "POST", f"/projects/{project_id}/documents",
                content=path.read_bytes(), headers={"Content-Type": "application/xml"},
            )
        else:
            data = api.json(
                "POST", f"/projects/{project_id}/documents",
                json={"text": path.read_text("utf-8"), "doc_id": path.stem},
            )
        imported.extend(data["documents"])
    emit_rows(api, [{"doc_id": d} for d in imported], ["doc_id"])


@doc.command("fetch")
@click.option("--source", type=click.Choice(["pubmed", "pmc"]), required=True)
@click.option("--id", "external_id", required=True)
@click.option("--project", "project_id", required=True)
@click.pass_obj
def doc_fetch(api: ApiClient, source, external_id, project_id):
    data = api.json(
        "POST", f"/projects/{project_id}/documents/fetch",
        json={"source": source, "id": external_id},
    )
    emit_rows(api, [{"doc_id": d} for d in data["documents"]], ["doc_id"])


@doc.command("export")
@click.option("--project", "project_id", required=True)
@click.option("--round", "round_number", type=int, default=None)
@click.option("--strip/--no-strip", default=False, help="Replace annotator ids with pseudonyms")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--manifest-out", "manifest_path", type=click.Path(), default=None,
              help="Also write the unresolved-conflict manifest")
@click.pass_obj
def doc_export(api: ApiClient, project_id, round_number, strip, out_path, manifest_path):
    params = {"strip": strip}
    if round_number is not None:
        params["round"] = round_number
    resp = api.call("GET", f"/projects/{project_id}/export", params=params)
    if resp.status_code >= 400:
        click.echo(f"error: {resp.json().get('error', resp.text)}", err=True)
        sys.exit(1)
    Path(out_path).write_bytes(resp.content)
    warning_count = int(resp.headers.get("X-Warning-Count", "0"))
    click.echo(f"wrote {out_path} ({warning_count} unresolved conflicts)")
    if manifest_path:
        mparams = {}
        if round_number is not None:
            mparams["round"] = round_number
        manifest = api.call("GET", f"/projects/{project_id}/export/manifest", params=mparams)
        Path(manifest_path).write_text(manifest.text, "utf-8")
        click.echo(f"wrote {manifest_path}")


# -- round ------------------------------------------------------------------


@main.group(name="round")
def round_():
    """Round control."""


@round_.command("start")
@click.option("--project", "project_id", required=True)
@click.option("--kind", type=click.Choice(["individual", "collaborative"]), default="individual",
              show_default=True)
@click.option("--k", "annotators_per_doc", type=int, default=2, show_default=True,
              help="Annotators per document (balanced auto-assignment)")
@click.option("--assignment", "assignment_path", type=click.Path(exists=True), default=None,
              help="Explicit JSON map doc_id -> [user_id, ...]")
@click.pass_obj
def round_start(api: ApiClient, project_id, kind, annotators_per_doc, assignment_path):
    payload = {"kind": kind.upper(), "annotators_per_doc": annotators_per_doc}
    if assignment_path:
        payload["assignment"] = json.loads(Path(assignment_path).read_text("utf-8"))
    data = api.json("POST", f"/projects/{project_id}/rounds", json=payload)
    load: dict[str, int] = {}
    for users in data.get("assignments", {}).values():
        for u in users:
            load[u] = load.get(u, 0) + 1
    click.echo(f"round {data['number']} ({data['kind']}) started: {data['round_id']}")
    rows = [{"annotator": u, "documents": n} for u, n in sorted(load.items())]
    emit_rows(api, rows, ["annotator", "documents"])


@round_.command("close")
@click.option("--project", "project_id", required=True)
@click.option("--round", "round_number", type=int, required=True)
@click.pass_obj
def round_close(api: ApiClient, project_id, round_number):
    data = api.json("POST", f"/rounds/{project_id}:{round_number}/close")
    warnings = data.get("warnings") or []
    click.echo(f"round {round_number} closed ({len(warnings)} undone workspaces)")
    if warnings:
        emit_rows(api, warnings, ["doc_id", "annotator"])


@round_.command("status")
@click.option("--project", "project_id", required=True)
@click.option("--sort-by", default=None)
@click.option("--descending/--ascending", default=False)
@click.option("--keyword", default=None, help="Filter by keyword in document metadata")
@click.pass_obj
def round_status(api: ApiClient, project_id, sort_by, descending, keyword):
    params = {}
    if sort_by:
        params["sort_by"] = sort_by
    if descending:
        params["descending"] = True
    if keyword:
        params["keyword"] = keyword
    data = api.json("GET", f"/projects/{project_id}/progress", params=params)
    emit_rows(
        api, data["rows"],
        ["round", "doc_id", "annotator", "annotation_count", "relation_count",
         "triage_label", "done", "last_update"],
    )


# -- iaa ------------------------------------------------------------------


@main.group()
def iaa():
    """Inter-annotator agreement."""


@iaa.command("report")
@click.option("--project", "project_id", required=True)
@click.option("--level", type=click.Choice(["strict", "span_type", "overlap_type", "overlap"]),
              default=None, help="Restrict to one match level")
@click.option("--round", "round_number", type=int, default=None)
@click.pass_obj
def iaa_report(api: ApiClient, project_id, level, round_number):
    params = {}
    if level:
        params["level"] = level
    if round_number is not None:
        params["round"] = round_number
    data = api.json("GET", f"/projects/{project_id}/agreement", params=params)
    rows = []
    for pair in data["pairs"]:
        for level_name, score in sorted(pair["scores"].items()):
            rows.append(
                {
                    "annotator_x": pair["annotator_x"],
                    "annotator_y": pair["annotator_y"],
                    "level": level_name.lower(),
                    "score": score,
                    "matches": pair["match_counts"][level_name],
                    "relation_score": pair["relation_scores"][level_name],
                }
            )
    emit_rows(api, rows, ["annotator_x", "annotator_y", "level", "score", "matches",
                          "relation_score"])


# -- serve ------------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", default=None, help="JSON settings file")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, host, port):
    """Run the annotation server."""
    import uvicorn

    from .config import Settings
    from .pmc import PmcClient
    from .project import ProjectRegistry
    from .service import create_app, ensure_admin
    from .store import Store

    settings = Settings.load(config_path)
    store = Store(settings.store_path)
    registry = ProjectRegistry(store, pmc_client=PmcClient(settings.pmc))
    seeded = ensure_admin(registry)
    if seeded:
        click.echo(f"seeded admin account: user_id={seeded[0]} secret={seeded[1]}")
    app = create_app(registry)
    uvicorn.run(app, host=host or settings.bind_addr, port=port or settings.port)


if __name__ == "__main__":
    main()
