import random

import pytest

from corpusforge import model as m
from corpusforge.bioc import parse_bioc
from corpusforge.errors import ForbiddenError, NotFoundError, StateError, ValidationError
from corpusforge.model import AnnotationSchema, EntityType, RelationType
from corpusforge.project import (
    PROJECT_FINALIZED,
    ROLE_ANNOTATOR,
    ROLE_MANAGER,
    ROUND_COLLABORATIVE,
    ROUND_INDIVIDUAL,
    ProjectRegistry,
    balanced_assignment,
)
from corpusforge.store import Store

PRE_ANNOTATED = b"""<?xml version="1.0" encoding="UTF-8"?>
<collection><source>tagger</source><date>20240101</date><key>k</key>
<document><id>pre1</id>
<passage><infon key="section">paragraph</infon><offset>0</offset>
<text>g1 g2 g3 g4 g5 g6 g7 g8 g9 gA gB gC</text>
""" + b"".join(
    f'<annotation id="T{i}"><infon key="type">GENE</infon>'
    f'<location offset="{i * 3}" length="2"/><text>g{c}</text></annotation>'.encode()
    for i, c in enumerate("123456789ABC")
) + b"""</passage></document></collection>"""


def make_registry(tmp_path, seed=42):
    store = Store(tmp_path / "reg.db")
    reg = ProjectRegistry(store, rng=random.Random(seed))
    reg.add_user("mgr", "Manager M", ROLE_MANAGER)
    for u in ("alice", "bob", "carol", "dave"):
        reg.add_user(u, u.title() + " Surname", ROLE_ANNOTATOR)
    return reg


def simple_schema():
    return AnnotationSchema(
        entity_types=[EntityType("GENE"), EntityType("Disease")],
        relation_types=[RelationType("association", None, 2, 8)],
        triage_labels=["relevant", "irrelevant"],
    )


def make_project(reg, members=("alice", "bob"), docs=2):
    project = reg.create_project(
        "demo", simple_schema(), "mgr", [(u, ROLE_ANNOTATOR) for u in members]
    )
    for i in range(docs):
        reg.ingest_documents(
            project.project_id, "upload-text",
            (f"Title {i}\n\ngene alpha beta gene gamma delta gene.", f"doc{i}"),
        )
    return project


class TestCreateProject:
    def test_ok(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg)
        assert project.status == "SETUP"
        assert project.members["mgr"] == ROLE_MANAGER

    def test_empty_entity_types_rejected(self, tmp_path):
        reg = make_registry(tmp_path)
        with pytest.raises(ValidationError):
            reg.create_project("x", AnnotationSchema(entity_types=[]), "mgr", [])

    def test_duplicate_type_names_rejected(self, tmp_path):
        reg = make_registry(tmp_path)
        schema = AnnotationSchema(entity_types=[EntityType("GENE"), EntityType("GENE")])
        with pytest.raises(ValidationError, match="duplicate"):
            reg.create_project("x", schema, "mgr", [])

    def test_annotator_cannot_create(self, tmp_path):
        reg = make_registry(tmp_path)
        with pytest.raises(ForbiddenError):
            reg.create_project("x", simple_schema(), "alice", [])


class TestIngest:
    def test_preannotated_bioc_seeds_retained(self, tmp_path):
        reg = make_registry(tmp_path)
        project = reg.create_project("p", simple_schema(), "mgr", [("alice", ROLE_ANNOTATOR),
                                                                   ("bob", ROLE_ANNOTATOR)])
        docs = reg.ingest_documents(project.project_id, "upload-bioc", PRE_ANNOTATED)
        assert [d.doc_id for d in docs] == ["pre1"]
        rec = project.documents["pre1"]
        assert len(rec.seed_annotations) == 12
        rnd = reg.start_round(project.project_id, ROUND_INDIVIDUAL, 2)
        for ws in project.workspaces_of_round(1):
            assert len(ws.annotations) == 12
            assert all(a.annotator == ws.owner for a in ws.annotations.values())

    def test_plain_text_no_seeds(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg)
        assert project.documents["doc0"].seed_annotations == []

    def test_duplicate_doc_id(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        with pytest.raises(ValidationError, match="duplicate"):
            reg.ingest_documents(project.project_id, "upload-text", ("body", "doc0"))

    def test_no_ingest_during_active_round(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg)
        reg.start_round(project.project_id, ROUND_INDIVIDUAL, 2)
        with pytest.raises(StateError):
            reg.ingest_documents(project.project_id, "upload-text", ("x", "newdoc"))


class TestBalancedAssignment:
    def test_load_balance_150_docs_10_annotators(self):
        docs = [f"d{i}" for i in range(150)]
        users = [f"u{i:02d}" for i in range(10)]
        assignment = balanced_assignment(docs, users, 2)
        load = {u: 0 for u in users}
        for assigned in assignment.values():
            assert len(assigned) == 2
            assert len(set(assigned)) == 2
            for u in assigned:
                load[u] += 1
        assert all(n == 30 for n in load.values())

    def test_uneven_load_within_one(self):
        docs = [f"d{i}" for i in range(7)]
        users = ["u1", "u2", "u3"]
        load = {u: 0 for u in users}
        for assigned in balanced_assignment(docs, users, 2).values():
            for u in assigned:
                load[u] += 1
        assert max(load.values()) - min(load.values()) <= 1

    def test_insufficient_annotators(self):
        with pytest.raises(ValidationError, match="at least 2"):
            balanced_assignment(["d1"], ["u1"], 2)


class TestRounds:
    def test_round2_seeds_own_work_with_overlay(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        ws_alice = project.workspaces[project.ws_index[(1, "doc0", "alice")]]
        ws_bob = project.workspaces[project.ws_index[(1, "doc0", "bob")]]
        # alice: two annotations; bob: one identical, one concept-conflicting
        text = project.documents["doc0"].document.text
        start = text.index("gene")
        reg.add_annotation(pid, ws_alice.workspace_id, "alice", start, 4, "GENE", "G:1")
        second = text.index("gene", start + 1)
        reg.add_annotation(pid, ws_alice.workspace_id, "alice", second, 4, "GENE", "G:2")
        reg.add_annotation(pid, ws_bob.workspace_id, "bob", start, 4, "GENE", "G:1")
        reg.add_annotation(pid, ws_bob.workspace_id, "bob", second, 4, "GENE", "G:9")
        reg.close_round(pid, 1)
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)

        ws2 = project.workspaces[project.ws_index[(2, "doc0", "alice")]]
        assert {a.strict_key() for a in ws2.annotations.values()} == {
            a.strict_key() for a in ws_alice.annotations.values()
        }
        flags = ws2.cue_overlay
        assert len(flags) == 2
        by_span = {project.workspaces[project.ws_index[(2, "doc0", "alice")]]
                   .annotations[aid].span.start: f for aid, f in flags.items()}
        assert by_span[start].cue == "full_agreement"
        assert by_span[second].cue == "concept_mismatch"
        # attribution is pseudonymous and variants carry the partner concept
        flag = by_span[second]
        assert all(label.startswith("Annotator ") for label in flag.partners)
        assert any(v.concept_id == "G:9" for v in flag.variants)

    def test_state_machine_guards(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg)
        pid = project.project_id
        with pytest.raises(StateError, match="collaborative"):
            reg.start_round(pid, ROUND_COLLABORATIVE)
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        with pytest.raises(StateError, match="already active"):
            reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        reg.close_round(pid, 1)
        with pytest.raises(StateError, match="not active"):
            reg.close_round(pid, 1)

    def test_close_reports_undone_pairs(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        ws = project.workspaces[project.ws_index[(1, "doc0", "alice")]]
        reg.set_status(pid, ws.workspace_id, done=True)
        rnd = reg.close_round(pid, 1)
        assert {(w["doc_id"], w["annotator"]) for w in rnd.warnings} == {("doc0", "bob")}

    def test_closed_round_workspaces_frozen(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        ws = project.workspaces[project.ws_index[(1, "doc0", "alice")]]
        reg.close_round(pid, 1)
        with pytest.raises(StateError, match="frozen"):
            reg.add_annotation(pid, ws.workspace_id, "alice", 0, 3, "GENE")

    def test_collaborative_merges_and_reveals(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        wa = project.workspaces[project.ws_index[(1, "doc0", "alice")]]
        wb = project.workspaces[project.ws_index[(1, "doc0", "bob")]]
        reg.add_annotation(pid, wa.workspace_id, "alice", 0, 5, "GENE", "G:1")
        reg.add_annotation(pid, wb.workspace_id, "bob", 0, 5, "GENE", "G:1")
        reg.add_annotation(pid, wb.workspace_id, "bob", 8, 2, "Disease")
        reg.close_round(pid, 1)
        rnd = reg.start_round(pid, ROUND_COLLABORATIVE)
        assert rnd.pseudonyms == {}
        shared = project.workspaces[project.ws_index[(2, "doc0", m.SHARED_OWNER)]]
        assert shared.owner == m.SHARED_OWNER
        assert len(shared.annotations) == 2
        assert len(shared.cue_overlay) == 1
        # the collaborative workspace is editable by both assignees
        reg.check_edit_access(reg.get_user("alice"), project, shared)
        reg.check_edit_access(reg.get_user("bob"), project, shared)
        with pytest.raises(ForbiddenError):
            reg.check_edit_access(reg.get_user("carol"), project, shared)


class TestViews:
    def build(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        wa = project.workspaces[project.ws_index[(1, "doc0", "alice")]]
        wb = project.workspaces[project.ws_index[(1, "doc0", "bob")]]
        reg.add_annotation(pid, wa.workspace_id, "alice", 0, 5, "GENE", "G:1")
        reg.add_annotation(pid, wb.workspace_id, "bob", 0, 5, "GENE", "G:2")
        reg.close_round(pid, 1)
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        return reg, project

    def test_annotator_view_is_pseudonymous(self, tmp_path):
        import json

        reg, project = self.build(tmp_path)
        ws2 = project.ws_index[(2, "doc0", "alice")]
        view = reg.workspace_view("alice", project.project_id, ws2)
        blob = json.dumps(view)
        for needle in ("bob", "Bob Surname", "carol", "mgr"):
            assert needle not in blob
        assert view["partners"] and all(p.startswith("Annotator ") for p in view["partners"])
        [flag] = view["cue_overlay"].values()
        assert flag["cue"] == "concept_mismatch"
        assert all(label.startswith("Annotator ") for label in flag["partners"])

    def test_manager_view_reveals_identities(self, tmp_path):
        reg, project = self.build(tmp_path)
        ws2 = project.ws_index[(2, "doc0", "alice")]
        view = reg.workspace_view("mgr", project.project_id, ws2)
        assert "identities" in view
        assert set(view["identities"].values()) >= {"alice", "bob"}

    def test_non_member_rejected(self, tmp_path):
        reg, project = self.build(tmp_path)
        reg.add_user("eve", "Eve Outsider", ROLE_ANNOTATOR)
        ws2 = project.ws_index[(2, "doc0", "alice")]
        with pytest.raises(ForbiddenError):
            reg.workspace_view("eve", project.project_id, ws2)

    def test_partner_cannot_view(self, tmp_path):
        reg, project = self.build(tmp_path)
        ws2 = project.ws_index[(2, "doc0", "alice")]
        with pytest.raises(ForbiddenError):
            reg.workspace_view("bob", project.project_id, ws2)


class TestProgress:
    def test_rows_and_filter_and_sort(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=2)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        rows = reg.progress_report(pid)
        assert len(rows) == 4  # 2 docs x 2 annotators
        ws = project.workspaces[project.ws_index[(1, "doc1", "alice")]]
        reg.add_annotation(pid, ws.workspace_id, "alice", 0, 5, "GENE")
        rows = reg.progress_report(pid, sort_by="annotation_count", descending=True)
        assert rows[0]["annotation_count"] == 1
        filtered = reg.progress_report(pid, keyword="Title 1")
        assert {r["doc_id"] for r in filtered} == {"doc1"}
        assert len(filtered) == 2
        with pytest.raises(ValidationError, match="unknown sort column"):
            reg.progress_report(pid, sort_by="nope")


class TestExportAndDurability:
    def test_export_mid_project(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=2)
        data, warnings = reg.export_corpus(project.project_id)
        coll = parse_bioc(data)
        assert len(coll.documents) == 2

    def test_strip_identities_full_scan(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        for owner in ("alice", "bob"):
            ws = project.workspaces[project.ws_index[(1, "doc0", owner)]]
            reg.add_annotation(pid, ws.workspace_id, owner, 0, 5, "GENE", "G:1")
        data, _ = reg.export_corpus(pid, source_round=1, strip_identities=True)
        text = data.decode("utf-8")
        for user in reg.users.values():
            if user.user_id == "mgr":
                continue
            assert user.user_id not in text
            assert user.display_name not in text
        plain, _ = reg.export_corpus(pid, source_round=1, strip_identities=False)
        assert b"alice" in plain

    def test_default_round_prefers_collaborative(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        wa = project.workspaces[project.ws_index[(1, "doc0", "alice")]]
        reg.add_annotation(pid, wa.workspace_id, "alice", 0, 5, "GENE", "G:1")
        wb = project.workspaces[project.ws_index[(1, "doc0", "bob")]]
        reg.add_annotation(pid, wb.workspace_id, "bob", 0, 5, "GENE", "G:1")
        reg.close_round(pid, 1)
        reg.start_round(pid, ROUND_COLLABORATIVE)
        data, warnings = reg.export_corpus(pid)
        assert b"consensus" in data
        assert warnings == []

    def test_unresolved_conflicts_warn_but_export(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        wa = project.workspaces[project.ws_index[(1, "doc0", "alice")]]
        reg.add_annotation(pid, wa.workspace_id, "alice", 0, 5, "GENE", "G:1")
        reg.close_round(pid, 1)
        reg.start_round(pid, ROUND_COLLABORATIVE)
        data, warnings = reg.export_corpus(pid)
        assert len(warnings) == 1
        assert warnings[0]["cue"] == "singleton"
        assert data.startswith(b"<?xml")

    def test_durability_reload_reproduces_state(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=2)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        rng = random.Random(99)
        ws_ids = [project.ws_index[(1, d, u)] for d in ("doc0", "doc1")
                  for u in ("alice", "bob")]
        for i in range(40):
            ws_id = rng.choice(ws_ids)
            ws = project.workspaces[ws_id]
            try:
                reg.add_annotation(pid, ws_id, ws.owner, rng.randrange(0, 30),
                                   rng.randint(1, 4), "GENE", f"G:{i % 5}")
            except ValidationError:
                pass
        before, _ = reg.export_corpus(pid, source_round=1)

        # Reopen from the same file without closing the first registry
        # (as after a process kill).
        reg2 = ProjectRegistry(Store(tmp_path / "reg.db"))
        after, _ = reg2.export_corpus(pid, source_round=1)
        assert before == after

    def test_views_identical_after_reload(self, tmp_path):
        """Workspace views (including pseudonym labels drawn for prior-round
        partners) must not change across a restart."""
        reg = make_registry(tmp_path)
        project = make_project(reg, members=("alice", "bob", "carol"), docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, assignment={"doc0": ["alice", "bob"]})
        for owner in ("alice", "bob"):
            ws = project.ws_index[(1, "doc0", owner)]
            reg.add_annotation(pid, ws, owner, 0, 5, "GENE", "G:1")
        reg.close_round(pid, 1)
        # round 2 drops bob and brings carol in; bob still needs a label
        # for alice's cue overlay
        reg.start_round(pid, ROUND_INDIVIDUAL, assignment={"doc0": ["alice", "carol"]})
        ws2 = project.ws_index[(2, "doc0", "alice")]
        before = reg.workspace_view("alice", pid, ws2)
        assert before["partners"]  # bob's pseudonym is drawn and visible

        reg2 = ProjectRegistry(Store(tmp_path / "reg.db"))
        after = reg2.workspace_view("alice", pid, ws2)
        assert after == before

    def test_finalized_read_only_except_export(self, tmp_path):
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=1)
        pid = project.project_id
        reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        ws = project.ws_index[(1, "doc0", "alice")]
        reg.close_round(pid, 1)
        reg.finalize_project(pid)
        assert project.status == PROJECT_FINALIZED
        with pytest.raises(StateError):
            reg.start_round(pid, ROUND_INDIVIDUAL, 2)
        with pytest.raises(StateError):
            reg.add_annotation(pid, ws, "alice", 0, 3, "GENE")
        data, _ = reg.export_corpus(pid)
        assert data.startswith(b"<?xml")


class TestStateMachineProperty:
    def test_random_operation_sequences(self, tmp_path):
        """No sequence of operations produces two active rounds, a
        collaborative first round, or edits in a closed round."""
        rng = random.Random(123)
        reg = make_registry(tmp_path)
        project = make_project(reg, docs=2)
        pid = project.project_id
        for _ in range(200):
            op = rng.randrange(5)
            try:
                if op == 0:
                    reg.start_round(pid, rng.choice([ROUND_INDIVIDUAL, ROUND_COLLABORATIVE]), 2)
                elif op == 1 and project.rounds:
                    reg.close_round(pid, rng.randint(1, len(project.rounds)))
                elif op == 2 and project.workspaces:
                    ws_id = rng.choice(sorted(project.workspaces))
                    ws = project.workspaces[ws_id]
                    reg.add_annotation(pid, ws_id, ws.owner if ws.owner != m.SHARED_OWNER
                                       else "alice", rng.randrange(0, 30), 2, "GENE",
                                       f"G:{rng.randrange(20)}")
                elif op == 3 and project.workspaces:
                    ws_id = rng.choice(sorted(project.workspaces))
                    reg.set_status(pid, ws_id, done=rng.random() < 0.5)
                elif op == 4:
                    reg.ingest_documents(pid, "upload-text",
                                         (f"text {rng.random()}", f"extra{rng.randrange(5)}"))
            except (ValidationError, StateError, NotFoundError, ForbiddenError):
                pass
            active = [r for r in project.rounds if r.status == "ACTIVE"]
            assert len(active) <= 1
            if project.rounds:
                assert project.rounds[0].kind == ROUND_INDIVIDUAL
            for ws in project.workspaces.values():
                rnd = project.rounds[ws.round_number - 1]
                if rnd.status == "CLOSED":
                    # closed workspaces carry only edits made while active;
                    # verified indirectly: every edit path raises on closed
                    # rounds, checked by the guard test above
                    pass
            # numbering stays consecutive
            assert [r.number for r in project.rounds] == list(range(1, len(project.rounds) + 1))
