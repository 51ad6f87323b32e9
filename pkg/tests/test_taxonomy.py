"""Tests for hierarchy construction, validation, and serialization."""

from __future__ import annotations

import json
import re

import pytest

from taxonomine.config import RunConfig
from taxonomine.corpus import Sentence
from taxonomine.errors import LevelFailure, TaxonomyError
from taxonomine.mining import CandidateSentence, candidate_id
from taxonomine.selection import ScoredPool
from taxonomine.taxonomy import (
    ROOT_ID,
    SCHEMA,
    Taxonomy,
    TaxonomyNode,
    build_level,
    build_taxonomy,
    load_taxonomy,
    node_id,
    serialize_taxonomy,
    taxonomy_json,
    taxonomy_to_dict,
)


def _candidate(doc: str, text: str, score: float = 0.5) -> CandidateSentence:
    return CandidateSentence(
        id=candidate_id(doc, 0),
        sentence=Sentence(doc_id=doc, index=0, text=text, span=(0, len(text))),
        matched_keywords=("ml",),
        doc_match_count=3,
        class_score=score,
    )


def _small_taxonomy() -> Taxonomy:
    """root (level 2) -> two branches (level 1) -> four leaves (level 0)."""
    nodes: dict[str, TaxonomyNode] = {}
    for i in range(4):
        nid = node_id(0, i)
        nodes[nid] = TaxonomyNode(
            id=nid,
            level=0,
            text=f"leaf {i}",
            member_candidate_ids=(f"c{2 * i}", f"c{2 * i + 1}"),
        )
    branch_a = TaxonomyNode(
        id=node_id(1, 0),
        level=1,
        text="branch a",
        parent=ROOT_ID,
        children=[node_id(0, 0), node_id(0, 1)],
    )
    branch_b = TaxonomyNode(
        id=node_id(1, 1),
        level=1,
        text="branch b",
        parent=ROOT_ID,
        children=[node_id(0, 2), node_id(0, 3)],
    )
    for branch in (branch_a, branch_b):
        for child in branch.children:
            nodes[child].parent = branch.id
        nodes[branch.id] = branch
    nodes[ROOT_ID] = TaxonomyNode(
        id=ROOT_ID,
        level=2,
        text="AI Skills Taxonomy",
        children=[branch_a.id, branch_b.id],
    )
    return Taxonomy(nodes=nodes, root_id=ROOT_ID, levels=2)


class TestNodeIds:
    def test_format(self):
        assert node_id(0, 3) == "L0.0003"
        assert node_id(2, 41) == "L2.0041"
        assert node_id(4, 12345) == "L4.12345"

    def test_is_leaf(self):
        assert TaxonomyNode(id="x", level=0, text="t").is_leaf()
        assert not TaxonomyNode(id="y", level=1, text="t", children=["x"]).is_leaf()


class TestValidate:
    def test_small_taxonomy_passes(self):
        _small_taxonomy().validate()

    def test_accessors(self):
        tax = _small_taxonomy()
        assert tax.root.id == ROOT_ID
        assert [n.id for n in tax.leaves()] == [node_id(0, i) for i in range(4)]
        assert tax.label_texts(1) == ["branch a", "branch b"]

    def test_missing_root(self):
        tax = _small_taxonomy()
        del tax.nodes[ROOT_ID]
        with pytest.raises(TaxonomyError, match="missing from nodes"):
            tax.validate()

    def test_second_parentless_node(self):
        tax = _small_taxonomy()
        tax.nodes[node_id(1, 1)].parent = None
        with pytest.raises(TaxonomyError, match="exactly one parentless"):
            tax.validate()

    def test_missing_child_reference(self):
        tax = _small_taxonomy()
        tax.root.children.append("L1.0099")
        with pytest.raises(TaxonomyError, match="missing child 'L1.0099'"):
            tax.validate()

    def test_broken_backlink(self):
        tax = _small_taxonomy()
        tax.nodes[node_id(0, 0)].parent = node_id(1, 1)
        with pytest.raises(TaxonomyError, match="does not point back"):
            tax.validate()

    def test_child_level_mismatch(self):
        tax = _small_taxonomy()
        tax.nodes[node_id(0, 1)].level = 1
        with pytest.raises(TaxonomyError, match="at level 1 under"):
            tax.validate()

    def test_duplicate_reference(self):
        tax = _small_taxonomy()
        tax.root.children = [node_id(1, 0), node_id(1, 0)]
        with pytest.raises(TaxonomyError, match="cycle or duplicate"):
            tax.validate()

    def test_unreachable_node(self):
        tax = _small_taxonomy()
        tax.nodes["L0.0099"] = TaxonomyNode(
            id="L0.0099",
            level=0,
            text="stray",
            parent=node_id(1, 0),
            member_candidate_ids=("z1",),
        )
        with pytest.raises(TaxonomyError, match="unreachable"):
            tax.validate()

    def test_leaf_without_members(self):
        tax = _small_taxonomy()
        tax.nodes[node_id(0, 0)].member_candidate_ids = ()
        with pytest.raises(TaxonomyError, match="no member candidates"):
            tax.validate()

    def test_inner_node_without_children(self):
        tax = _small_taxonomy()
        for child in tax.nodes[node_id(1, 1)].children:
            del tax.nodes[child]
        tax.nodes[node_id(1, 1)].children = []
        with pytest.raises(TaxonomyError, match="has no children"):
            tax.validate()

    def test_overlapping_leaf_members(self):
        tax = _small_taxonomy()
        tax.nodes[node_id(0, 3)].member_candidate_ids = ("c0", "c7")
        with pytest.raises(TaxonomyError, match="more than one leaf"):
            tax.validate()


class TestBuildLevel:
    def test_empty_inputs(self, clients):
        with pytest.raises(LevelFailure, match="no inputs"):
            build_level([], RunConfig(), clients)

    def test_duplicate_input_ids(self, clients):
        inputs = [("a", "first text"), ("a", "second text")]
        with pytest.raises(TaxonomyError, match="duplicate input ids"):
            build_level(inputs, RunConfig(), clients)

    def test_two_token_groups_make_two_labels(self, clients):
        numbers = ["one", "two", "three", "four", "five", "six"]
        group_a = [f"robot navigation route planning map {n}" for n in numbers]
        group_b = [f"speech audio voice transcription sound {n}" for n in numbers]
        inputs = [(f"a{i}", t) for i, t in enumerate(group_a)]
        inputs += [(f"b{i}", t) for i, t in enumerate(group_b)]

        stats: dict = {}
        points_out: list = []
        labels = build_level(
            inputs, RunConfig(), clients, stats_out=stats, points_out=points_out
        )

        assert len(labels) == 2
        assert stats["inputs"] == 12
        assert stats["clusters"] == 2
        assert stats["noise"] == 0
        assert stats["labels"] == 2
        member_union = sorted(m for lab in labels for m in lab.member_ids)
        assert member_union == sorted(pair[0] for pair in inputs)
        # each cluster holds exactly one of the two token families
        for lab in labels:
            prefixes = {m[0] for m in lab.member_ids}
            assert len(prefixes) == 1
        # the captured geometry matches the inputs
        (points, assignment), = points_out
        assert list(points.ids) == [pair[0] for pair in inputs]
        assert points.vectors.shape == (12, RunConfig().target_dim)
        assert assignment.labels.shape == (12,)

    def test_all_noise_raises(self, clients):
        inputs = [
            ("n0", "quartz lantern"),
            ("n1", "velvet compass"),
            ("n2", "orbitساعة marble"),
            ("n3", "cedar prism"),
        ]
        with pytest.raises(LevelFailure, match="noise"):
            build_level(inputs, RunConfig(), clients)


@pytest.fixture(scope="module")
def built(pipeline):
    artifacts: list = []
    taxonomy = build_taxonomy(
        pipeline.pool, RunConfig(), pipeline.clients, artifacts=artifacts
    )
    return taxonomy, artifacts


class TestBuildTaxonomy:
    def test_empty_pool(self, clients):
        with pytest.raises(TaxonomyError, match="empty pool"):
            build_taxonomy(ScoredPool(candidates=[]), RunConfig(), clients)

    def test_root_and_levels(self, built):
        taxonomy, _ = built
        assert taxonomy.root_id == ROOT_ID
        assert taxonomy.root.text == "AI Skills Taxonomy"
        assert taxonomy.root.level == taxonomy.levels
        assert taxonomy.levels >= 2
        taxonomy.validate()

    def test_node_id_format(self, built):
        taxonomy, _ = built
        pattern = re.compile(r"^L\d+\.\d{4}$")
        for nid in taxonomy.nodes:
            if nid != ROOT_ID:
                assert pattern.match(nid), nid

    def test_leaf_members_come_from_pool(self, built, pipeline):
        taxonomy, _ = built
        pool_ids = set(pipeline.pool.by_id())
        for leaf in taxonomy.leaves():
            assert leaf.member_candidate_ids
            assert set(leaf.member_candidate_ids) <= pool_ids

    def test_level_widths_shrink_upward(self, built):
        taxonomy, _ = built
        widths = [
            len(taxonomy.level_nodes(level)) for level in range(taxonomy.levels)
        ]
        assert all(a >= b for a, b in zip(widths, widths[1:]))
        assert taxonomy.root.children == [
            n.id for n in taxonomy.level_nodes(taxonomy.levels - 1)
        ]

    def test_build_log_and_artifacts(self, built):
        taxonomy, artifacts = built
        assert "stop_cause" in taxonomy.build_log[-1]
        level_entries = [e for e in taxonomy.build_log if "level" in e]
        assert len(level_entries) >= taxonomy.levels
        for entry in level_entries[: taxonomy.levels]:
            assert {"inputs", "clusters", "labels", "noise"} <= set(entry)
        assert len(artifacts) == taxonomy.levels
        for (points, assignment), entry in zip(artifacts, level_entries):
            assert len(points.ids) == entry["inputs"]
            assert assignment.labels.shape == (entry["inputs"],)

    def test_fingerprint_recorded(self, built):
        taxonomy, _ = built
        assert taxonomy.config_fingerprint == RunConfig().fingerprint()

    def test_same_process_rebuild_is_identical(self, built, pipeline):
        first, _ = built
        second = build_taxonomy(pipeline.pool, RunConfig(), pipeline.clients)
        assert taxonomy_json(second) == taxonomy_json(first)

    def test_root_only_when_level_zero_fails(self, clients):
        pool = ScoredPool(
            candidates=[
                _candidate("d0", "quartz lantern hum"),
                _candidate("d1", "velvet compass tide"),
                _candidate("d2", "orbit saddle marble"),
                _candidate("d3", "cedar prism loft"),
            ]
        )
        taxonomy = build_taxonomy(pool, RunConfig(), clients)
        assert taxonomy.levels == 0
        assert list(taxonomy.nodes) == [ROOT_ID]
        assert taxonomy.root.children == []
        assert taxonomy.build_log[-1]["stop_cause"].startswith("level 0 failed")
        assert any("error" in entry for entry in taxonomy.build_log)


class TestSerialization:
    def test_round_trip(self, built, tmp_path):
        taxonomy, _ = built
        path = tmp_path / "taxonomy.json"
        serialize_taxonomy(taxonomy, path)
        loaded = load_taxonomy(path)

        assert loaded.levels == taxonomy.levels
        assert loaded.config_fingerprint == taxonomy.config_fingerprint
        assert loaded.build_log == taxonomy.build_log
        assert set(loaded.nodes) == set(taxonomy.nodes)
        for nid, node in taxonomy.nodes.items():
            other = loaded.nodes[nid]
            assert (other.level, other.text, other.parent) == (
                node.level,
                node.text,
                node.parent,
            )
            assert other.children == node.children
            assert other.member_candidate_ids == node.member_candidate_ids

        again = tmp_path / "again.json"
        serialize_taxonomy(loaded, again)
        assert again.read_bytes() == path.read_bytes()

    def test_round_trip_of_handmade_taxonomy(self, tmp_path):
        path = tmp_path / "small.json"
        serialize_taxonomy(_small_taxonomy(), path)
        loaded = load_taxonomy(path)
        assert sorted(loaded.nodes) == sorted(_small_taxonomy().nodes)

    def test_nested_json_shape(self, built):
        taxonomy, _ = built
        doc = json.loads(taxonomy_json(taxonomy))
        assert doc["id"] == ROOT_ID
        assert doc["level"] == taxonomy.levels
        assert "children" in doc
        assert "index" not in doc and "build_log" not in doc
        assert taxonomy_json(taxonomy) == taxonomy_json(taxonomy)

    def test_to_dict_document(self, built):
        taxonomy, _ = built
        doc = taxonomy_to_dict(taxonomy)
        assert doc["schema"] == SCHEMA
        assert doc["levels"] == taxonomy.levels
        assert set(doc["index"]) == set(taxonomy.nodes)
        for nid, entry in doc["index"].items():
            assert entry["level"] == taxonomy.nodes[nid].level
            assert entry["parent"] == taxonomy.nodes[nid].parent

    def test_load_rejects_wrong_schema(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": "other/v1"}))
        with pytest.raises(TaxonomyError, match="not a taxonomy/v1 document"):
            load_taxonomy(path)

    def test_load_rejects_missing_root(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": SCHEMA}))
        with pytest.raises(TaxonomyError, match="missing 'root'"):
            load_taxonomy(path)

    def test_load_rejects_unparseable_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(TaxonomyError, match="cannot read taxonomy"):
            load_taxonomy(path)

    def test_load_names_json_path_of_missing_key(self, tmp_path):
        path = tmp_path / "bad.json"
        doc = {
            "schema": SCHEMA,
            "root": {
                "id": "root",
                "level": 1,
                "text": "r",
                "children": [{"id": "a", "level": 0}],
            },
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(
            TaxonomyError, match=r"root\.children\[0\]: node missing 'text'"
        ):
            load_taxonomy(path)

    def test_load_rejects_duplicate_node_id(self, tmp_path):
        path = tmp_path / "bad.json"
        leaf = {"id": "x", "level": 0, "text": "x", "members": ["m1"]}
        doc = {
            "schema": SCHEMA,
            "root": {
                "id": "root",
                "level": 2,
                "text": "r",
                "children": [
                    {"id": "a", "level": 1, "text": "a", "children": [leaf]},
                    {"id": "a", "level": 1, "text": "b", "children": []},
                ],
            },
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(
            TaxonomyError, match=r"root\.children\[1\]: duplicate node id 'a'"
        ):
            load_taxonomy(path)

    def test_load_rejects_bad_field_types(self, tmp_path):
        cases = [
            ({"id": "root", "level": "2", "text": "r"}, "level must be an integer"),
            ({"id": "root", "level": 1, "text": "  "}, "non-empty string"),
            ({"id": "", "level": 1, "text": "r"}, "id must be a non-empty"),
            (
                {"id": "root", "level": 0, "text": "r", "members": [1]},
                "members must be a list of strings",
            ),
        ]
        for root, message in cases:
            path = tmp_path / "bad.json"
            path.write_text(json.dumps({"schema": SCHEMA, "root": root}))
            with pytest.raises(TaxonomyError, match=message):
                load_taxonomy(path)

    def test_load_revalidates_structure(self, tmp_path):
        path = tmp_path / "bad.json"
        doc = {
            "schema": SCHEMA,
            "root": {
                "id": "root",
                "level": 2,
                "text": "r",
                "children": [{"id": "a", "level": 0, "text": "a", "members": ["m"]}],
            },
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(TaxonomyError, match="at level 0 under"):
            load_taxonomy(path)
