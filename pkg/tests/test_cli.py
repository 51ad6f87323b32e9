"""Tests for the command-line interface, driven in-process through main()."""

from __future__ import annotations

import json
import subprocess
import sys
from types import SimpleNamespace

import pytest

from taxonomine.cli import main
from taxonomine.taxonomy import load_taxonomy


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Synth corpus plus train/test split, shared by the chained CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root)]) == 0
    ns = SimpleNamespace(
        root=root,
        corpus=root / "corpus.jsonl",
        keywords=root / "keywords.txt",
        train=root / "train.jsonl",
        test=root / "test.jsonl",
        cache=root / "cache",
    )
    assert main(
        [
            "corpus",
            "split",
            str(ns.corpus),
            "--holdout",
            "2024-06",
            "--out-train",
            str(ns.train),
            "--out-test",
            str(ns.test),
        ]
    ) == 0
    return ns


class TestSynth:
    def test_writes_corpus_and_keywords(self, tmp_path, capsys):
        code = main(
            [
                "synth",
                "--out",
                str(tmp_path),
                "--ai",
                "5",
                "--partial",
                "2",
                "--noise",
                "2",
                "--test",
                "2",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "wrote 11 documents" in out
        assert (tmp_path / "corpus.jsonl").exists()
        assert (tmp_path / "keywords.txt").exists()

    def test_same_seed_same_bytes(self, tmp_path):
        argv = ["synth", "--ai", "6", "--partial", "2", "--noise", "2", "--test", "2"]
        assert main(argv + ["--out", str(tmp_path / "a")]) == 0
        assert main(argv + ["--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "corpus.jsonl").read_bytes() == (
            tmp_path / "b" / "corpus.jsonl"
        ).read_bytes()


class TestCorpusCommands:
    def test_validate_clean_corpus(self, workdir, capsys):
        assert main(["corpus", "validate", str(workdir.corpus)]) == 0
        out = capsys.readouterr().out
        assert "documents:   500" in out
        assert "bad lines:   0" in out

    def test_validate_reports_bad_lines(self, tmp_path, capsys):
        path = tmp_path / "corpus.jsonl"
        path.write_text(
            '{"id": "a", "month": "2024-01", "text": "Fine text here."}\n'
            "not json\n"
        )
        assert main(["corpus", "validate", str(path)]) == 1
        out = capsys.readouterr().out
        assert "bad lines:   1" in out
        assert "line 2:" in out

    def test_split_counts(self, workdir):
        n_train = sum(1 for _ in workdir.train.open())
        n_test = sum(1 for _ in workdir.test.open())
        assert (n_train, n_test) == (450, 50)

    def test_split_warns_on_absent_month(self, tmp_path, capsys):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "a", "month": "2024-01", "text": "Fine text."}\n')
        code = main(
            [
                "corpus",
                "split",
                str(path),
                "--holdout",
                "2030-12",
                "--out-train",
                str(tmp_path / "train.jsonl"),
                "--out-test",
                str(tmp_path / "test.jsonl"),
            ]
        )
        captured = capsys.readouterr()
        assert code == 0
        assert "holdout month 2030-12 not present" in captured.err

    def test_month_argument_validated(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["corpus", "split", "x.jsonl", "--holdout", "2024-6"])
        assert exc.value.code == 2


class TestPipelineChain:
    def test_mine_to_eval(self, workdir, capsys):
        root = workdir.root
        cache = ["--cache-dir", str(workdir.cache)]

        candidates = root / "candidates.jsonl"
        assert main(
            [
                "mine",
                "--corpus",
                str(workdir.train),
                "--keywords",
                str(workdir.keywords),
                "--out",
                str(candidates),
            ]
        ) == 0
        assert "mined" in capsys.readouterr().out
        assert candidates.stat().st_size > 0

        scored = root / "scored.jsonl"
        assert main(
            [
                "score",
                "--candidates",
                str(candidates),
                "--keywords",
                str(workdir.keywords),
                "--out",
                str(scored),
                *cache,
            ]
        ) == 0
        assert "scored" in capsys.readouterr().out

        filtered = root / "filtered.jsonl"
        assert main(
            ["filter", "--candidates", str(scored), "--pct", "50", "--out", str(filtered)]
        ) == 0
        assert "percentile" in capsys.readouterr().out

        augmented = root / "augmented.jsonl"
        assert main(
            [
                "augment",
                "--candidates",
                str(scored),
                "--corpus",
                str(workdir.train),
                "--out",
                str(augmented),
                *cache,
            ]
        ) == 0
        assert "augmentation added" in capsys.readouterr().out

        clusters = root / "clusters.json"
        assert main(
            ["cluster", "--candidates", str(filtered), "--out", str(clusters), *cache]
        ) == 0
        assert "clusters" in capsys.readouterr().out
        payload = json.loads(clusters.read_text())
        assert payload["schema"] == "clusters/v1"
        assert payload["n_clusters"] >= 1

        taxonomy_path = root / "taxonomy.json"
        assert main(
            [
                "build",
                "--candidates",
                str(scored),
                "--pct",
                "50",
                "--out",
                str(taxonomy_path),
                *cache,
            ]
        ) == 0
        assert "taxonomy with" in capsys.readouterr().out
        taxonomy = load_taxonomy(taxonomy_path)
        assert taxonomy.levels >= 1

        assert main(
            ["eval", "silhouette", "--candidates", str(scored), "--pct", "50", *cache]
        ) == 0
        out = capsys.readouterr().out
        assert "level 0:" in out
        assert "mean silhouette:" in out

        judge_json = root / "judge.json"
        assert main(
            [
                "eval",
                "judge",
                "--taxonomy",
                str(taxonomy_path),
                "--out",
                str(judge_json),
                *cache,
            ]
        ) == 0
        out = capsys.readouterr().out
        for category in (
            "clarity",
            "hierarchical_coherence",
            "orthogonality",
            "completeness",
        ):
            assert f"{category}:" in out
        detail = json.loads(judge_json.read_text())
        assert set(detail) == {"criteria", "categories"}
        assert len(detail["criteria"]) == 12

        coverage_json = root / "coverage.json"
        labeled = root / "labeled.jsonl"
        assert main(
            [
                "eval",
                "coverage",
                "--taxonomy",
                str(taxonomy_path),
                "--test-corpus",
                str(workdir.test),
                "--save-labeled",
                str(labeled),
                "--out",
                str(coverage_json),
                *cache,
            ]
        ) == 0
        out = capsys.readouterr().out
        assert "tau 0.9:" in out and "tau 0.6:" in out
        assert "best strict tau:" in out
        assert labeled.exists()
        report = json.loads(coverage_json.read_text())
        assert report["schema"] == "coverage-report/v1"

        # a labeled-set file can replace the test corpus on a second run
        assert main(
            [
                "eval",
                "coverage",
                "--taxonomy",
                str(taxonomy_path),
                "--labeled",
                str(labeled),
                *cache,
            ]
        ) == 0
        assert "best strict tau:" in capsys.readouterr().out


class TestCommandErrors:
    def test_missing_keywords_file(self, workdir, capsys):
        code = main(
            [
                "mine",
                "--corpus",
                str(workdir.train),
                "--keywords",
                str(workdir.root / "absent.txt"),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_candidates_file(self, tmp_path, capsys):
        code = main(
            [
                "filter",
                "--candidates",
                str(tmp_path / "absent.jsonl"),
                "--pct",
                "50",
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_build_aug_requires_corpus(self, workdir, capsys):
        code = main(
            [
                "build",
                "--candidates",
                str(workdir.root / "scored.jsonl"),
                "--aug",
                "on",
            ]
        )
        assert code == 1
        assert "requires --corpus" in capsys.readouterr().err

    def test_cluster_empty_candidates(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        code = main(["cluster", "--candidates", str(empty)])
        assert code == 1
        assert "empty candidate file" in capsys.readouterr().err

    def test_coverage_needs_labels_or_corpus(self, workdir, capsys):
        code = main(
            ["eval", "coverage", "--taxonomy", str(workdir.root / "taxonomy.json")]
        )
        assert code == 2
        assert "need --test-corpus or --labeled" in capsys.readouterr().err

    def test_on_off_flag_validated(self):
        with pytest.raises(SystemExit) as exc:
            main(["cluster", "--candidates", "x.jsonl", "--soft", "maybe"])
        assert exc.value.code == 2


class TestAnovaCommand:
    def test_reference_table(self, fixtures, capsys):
        code = main(
            [
                "anova",
                "--results",
                str(fixtures / "reference_results_consolidated.csv"),
                "--metric",
                "strict_0.8",
                "--dataset",
                "NLx",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "metric: strict_0.8   dataset: NLx" in out
        assert "augmentation" in out
        assert "40.808" in out
        assert "<0.001" in out
        assert "(1, 7)" in out

    def test_requires_dataset_when_ambiguous(self, fixtures, capsys):
        code = main(
            [
                "anova",
                "--results",
                str(fixtures / "reference_results_consolidated.csv"),
                "--metric",
                "silhouette",
            ]
        )
        assert code == 1
        assert "several datasets" in capsys.readouterr().err

    def test_missing_results_file(self, tmp_path, capsys):
        code = main(
            [
                "anova",
                "--results",
                str(tmp_path / "absent.csv"),
                "--metric",
                "silhouette",
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestSweepCommand:
    def test_sweep_runs_and_resumes(self, workdir, tmp_path, capsys):
        out_dir = tmp_path / "sweep"
        config = {
            "corpus": str(workdir.corpus),
            "keywords": str(workdir.keywords),
            "holdout": "2024-06",
            "out_dir": str(out_dir),
            "cache_dir": str(tmp_path / "cache"),
        }
        config_path = tmp_path / "sweep.json"
        config_path.write_text(json.dumps(config))

        assert main(["sweep", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "corpus: 450 train / 50 test documents" in out
        assert "config 12/12" in out
        for name in (
            "results.csv",
            "results.md",
            "anova.csv",
            "fig_silhouette.png",
            "fig_coverage.png",
            "fig_effects.png",
            "test_set.jsonl",
        ):
            assert (out_dir / name).exists(), name
        assert len(list((out_dir / "rows").glob("*.json"))) == 12
        assert len(list((out_dir / "taxonomies").glob("*.json"))) == 12
        first_csv = (out_dir / "results.csv").read_bytes()

        assert main(["sweep", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "reusing labeled test set" in out
        assert "resumed from" in out
        assert (out_dir / "results.csv").read_bytes() == first_csv

    def test_config_must_exist(self, tmp_path, capsys):
        code = main(["sweep", "--config", str(tmp_path / "absent.json")])
        assert code == 1
        assert "cannot read sweep config" in capsys.readouterr().err

    def test_config_must_be_complete(self, tmp_path, capsys):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps({"corpus": "x"}))
        assert main(["sweep", "--config", str(path)]) == 1
        assert "sweep config missing" in capsys.readouterr().err


class TestEntryPoints:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "taxonomine", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "usage: taxonomine" in proc.stdout
