"""Shared fixtures and the acceptance-gate terminal summary.

Tests marked ``@pytest.mark.criterion(n, "title")`` are collected into a
per-criterion PASS/FAIL line printed after the run, so the gate's verdict is
readable at a glance even inside a long pytest report.
"""

from __future__ import annotations

from pathlib import Path
from types import SimpleNamespace

import pytest

from taxonomine.corpus import holdout_split, split_sentences
from taxonomine.mining import KeywordSet, mine_candidates
from taxonomine.providers import build_clients, mock_roster
from taxonomine.selection import score_pool
from taxonomine.synth import SynthSpec, generate_corpus

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(num, title): acceptance-gate criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines: dict[int, dict] = {}
    for reports in terminalreporter.stats.values():
        for report in reports:
            info = getattr(report, "criterion", None)
            if info is None:
                continue
            num, title = info
            entry = lines.setdefault(
                num, {"title": title, "failed": 0, "passed": 0, "skipped": 0}
            )
            if report.skipped:
                entry["skipped"] += 1
            elif report.failed:
                entry["failed"] += 1
            elif report.passed and report.when == "call":
                entry["passed"] += 1
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(lines):
        entry = lines[num]
        if entry["failed"]:
            verdict = "FAIL"
        elif entry["passed"]:
            verdict = "PASS"
        else:
            verdict = "SKIP"
        note = f" ({entry['skipped']} optional check skipped)" if entry["skipped"] else ""
        terminalreporter.write_line(f"criterion {num}: {verdict}  {entry['title']}{note}")


@pytest.fixture(scope="session")
def fixtures():
    """Directory holding the bundled reference tables."""
    return FIXTURES


@pytest.fixture(scope="session")
def clients(tmp_path_factory):
    """Fully offline mock clients with a two-provider embedding ensemble."""
    cache_dir = tmp_path_factory.mktemp("embed-cache")
    return build_clients(mock_roster(n_embedding=2), cache_dir=cache_dir)


@pytest.fixture(scope="session")
def pipeline(clients):
    """Default synthetic corpus taken through split -> mine -> score once."""
    docs, keyword_phrases = generate_corpus(SynthSpec())
    train, test = holdout_split(docs, "2024-06")
    keywords = KeywordSet(keywords=tuple(sorted(keyword_phrases)))
    candidates = mine_candidates(train, keywords, min_doc_matches=3)
    pool = score_pool(candidates, keywords, clients.embedding)
    train_sentences = [s for doc in train for s in split_sentences(doc)]
    return SimpleNamespace(
        docs=docs,
        train=train,
        test=test,
        keywords=keywords,
        candidates=candidates,
        pool=pool,
        train_sentences=train_sentences,
        clients=clients,
    )
