"""Command-line interface.

Subcommands mirror the pipeline stages and chain through files:

* ``synth``            — write a deterministic demo corpus + keyword list
* ``corpus validate``  — check a JSONL corpus, reporting line errors
* ``corpus split``     — partition by calendar month into train/test files
* ``mine``             — keyword-mine candidate sentences from a corpus
* ``score``            — class-relatedness score candidates
* ``filter``           — percentile-filter a scored candidate file
* ``augment``          — semantic-search augmentation over a corpus
* ``cluster``          — one reduce+cluster pass over candidates (diagnostic)
* ``build``            — full taxonomy construction
* ``eval``             — ``silhouette`` / ``judge`` / ``coverage``
* ``sweep``            — the 12-configuration experiment grid + report
* ``anova``            — main-effects ANOVA over a results table

Without ``--roster`` every provider defaults to the built-in deterministic
mocks, so the whole pipeline runs offline.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .clustering import cluster_density, reduce_dimensions, soft_assign
from .config import PERCENTILES, RunConfig, full_grid
from .corpus import (
    _MONTH_RE,
    LoadReport,
    document_to_json,
    holdout_split,
    load_corpus,
    split_sentences,
)
from .errors import CorpusError, ExperimentError, TaxonomineError
from .evaluation import (
    TAUS,
    LabeledTestSet,
    evaluate_coverage,
    judge_taxonomy,
    label_test_sentences,
    silhouette_level,
)
from .experiments import (
    RESULT_COLUMNS,
    SweepInputs,
    cell_values,
    factorial_anova,
    read_results_csv,
    run_sweep,
)
from .mining import load_keywords, mine_candidates
from .providers import build_clients, load_roster, mock_roster
from .reporting import emit_report
from .selection import (
    ScoredPool,
    augment_candidates,
    load_candidates,
    percentile_filter,
    save_candidates,
    score_pool,
)
from .synth import SynthSpec, write_corpus
from .taxonomy import build_taxonomy, load_taxonomy, serialize_taxonomy

logger = logging.getLogger(__name__)

_ANOVA_DEFAULT_METRICS = tuple(
    c for c in RESULT_COLUMNS if c not in ("aug", "soft", "pct")
)


def _on_off(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered == "on":
        return True
    if lowered == "off":
        return False
    raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {value!r}")


def _month(value: str) -> str:
    if not _MONTH_RE.match(value):
        raise argparse.ArgumentTypeError(f"expected YYYY-MM, got {value!r}")
    return value


def _clients(args):
    roster = load_roster(args.roster) if args.roster else mock_roster()
    return build_clients(roster, cache_dir=args.cache_dir)


def _add_provider_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--roster",
        default=None,
        help="provider roster JSON; omitted -> deterministic offline mocks",
    )
    parser.add_argument(
        "--cache-dir",
        default=None,
        help="directory for the persistent embedding cache",
    )


def _scored_pool(path: str) -> ScoredPool:
    return ScoredPool(candidates=load_candidates(path))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_ai_docs=args.ai,
        n_partial_docs=args.partial,
        n_noise_docs=args.noise,
        n_test_docs=args.test,
        seed=args.seed,
    )
    corpus_path, keywords_path = write_corpus(args.out, spec)
    n_docs = spec.n_ai_docs + spec.n_partial_docs + spec.n_noise_docs + spec.n_test_docs
    print(f"wrote {n_docs} documents to {corpus_path}")
    print(f"wrote keyword dictionary to {keywords_path}")
    return 0


def cmd_corpus_validate(args) -> int:
    report = LoadReport()
    try:
        for _ in load_corpus(args.path, fail_fast=False, dedupe=args.dedupe, report=report):
            pass
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"documents:   {report.documents}")
    print(f"blank lines: {report.blank_lines}")
    print(f"deduped:     {report.deduped}")
    print(f"bad lines:   {len(report.errors)}")
    for line_no, message in report.errors[:20]:
        print(f"  line {line_no}: {message}")
    if len(report.errors) > 20:
        print(f"  ... and {len(report.errors) - 20} more")
    return 1 if report.errors else 0


def cmd_corpus_split(args) -> int:
    n_train = n_test = 0
    with open(args.out_train, "w", encoding="utf-8") as train_fh, open(
        args.out_test, "w", encoding="utf-8"
    ) as test_fh:
        for doc in load_corpus(args.path):
            if doc.month == args.holdout:
                test_fh.write(document_to_json(doc) + "\n")
                n_test += 1
            else:
                train_fh.write(document_to_json(doc) + "\n")
                n_train += 1
    print(f"train: {n_train} documents -> {args.out_train}")
    print(f"test:  {n_test} documents -> {args.out_test}")
    if n_test == 0:
        print(f"warning: holdout month {args.holdout} not present", file=sys.stderr)
    return 0


def cmd_mine(args) -> int:
    keywords = load_keywords(args.keywords)
    docs = list(load_corpus(args.corpus))
    candidates = mine_candidates(
        docs,
        keywords,
        min_doc_matches=args.min_doc_matches,
        loose_boundaries=args.loose_boundaries,
    )
    save_candidates(candidates, args.out)
    contributing = len({c.sentence.doc_id for c in candidates})
    print(
        f"mined {len(candidates)} candidate sentences from "
        f"{contributing}/{len(docs)} documents -> {args.out}"
    )
    return 0


def cmd_score(args) -> int:
    candidates = load_candidates(args.candidates)
    keywords = load_keywords(args.keywords)
    clients = _clients(args)
    pool = score_pool(candidates, keywords, clients.embedding)
    save_candidates(pool.candidates, args.out)
    scores = [c.class_score for c in pool.candidates]
    if scores:
        print(
            f"scored {len(scores)} candidates "
            f"(min {min(scores):.3f}, mean {sum(scores) / len(scores):.3f}, "
            f"max {max(scores):.3f}) -> {args.out}"
        )
    else:
        print(f"scored 0 candidates -> {args.out}")
    return 0


def cmd_filter(args) -> int:
    pool = _scored_pool(args.candidates)
    filtered = percentile_filter(pool, args.pct)
    save_candidates(filtered.candidates, args.out)
    print(
        f"kept {len(filtered)}/{len(pool)} candidates above the "
        f"{args.pct}th percentile -> {args.out}"
    )
    return 0


def cmd_augment(args) -> int:
    pool = _scored_pool(args.candidates)
    clients = _clients(args)
    sentences = [
        s for doc in load_corpus(args.corpus) for s in split_sentences(doc)
    ]
    augmented = augment_candidates(
        pool, sentences, threshold=args.threshold, client=clients.primary_embedding
    )
    save_candidates(augmented.candidates, args.out)
    print(
        f"augmentation added {len(augmented) - len(pool)} sentences "
        f"(pool now {len(augmented)}) -> {args.out}"
    )
    return 0


def cmd_cluster(args) -> int:
    pool = _scored_pool(args.candidates)
    if not pool.candidates:
        print("error: empty candidate file", file=sys.stderr)
        return 1
    clients = _clients(args)
    ids = [c.id for c in pool.candidates]
    matrix = clients.primary_embedding.embed_matrix(
        [c.sentence.text for c in pool.candidates]
    )
    points = reduce_dimensions(matrix, target_dim=args.target_dim, ids=ids)
    assignment = cluster_density(points, min_cluster_size=args.min_size)
    if args.soft:
        assignment = soft_assign(points, assignment)
    clusters = {
        int(c): [ids[i] for i in assignment.cluster_members(c)]
        for c in sorted(assignment.centroids)
    }
    noise = [ids[i] for i, l in enumerate(assignment.labels) if l == -1]
    payload = {
        "schema": "clusters/v1",
        "n_points": len(ids),
        "n_clusters": assignment.n_clusters,
        "noise": noise,
        "clusters": clusters,
        "membership": {
            ids[i]: kind for i, kind in enumerate(assignment.membership)
        },
    }
    Path(args.out).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"{assignment.n_clusters} clusters, {len(noise)} noise points "
        f"over {len(ids)} candidates -> {args.out}"
    )
    return 0


def _build_config(args, clients) -> RunConfig:
    cfg = RunConfig(
        augmentation=args.aug,
        percentile=args.pct,
        soft_clustering=args.soft,
        min_labels=args.min_labels,
        max_levels=args.max_levels,
        min_cluster_size=args.min_size,
        aug_threshold=args.threshold,
    )
    return cfg.with_providers(clients.model_ids)


def _prepare_pool(args, clients) -> ScoredPool:
    pool = _scored_pool(args.candidates)
    if args.aug:
        if not args.corpus:
            raise ExperimentError("--aug on requires --corpus for the search space")
        sentences = [
            s for doc in load_corpus(args.corpus) for s in split_sentences(doc)
        ]
        pool = augment_candidates(
            pool, sentences, threshold=args.threshold, client=clients.primary_embedding
        )
    return pool


def cmd_build(args) -> int:
    clients = _clients(args)
    cfg = _build_config(args, clients)
    pool = _prepare_pool(args, clients)
    filtered = percentile_filter(pool, cfg.percentile)
    taxonomy = build_taxonomy(filtered, cfg, clients, progress=print)
    serialize_taxonomy(taxonomy, args.out)
    leaves = len(taxonomy.leaves())
    print(
        f"taxonomy with {taxonomy.levels} levels, {leaves} leaves, "
        f"{len(taxonomy.nodes)} nodes -> {args.out}"
    )
    return 0


def cmd_eval_silhouette(args) -> int:
    clients = _clients(args)
    cfg = _build_config(args, clients)
    pool = _prepare_pool(args, clients)
    filtered = percentile_filter(pool, cfg.percentile)
    artifacts: list = []
    build_taxonomy(filtered, cfg, clients, artifacts=artifacts)
    values = []
    for level, (points, assignment) in enumerate(artifacts):
        score = silhouette_level(points, assignment)
        if score is None:
            print(f"level {level}: skipped (fewer than 2 clusters)")
        else:
            print(f"level {level}: {score:.3f}")
            values.append(score)
    if not values:
        print("error: no level with >= 2 clusters", file=sys.stderr)
        return 1
    print(f"mean silhouette: {sum(values) / len(values):.3f}")
    return 0


def cmd_eval_judge(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    clients = _clients(args)
    scores = judge_taxonomy(taxonomy, clients.judge)
    averages = scores.category_averages()
    for category, value in averages.items():
        print(f"{category}: {value:.2f}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {"criteria": scores.flat(), "categories": averages},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        print(f"judge detail -> {args.out}")
    return 0


def cmd_eval_coverage(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    clients = _clients(args)
    if args.labeled:
        lts = LabeledTestSet.load_jsonl(args.labeled)
    else:
        if not args.test_corpus:
            print("error: need --test-corpus or --labeled", file=sys.stderr)
            return 2
        docs = list(load_corpus(args.test_corpus))
        lts = label_test_sentences(docs, clients.test_a, clients.test_b)
        if args.save_labeled:
            lts.save_jsonl(args.save_labeled)
            print(f"labeled test set -> {args.save_labeled}")
    report = evaluate_coverage(taxonomy, lts, clients.embedding)
    print(f"test sentences: {report.n_sentences}   leaves: {report.n_leaves}")
    for tau in sorted(report.per_tau, reverse=True):
        r = report.per_tau[tau]
        print(
            f"tau {tau:.1f}: lenient {r.lenient_f1:.3f}  strict {r.strict_f1:.3f}  "
            f"matched leaves {len(r.matched_leaf_ids)}"
        )
    print(
        f"best strict tau: {report.best_strict_tau:.1f}   "
        f"utilization: {report.label_utilization:.3f}"
    )
    if args.out:
        report.save_json(args.out)
        print(f"coverage report -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read sweep config: {exc}", file=sys.stderr)
        return 1
    for key in ("corpus", "keywords", "holdout", "out_dir"):
        if key not in cfg:
            print(f"error: sweep config missing {key!r}", file=sys.stderr)
            return 1

    roster = load_roster(cfg["roster"]) if cfg.get("roster") else mock_roster()
    clients = build_clients(roster, cache_dir=cfg.get("cache_dir"))
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    docs = list(load_corpus(cfg["corpus"]))
    train, test = holdout_split(docs, cfg["holdout"])
    print(f"corpus: {len(train)} train / {len(test)} test documents")

    keywords = load_keywords(cfg["keywords"])
    mined = mine_candidates(
        train, keywords, min_doc_matches=int(cfg.get("min_doc_matches", 3))
    )
    print(f"mined {len(mined)} candidate sentences")
    pool = score_pool(mined, keywords, clients.embedding)

    test_path = out_dir / "test_set.jsonl"
    if test_path.exists() and not args.no_resume:
        lts = LabeledTestSet.load_jsonl(test_path)
        print(f"reusing labeled test set ({len(lts)} sentences)")
    else:
        lts = label_test_sentences(test, clients.test_a, clients.test_b)
        lts.save_jsonl(test_path)
        print(f"labeled {len(lts)} test sentences -> {test_path}")

    base = RunConfig(**cfg.get("base", {})).with_providers(clients.model_ids)
    grid = full_grid(base)
    inputs = SweepInputs(
        base_pool=pool,
        train_sentences=[s for d in train for s in split_sentences(d)],
        test_set=lts,
    )
    results = run_sweep(
        inputs, grid, clients, out_dir, resume=not args.no_resume, progress=print
    )

    ok = [r for r in results if r.ok]
    tables = []
    if len(ok) == len(grid) == 12:
        metrics = cfg.get("anova_metrics", list(_ANOVA_DEFAULT_METRICS))
        values_by_metric = {
            metric: {r.config.factor_key(): float(r.row[metric]) for r in ok}
            for metric in metrics
        }
        tables = [
            factorial_anova(values, metric)
            for metric, values in values_by_metric.items()
        ]
    elif len(ok) < len(grid):
        print(f"warning: {len(grid) - len(ok)} configurations failed; ANOVA skipped")

    files = emit_report(results, tables, out_dir)
    for path in files:
        print(f"report: {path}")
    return 0 if len(ok) == len(grid) else 1


def cmd_anova(args) -> int:
    rows = read_results_csv(args.results)
    values = cell_values(rows, args.metric, dataset=args.dataset)
    table = factorial_anova(values, args.metric)
    title = f"metric: {args.metric}"
    if args.dataset:
        title += f"   dataset: {args.dataset}"
    print(title)
    if table.degenerate:
        print("(degenerate: zero variance across all cells)")
    print(f"{'factor':<16} {'F':>9} {'p':>8} {'eta2':>7}  df")
    for res in table:
        p_text = "<0.001" if res.p_value < 0.001 else f"{res.p_value:.3f}"
        print(
            f"{res.factor:<16} {res.f_stat:>9.3f} {p_text:>8} "
            f"{res.eta_sq:>7.3f}  ({res.df_factor}, {res.df_error})"
        )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxonomine",
        description="Hierarchical AI-skill taxonomies from job-posting corpora.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log at INFO level"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic demo corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--ai", type=int, default=320, help="AI documents")
    p.add_argument("--partial", type=int, default=75, help="near-duplicate documents")
    p.add_argument("--noise", type=int, default=55, help="noise documents")
    p.add_argument("--test", type=int, default=50, help="holdout-month documents")
    p.set_defaults(func=cmd_synth)

    corpus = sub.add_parser("corpus", help="corpus utilities")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)
    p = corpus_sub.add_parser("validate", help="check a JSONL corpus")
    p.add_argument("path")
    p.add_argument("--dedupe", action="store_true", help="drop duplicate ids")
    p.set_defaults(func=cmd_corpus_validate)
    p = corpus_sub.add_parser("split", help="month-based holdout split")
    p.add_argument("path")
    p.add_argument("--holdout", required=True, type=_month, help="test month YYYY-MM")
    p.add_argument("--out-train", default="train.jsonl")
    p.add_argument("--out-test", default="test.jsonl")
    p.set_defaults(func=cmd_corpus_split)

    p = sub.add_parser("mine", help="keyword-mine candidate sentences")
    p.add_argument("--corpus", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--min-doc-matches", type=int, default=3)
    p.add_argument("--loose-boundaries", action="store_true")
    p.add_argument("--out", default="candidates.jsonl")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("score", help="class-relatedness scoring")
    p.add_argument("--candidates", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--out", default="scored.jsonl")
    _add_provider_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("filter", help="percentile filtering")
    p.add_argument("--candidates", required=True)
    p.add_argument("--pct", type=int, choices=PERCENTILES, required=True)
    p.add_argument("--out", default="filtered.jsonl")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("augment", help="semantic-search augmentation")
    p.add_argument("--candidates", required=True, help="scored candidate JSONL")
    p.add_argument("--corpus", required=True, help="train corpus JSONL")
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--out", default="augmented.jsonl")
    _add_provider_args(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("cluster", help="single clustering pass (diagnostic)")
    p.add_argument("--candidates", required=True)
    p.add_argument("--min-size", type=int, default=5)
    p.add_argument("--soft", type=_on_off, default=False, help="on|off")
    p.add_argument("--target-dim", type=int, default=10)
    p.add_argument("--out", default="clusters.json")
    _add_provider_args(p)
    p.set_defaults(func=cmd_cluster)

    def add_build_args(p):
        p.add_argument("--candidates", required=True, help="scored candidate JSONL")
        p.add_argument("--corpus", help="train corpus (required with --aug on)")
        p.add_argument("--aug", type=_on_off, default=False, help="on|off")
        p.add_argument("--pct", type=int, choices=PERCENTILES, default=50)
        p.add_argument("--soft", type=_on_off, default=False, help="on|off")
        p.add_argument("--min-labels", type=int, default=10)
        p.add_argument("--max-levels", type=int, default=5)
        p.add_argument("--min-size", type=int, default=5)
        p.add_argument("--threshold", type=float, default=0.9)
        _add_provider_args(p)

    p = sub.add_parser("build", help="build a taxonomy")
    add_build_args(p)
    p.add_argument("--out", default="taxonomy.json")
    p.set_defaults(func=cmd_build)

    ev = sub.add_parser("eval", help="evaluate a taxonomy")
    ev_sub = ev.add_subparsers(dest="eval_command", required=True)
    p = ev_sub.add_parser("silhouette", help="per-level and mean silhouette")
    add_build_args(p)
    p.set_defaults(func=cmd_eval_silhouette)
    p = ev_sub.add_parser("judge", help="LLM-judge category scores")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out")
    _add_provider_args(p)
    p.set_defaults(func=cmd_eval_judge)
    p = ev_sub.add_parser("coverage", help="domain coverage and utilization")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--test-corpus", help="holdout corpus JSONL")
    p.add_argument("--labeled", help="existing labeled test set JSONL")
    p.add_argument("--save-labeled", help="write the labeled test set here")
    p.add_argument("--out")
    _add_provider_args(p)
    p.set_defaults(func=cmd_eval_coverage)

    p = sub.add_parser("sweep", help="run the 12-configuration sweep")
    p.add_argument("--config", required=True, help="sweep config JSON")
    p.add_argument("--no-resume", action="store_true", help="ignore saved rows")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("anova", help="main-effects ANOVA on a results table")
    p.add_argument("--metric", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--dataset", help="dataset name when the table has several")
    p.set_defaults(func=cmd_anova)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except TaxonomineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
