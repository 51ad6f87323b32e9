"""Configuration sweep and factorial analysis.

The sweep runs the full 2 (augmentation) x 3 (percentile) x 2 (soft
clustering) grid: for each configuration it filters the shared scored pool,
builds a taxonomy, and evaluates silhouette, judge categories, coverage, and
utilization into one results row.  Completed rows are persisted under their
configuration fingerprint, so an interrupted sweep resumes where it stopped.

The analysis side fits a main-effects-only ANOVA to any 12-value metric
column: with one observation per cell, interaction terms would consume every
error degree of freedom, so factor sums of squares are measured against the
7-df residual.  P-values come from the upper tail of the F distribution,
computed with a continued-fraction regularized incomplete beta.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .config import PERCENTILES, RunConfig, full_grid  # noqa: F401  (re-export)
from .corpus import Sentence
from .errors import ExperimentError, TaxonomineError
from .evaluation import (
    TAUS,
    CoverageReport,
    JudgeScores,
    LabeledTestSet,
    evaluate_coverage,
    judge_taxonomy,
    silhouette_mean,
)
from .providers import Clients
from .selection import ScoredPool, augment_candidates, percentile_filter
from .taxonomy import Taxonomy, build_taxonomy, serialize_taxonomy

logger = logging.getLogger(__name__)

RESULTS_SCHEMA = "sweep-results/v1"

#: Factor name -> (position in the cell key, levels).
FACTORS: dict[str, tuple[int, tuple]] = {
    "augmentation": (0, (True, False)),
    "soft_clustering": (1, (True, False)),
    "percentile": (2, PERCENTILES),
}

RESULT_COLUMNS = (
    "aug",
    "soft",
    "pct",
    "silhouette",
    "clarity",
    "hierarchical_coherence",
    "orthogonality",
    "completeness",
    *[f"lenient_{tau:.1f}" for tau in TAUS],
    *[f"strict_{tau:.1f}" for tau in TAUS],
    "best_utilization",
)


# ---------------------------------------------------------------------------
# F-distribution upper tail
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 1e-15
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ExperimentError("incomplete beta continued fraction failed to converge")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), accurate to ~1e-10."""
    if a <= 0 or b <= 0:
        raise ExperimentError("beta parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the continued fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_upper_tail(f: float, df1: int, df2: int) -> float:
    """P(F >= f) for an F(df1, df2) variate."""
    if df1 < 1 or df2 < 1:
        raise ExperimentError("degrees of freedom must be >= 1")
    if f < 0:
        raise ExperimentError("F statistic must be non-negative")
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return reg_inc_beta(df2 / 2.0, df1 / 2.0, x)


# ---------------------------------------------------------------------------
# Factorial ANOVA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnovaResult:
    factor: str
    f_stat: float
    p_value: float
    eta_sq: float
    df_factor: int
    df_error: int
    ss_factor: float


@dataclass
class AnovaTable:
    metric: str
    grand_mean: float
    ss_total: float
    ss_error: float
    df_error: int
    factors: dict[str, AnovaResult]
    degenerate: bool = False

    def __iter__(self):
        return iter(self.factors.values())


CellKey = tuple[bool, bool, int]


def expected_cells() -> set[CellKey]:
    return {
        (aug, soft, pct)
        for aug in (True, False)
        for soft in (True, False)
        for pct in PERCENTILES
    }


def factorial_anova(values: dict[CellKey, float], metric: str = "metric") -> AnovaTable:
    """Main-effects ANOVA over the balanced 12-cell grid.

    ``values`` maps ``(augmentation, soft_clustering, percentile)`` to one
    metric observation.  Returns per-factor F, p, and eta squared; a
    zero-variance input is flagged degenerate with F = 0, p = 1.
    """
    missing = expected_cells() - set(values)
    extra = set(values) - expected_cells()
    if missing or extra:
        raise ExperimentError(
            f"ANOVA needs exactly the 12 factor cells; missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}"
        )
    xs = np.array([float(values[key]) for key in sorted(values)], dtype=np.float64)
    n = xs.size
    grand = float(xs.mean())
    ss_total = float(np.sum((xs - grand) ** 2))

    df_factor = {"augmentation": 1, "soft_clustering": 1, "percentile": 2}
    df_error = n - 1 - sum(df_factor.values())

    if ss_total <= 1e-20:
        factors = {
            name: AnovaResult(
                factor=name,
                f_stat=0.0,
                p_value=1.0,
                eta_sq=0.0,
                df_factor=df_factor[name],
                df_error=df_error,
                ss_factor=0.0,
            )
            for name in FACTORS
        }
        return AnovaTable(
            metric=metric,
            grand_mean=grand,
            ss_total=ss_total,
            ss_error=0.0,
            df_error=df_error,
            factors=factors,
            degenerate=True,
        )

    ss_by_factor: dict[str, float] = {}
    for name, (pos, levels) in FACTORS.items():
        ss = 0.0
        for level in levels:
            group = np.array(
                [float(v) for key, v in values.items() if key[pos] == level]
            )
            ss += group.size * (float(group.mean()) - grand) ** 2
        ss_by_factor[name] = ss

    ss_error = max(ss_total - sum(ss_by_factor.values()), 0.0)
    ms_error = ss_error / df_error

    factors = {}
    for name, ss in ss_by_factor.items():
        dff = df_factor[name]
        ms_factor = ss / dff
        if ms_error > 0:
            f_stat = ms_factor / ms_error
        else:
            f_stat = math.inf if ms_factor > 0 else 0.0
        factors[name] = AnovaResult(
            factor=name,
            f_stat=f_stat,
            p_value=f_upper_tail(f_stat, dff, df_error),
            eta_sq=ss / ss_total,
            df_factor=dff,
            df_error=df_error,
            ss_factor=ss,
        )
    return AnovaTable(
        metric=metric,
        grand_mean=grand,
        ss_total=ss_total,
        ss_error=ss_error,
        df_error=df_error,
        factors=factors,
    )


# ---------------------------------------------------------------------------
# Results-table I/O
# ---------------------------------------------------------------------------

_TRUE_TOKENS = {"y", "yes", "true", "1"}
_FALSE_TOKENS = {"n", "no", "false", "0"}


def _parse_flag(token: str, column: str) -> bool:
    lowered = token.strip().lower()
    if lowered in _TRUE_TOKENS:
        return True
    if lowered in _FALSE_TOKENS:
        return False
    raise ExperimentError(f"cannot parse {column}={token!r} as a yes/no flag")


def read_results_csv(path: str | Path) -> list[dict[str, str]]:
    """Read a results table, skipping ``#`` comment lines."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            lines = [line for line in fh if not line.lstrip().startswith("#")]
    except OSError as exc:
        raise ExperimentError(f"cannot read results table {path}: {exc}") from exc
    reader = csv.DictReader(lines)
    rows = [dict(row) for row in reader]
    if not rows:
        raise ExperimentError(f"results table {path} has no data rows")
    return rows


def cell_values(
    rows: Sequence[dict[str, str]],
    metric: str,
    dataset: Optional[str] = None,
) -> dict[CellKey, float]:
    """Extract the 12-cell metric grid from results rows.

    Rows may carry a ``dataset`` column; pass ``dataset`` to select one, or
    leave it out when the table holds a single dataset.
    """
    if rows and "dataset" in rows[0]:
        names = sorted({row["dataset"] for row in rows})
        if dataset is None:
            if len(names) > 1:
                raise ExperimentError(
                    f"results table holds several datasets {names}; pick one"
                )
            dataset = names[0]
        elif dataset not in names:
            raise ExperimentError(
                f"dataset {dataset!r} not in results table (has {names})"
            )
        rows = [row for row in rows if row["dataset"] == dataset]
    elif dataset is not None:
        raise ExperimentError("results table has no dataset column")

    values: dict[CellKey, float] = {}
    for row in rows:
        for column in ("aug", "soft", "pct", metric):
            if column not in row or row[column] in (None, ""):
                raise ExperimentError(f"results row missing column {column!r}")
        key = (
            _parse_flag(row["aug"], "aug"),
            _parse_flag(row["soft"], "soft"),
            int(row["pct"]),
        )
        if key in values:
            raise ExperimentError(f"duplicate factor cell {key}")
        try:
            values[key] = float(row[metric])
        except ValueError as exc:
            raise ExperimentError(
                f"metric {metric!r} value {row[metric]!r} is not numeric"
            ) from exc
    return values


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepInputs:
    """Shared, config-independent inputs: the scored mined pool, the train
    sentences (augmentation search space), and the labeled test set."""

    base_pool: ScoredPool
    train_sentences: list[Sentence]
    test_set: LabeledTestSet


@dataclass
class SweepResult:
    config: RunConfig
    status: str  # "ok" | "failed"
    row: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def result_row(
    cfg: RunConfig,
    silhouette: float,
    judge: JudgeScores,
    coverage: CoverageReport,
) -> dict:
    """One results-table row in :data:`RESULT_COLUMNS` order."""
    averages = judge.category_averages()
    row: dict = {
        "aug": "Y" if cfg.augmentation else "N",
        "soft": "Y" if cfg.soft_clustering else "N",
        "pct": cfg.percentile,
        "silhouette": silhouette,
        "clarity": averages["clarity"],
        "hierarchical_coherence": averages["hierarchical_coherence"],
        "orthogonality": averages["orthogonality"],
        "completeness": averages["completeness"],
    }
    for tau in TAUS:
        row[f"lenient_{tau:.1f}"] = coverage.per_tau[tau].lenient_f1
    for tau in TAUS:
        row[f"strict_{tau:.1f}"] = coverage.per_tau[tau].strict_f1
    row["best_utilization"] = coverage.label_utilization
    return row


def run_config(
    cfg: RunConfig,
    pool: ScoredPool,
    test_set: LabeledTestSet,
    clients: Clients,
) -> tuple[dict, Taxonomy]:
    """Filter -> build -> evaluate one configuration against a (possibly
    augmented) scored pool.  Returns the results row and the taxonomy."""
    filtered = percentile_filter(pool, cfg.percentile)
    artifacts: list = []
    taxonomy = build_taxonomy(filtered, cfg, clients, artifacts=artifacts)
    silhouette = silhouette_mean(artifacts)
    judge = judge_taxonomy(taxonomy, clients.judge)
    coverage = evaluate_coverage(taxonomy, test_set, clients.embedding)
    return result_row(cfg, silhouette, judge, coverage), taxonomy


def run_sweep(
    inputs: SweepInputs,
    grid: Sequence[RunConfig],
    clients: Clients,
    out_dir: str | Path,
    *,
    resume: bool = True,
    progress: Optional[Callable[[str], None]] = None,
) -> list[SweepResult]:
    """Run every grid configuration, persisting one row file per fingerprint.

    With ``resume`` (default), configurations whose row file already exists
    are loaded instead of re-run.  A configuration that fails is recorded as
    a failed row and the sweep continues.  The augmented pool is computed at
    most once per augmentation threshold and shared.
    """
    if not grid:
        raise ExperimentError("sweep grid is empty")
    out_dir = Path(out_dir)
    rows_dir = out_dir / "rows"
    tax_dir = out_dir / "taxonomies"
    rows_dir.mkdir(parents=True, exist_ok=True)
    tax_dir.mkdir(parents=True, exist_ok=True)

    def note(msg: str) -> None:
        logger.info(msg)
        if progress is not None:
            progress(msg)

    augmented_pools: dict[float, ScoredPool] = {}

    def pool_for(cfg: RunConfig) -> ScoredPool:
        if not cfg.augmentation:
            return inputs.base_pool
        if cfg.aug_threshold not in augmented_pools:
            note(f"augmenting pool at threshold {cfg.aug_threshold}")
            augmented_pools[cfg.aug_threshold] = augment_candidates(
                inputs.base_pool,
                inputs.train_sentences,
                threshold=cfg.aug_threshold,
                client=clients.primary_embedding,
            )
        return augmented_pools[cfg.aug_threshold]

    results: list[SweepResult] = []
    for i, cfg in enumerate(grid):
        fp = cfg.fingerprint()
        row_path = rows_dir / f"{fp}.json"
        tag = (
            f"config {i + 1}/{len(grid)} "
            f"(aug={'Y' if cfg.augmentation else 'N'} "
            f"soft={'Y' if cfg.soft_clustering else 'N'} pct={cfg.percentile})"
        )
        if resume and row_path.exists():
            try:
                saved = json.loads(row_path.read_text(encoding="utf-8"))
                results.append(
                    SweepResult(
                        config=cfg,
                        status=saved["status"],
                        row=saved.get("row", {}),
                        error=saved.get("error"),
                    )
                )
                note(f"{tag}: resumed from {row_path.name}")
                continue
            except (json.JSONDecodeError, KeyError) as exc:
                logger.warning("ignoring corrupt row file %s: %s", row_path, exc)
        note(f"{tag}: running")
        try:
            row, taxonomy = run_config(cfg, pool_for(cfg), inputs.test_set, clients)
            result = SweepResult(config=cfg, status="ok", row=row)
            serialize_taxonomy(taxonomy, tax_dir / f"{fp}.json")
        except TaxonomineError as exc:
            logger.exception("%s failed", tag)
            result = SweepResult(config=cfg, status="failed", error=str(exc))
        row_path.write_text(
            json.dumps(
                {
                    "config": asdict(cfg),
                    "status": result.status,
                    "row": result.row,
                    "error": result.error,
                },
                sort_keys=True,
                indent=2,
                default=str,
            )
            + "\n",
            encoding="utf-8",
        )
        results.append(result)
        note(f"{tag}: {result.status}")
    return results
