"""Report emission: results CSV, readable markdown tables, ANOVA summaries,
and rendered figures.

Everything is formatted deterministically (fixed 3-decimal places, stable row
and column order) so repeated runs over the same inputs produce identical
bytes.  Figures are rendered headlessly to PNG files next to the tables.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import TAUS
from .experiments import RESULT_COLUMNS, RESULTS_SCHEMA, AnovaTable, SweepResult

logger = logging.getLogger(__name__)

_METRIC_COLUMNS = tuple(c for c in RESULT_COLUMNS if c not in ("aug", "soft", "pct"))


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def _fmt_p(p: float) -> str:
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def _config_tag(row: dict) -> str:
    return f"{row['aug']}/{row['soft']}/{row['pct']}"


def write_results_csv(results: Sequence[SweepResult], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: {RESULTS_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for result in results:
            if not result.ok:
                continue
            writer.writerow([_fmt(result.row[c]) for c in RESULT_COLUMNS])


def _column_maxima(rows: Sequence[dict]) -> dict[str, float]:
    maxima = {}
    for column in _METRIC_COLUMNS:
        values = [float(row[column]) for row in rows]
        if values:
            maxima[column] = max(values)
    return maxima


def write_results_markdown(results: Sequence[SweepResult], path: Path) -> None:
    ok_rows = [r.row for r in results if r.ok]
    failed = [r for r in results if not r.ok]
    maxima = _column_maxima(ok_rows)
    lines = ["# Sweep results", ""]
    if ok_rows:
        header = list(RESULT_COLUMNS)
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join(["---"] * len(header)) + "|")
        for row in ok_rows:
            cells = []
            for column in header:
                text = _fmt(row[column])
                if (
                    column in maxima
                    and abs(float(row[column]) - maxima[column]) < 5e-4
                ):
                    text = f"**{text}**"
                cells.append(text)
            lines.append("| " + " | ".join(cells) + " |")
    else:
        lines.append("No configuration completed.")
    if failed:
        lines += ["", "## Failed configurations", ""]
        for r in failed:
            lines.append(
                f"- aug={r.row.get('aug', 'Y' if r.config.augmentation else 'N')}"
                f" soft={'Y' if r.config.soft_clustering else 'N'}"
                f" pct={r.config.percentile}: {r.error}"
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_anova_csv(tables: Sequence[AnovaTable], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["metric", "factor", "F", "p", "eta_sq", "df_factor", "df_error"]
        )
        for table in tables:
            for res in table:
                writer.writerow(
                    [
                        table.metric,
                        res.factor,
                        f"{res.f_stat:.3f}",
                        f"{res.p_value:.6g}",
                        f"{res.eta_sq:.3f}",
                        res.df_factor,
                        res.df_error,
                    ]
                )


def anova_markdown(tables: Sequence[AnovaTable]) -> list[str]:
    lines = ["## ANOVA (main effects)", ""]
    lines.append("| metric | factor | F | p | eta^2 |")
    lines.append("|---|---|---|---|---|")
    for table in tables:
        for res in table:
            flag = " (degenerate)" if table.degenerate else ""
            lines.append(
                f"| {table.metric}{flag} | {res.factor} | {res.f_stat:.3f} "
                f"| {_fmt_p(res.p_value)} | {res.eta_sq:.3f} |"
            )
    return lines


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def figure_silhouette(results: Sequence[SweepResult], path: Path) -> Optional[Path]:
    rows = [r.row for r in results if r.ok]
    if not rows:
        return None
    tags = [_config_tag(row) for row in rows]
    values = [float(row["silhouette"]) for row in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(len(rows)), values, color="#4878b0")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(tags, rotation=45, ha="right")
    ax.set_ylabel("silhouette")
    ax.set_xlabel("config (aug/soft/pct)")
    ax.set_title("Silhouette by configuration")
    return _save(fig, path)


def figure_coverage(results: Sequence[SweepResult], path: Path) -> Optional[Path]:
    rows = [r.row for r in results if r.ok]
    if not rows:
        return None
    taus = list(TAUS)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for mode, ax in zip(("lenient", "strict"), axes):
        for row in rows:
            ys = [float(row[f"{mode}_{tau:.1f}"]) for tau in taus]
            ax.plot(taus, ys, marker="o", label=_config_tag(row))
        ax.set_title(f"{mode} coverage (macro-F1)")
        ax.set_xlabel("tau")
        ax.invert_xaxis()
    axes[0].set_ylabel("macro-F1")
    axes[1].legend(fontsize=6, ncol=2, loc="lower left")
    return _save(fig, path)


def figure_effects(tables: Sequence[AnovaTable], path: Path) -> Optional[Path]:
    tables = [t for t in tables if not t.degenerate]
    if not tables:
        return None
    factor_names = list(tables[0].factors)
    width = 0.8 / len(factor_names)
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(tables)), 4))
    for j, factor in enumerate(factor_names):
        xs = [i + j * width for i in range(len(tables))]
        ys = [t.factors[factor].eta_sq for t in tables]
        ax.bar(xs, ys, width=width, label=factor)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(tables))])
    ax.set_xticklabels([t.metric for t in tables], rotation=45, ha="right")
    ax.set_ylabel("eta^2")
    ax.set_title("Main-effect sizes by metric")
    ax.legend(fontsize=8)
    return _save(fig, path)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def emit_report(
    results: Sequence[SweepResult],
    anova_tables: Sequence[AnovaTable] = (),
    out_dir: str | Path = ".",
) -> list[Path]:
    """Write results.csv, results.md, optional ANOVA tables, and figures.

    Returns the list of files written.  An empty ``anova_tables`` omits the
    ANOVA section and its files entirely.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = out_dir / "results.csv"
    write_results_csv(results, csv_path)
    written.append(csv_path)

    md_lines_path = out_dir / "results.md"
    write_results_markdown(results, md_lines_path)
    if anova_tables:
        extra = ("\n".join(anova_markdown(anova_tables))) + "\n"
        with md_lines_path.open("a", encoding="utf-8") as fh:
            fh.write("\n" + extra)
        anova_path = out_dir / "anova.csv"
        write_anova_csv(anova_tables, anova_path)
        written.append(anova_path)
    written.append(md_lines_path)

    for maker, name in (
        (figure_silhouette, "fig_silhouette.png"),
        (figure_coverage, "fig_coverage.png"),
    ):
        artifact = maker(results, out_dir / name)
        if artifact is not None:
            written.append(artifact)
    if anova_tables:
        artifact = figure_effects(anova_tables, out_dir / "fig_effects.png")
        if artifact is not None:
            written.append(artifact)

    logger.info("report written to %s (%d files)", out_dir, len(written))
    return sorted(written)
