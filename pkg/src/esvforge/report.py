"""Evaluation report: per-level tables (class rows as ``mean +/- dev`` across
surgeries), ROC point dumps as CSV, and rendered ROC figures.

Prediction files are CSV with columns ``surgery_id, filename, target_label,
predicted_label`` followed by one probability column per class named
``p_{level}_{slug}`` in registry order (38 columns for the default taxonomy).
Probability columns are optional; without them the report skips ROC output.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import DegenerateClassesError, SchemaError
from .metrics import RocSeries, accuracy, confusion_counts, f1_scores, per_class_summary, roc_auc
from .taxonomy import LEVELS, TaxonomyRegistry, Triplet, default_registry, format_triplet, slug
from .temporal import TripletLogits


@dataclass(frozen=True)
class PredictionRecord:
    surgery_id: str
    filename: str
    target: Triplet
    predicted: Triplet
    probs: TripletLogits | None = None


@dataclass
class LevelEvaluation:
    overall_accuracy: float
    macro_f1: float
    class_accuracy: dict[str, tuple[float, float]] = field(default_factory=dict)
    class_f1: dict[str, tuple[float, float]] = field(default_factory=dict)
    roc: dict[str, RocSeries] = field(default_factory=dict)


@dataclass
class EvaluationResult:
    levels: dict[str, LevelEvaluation]
    n_samples: int
    n_surgeries: int


def _level_names(t: Triplet) -> dict[str, str]:
    return {"phase": t.phase.name, "task": t.task.name, "action": t.action.name}


def _level_probs(probs: TripletLogits, level: str) -> np.ndarray:
    return {"phase": probs.phase, "task": probs.task, "action": probs.action}[level]


def evaluate_predictions(records: list[PredictionRecord],
                         registry: TaxonomyRegistry | None = None) -> EvaluationResult:
    """Compute the full evaluation surface from prediction records."""
    registry = registry or default_registry()
    surgeries = sorted({r.surgery_id for r in records})
    levels: dict[str, LevelEvaluation] = {}
    for level in LEVELS:
        classes = registry.names(level)
        preds = [_level_names(r.predicted)[level] for r in records]
        targets = [_level_names(r.target)[level] for r in records]
        ev = LevelEvaluation(
            overall_accuracy=accuracy(preds, targets),
            macro_f1=f1_scores(preds, targets, classes).macro,
        )

        # per-class mean +/- deviation across surgeries
        per_surgery: dict[str, dict[str, tuple[float, float]]] = {}
        for sid in surgeries:
            rows = [r for r in records if r.surgery_id == sid]
            sp = [_level_names(r.predicted)[level] for r in rows]
            st = [_level_names(r.target)[level] for r in rows]
            counts = confusion_counts(sp, st, classes)
            per_surgery[sid] = {c: (counts[c].binary_accuracy, counts[c].f1) for c in classes}
        for cls in classes:
            accs = [per_surgery[sid][cls][0] for sid in surgeries]
            f1s = [per_surgery[sid][cls][1] for sid in surgeries]
            ev.class_accuracy[cls] = per_class_summary(accs)
            ev.class_f1[cls] = per_class_summary(f1s)

        # one-vs-rest ROC from probabilities, where classes are non-degenerate
        with_probs = [r for r in records if r.probs is not None]
        if with_probs:
            for ordinal, cls in enumerate(classes):
                scores = [float(_level_probs(r.probs, level)[ordinal]) for r in with_probs]
                flags = [_level_names(r.target)[level] == cls for r in with_probs]
                try:
                    ev.roc[cls] = roc_auc(scores, flags)
                except DegenerateClassesError:
                    continue
        levels[level] = ev
    return EvaluationResult(levels=levels, n_samples=len(records), n_surgeries=len(surgeries))


# -- rendering ---------------------------------------------------------------


def render_report_text(result: EvaluationResult) -> str:
    lines = [
        "Timeline segmentation evaluation",
        f"samples: {result.n_samples}   surgeries: {result.n_surgeries}",
        "",
    ]
    for level in LEVELS:
        ev = result.levels[level]
        lines.append(f"== {level.capitalize()} ==")
        lines.append(f"overall accuracy: {ev.overall_accuracy:.4f}   macro F1: {ev.macro_f1:.4f}")
        name_w = max(len(n) for n in ev.class_accuracy) + 2
        lines.append(f"{'Name':<{name_w}}{'Accuracy':>15}{'F1 Score':>15}")
        for cls in ev.class_accuracy:
            am, ad = ev.class_accuracy[cls]
            fm, fd = ev.class_f1[cls]
            lines.append(f"{cls:<{name_w}}{_pm(am, ad):>15}{_pm(fm, fd):>15}")
        if ev.roc:
            aucs = ", ".join(f"{cls}={series.auc:.3f}" for cls, series in ev.roc.items())
            lines.append(f"AUC (one-vs-rest): {aucs}")
        lines.append("")
    return "\n".join(lines)


def _pm(mean: float, dev: float) -> str:
    return f"{mean:.2f} ± {dev:.2f}"


def write_roc_points_csv(ev: LevelEvaluation, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "fpr", "tpr"])
        for cls, series in ev.roc.items():
            for fpr, tpr in series.points:
                writer.writerow([slug(cls), f"{fpr:.6f}", f"{tpr:.6f}"])


def plot_roc_figure(ev: LevelEvaluation, level: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    for cls, series in ev.roc.items():
        xs = [p[0] for p in series.points]
        ys = [p[1] for p in series.points]
        ax.plot(xs, ys, lw=1.2, label=f"{cls} (AUC {series.auc:.2f})")
    ax.plot([0, 1], [0, 1], ls="--", c="grey", lw=0.8)  # random classifier
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title(f"ROC, one-vs-rest: {level}")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_evaluation_report(result: EvaluationResult, out_dir: str | Path) -> list[Path]:
    """Write report.txt plus per-level ROC CSV dumps and figures; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    report = out_dir / "report.txt"
    report.write_text(render_report_text(result), encoding="utf-8")
    written.append(report)
    for level in LEVELS:
        ev = result.levels[level]
        if not ev.roc:
            continue
        csv_path = out_dir / f"roc_{level}.csv"
        write_roc_points_csv(ev, csv_path)
        written.append(csv_path)
        fig_path = out_dir / f"roc_{level}.png"
        plot_roc_figure(ev, level, fig_path)
        written.append(fig_path)
    return written


# -- prediction file IO --------------------------------------------------------


def prediction_columns(registry: TaxonomyRegistry) -> list[str]:
    cols = ["surgery_id", "filename", "target_label", "predicted_label"]
    for level in LEVELS:
        cols += [f"p_{level}_{slug(n)}" for n in registry.names(level)]
    return cols


def write_predictions_csv(records: list[PredictionRecord], path: str | Path,
                          registry: TaxonomyRegistry | None = None) -> None:
    registry = registry or default_registry()
    cols = prediction_columns(registry)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in records:
            row = [r.surgery_id, r.filename, format_triplet(r.target),
                   format_triplet(r.predicted)]
            if r.probs is None:
                row += [""] * (len(cols) - 4)
            else:
                row += [f"{p:.6f}" for p in r.probs.concat()]
            writer.writerow(row)


def read_predictions_csv(path: str | Path,
                         registry: TaxonomyRegistry | None = None) -> list[PredictionRecord]:
    registry = registry or default_registry()
    cols = prediction_columns(registry)
    p, t, a = registry.widths
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != cols:
            raise SchemaError(f"unexpected prediction CSV header in {path}")
        for row in reader:
            probs = None
            if row[4]:
                values = np.array([float(x) for x in row[4:]])
                probs = TripletLogits(values[:p], values[p:p + t], values[p + t:])
            records.append(PredictionRecord(
                surgery_id=row[0],
                filename=row[1],
                target=registry.parse_triplet(row[2]),
                predicted=registry.parse_triplet(row[3]),
                probs=probs,
            ))
    return records
