"""Confusion metrics, ROC/AUC and the protocol benchmark runners.

Every binary fold is scored twice: with healthy as the positive class (H)
and with lame as the positive class (L). The Avg column averages the H and
L confusion counts and recomputes the rates from those averages, which is
how the published tables are laid out.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from . import __version__
from .config import RunConfig
from .exceptions import EmptyConfusion, SingleClass
from .features import CowFeatureExtractor, family_columns, group_columns
from .ingest import DatasetManifest, load_records
from .svm import OneVsRestSVC, PolynomialSVC, make_folds

HEALTHY, LAME = 1, -1
ORIENTATIONS = ("H", "L", "Avg")
METRIC_NAMES = ("precision", "sensitivity", "specificity", "accuracy")
SIGNAL_ARMS = ("accel", "gravity", "gyro", "attitude")
FAMILY_ARMS = ("czt", "cdf")
AUC_AXIS = (0.38, 0.69)  # observed range on the real data; used as plot bounds


def round_half_up(v: float) -> int:
    return int(Decimal(repr(float(v))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ConfusionCounts:
    """Confusion counts; fractional values appear only in averaged columns."""

    tp: float
    fp: float
    fn: float
    tn: float

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionCounts":
        """Same predictions scored with the other class as positive."""
        return ConfusionCounts(self.tn, self.fn, self.fp, self.tp)

    @classmethod
    def from_labels(cls, y_true, y_pred, positive=HEALTHY) -> "ConfusionCounts":
        t = np.asarray(y_true) == positive
        p = np.asarray(y_pred) == positive
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(t & ~p)), int(np.sum(~t & ~p)))

    @staticmethod
    def mean(counts) -> "ConfusionCounts":
        counts = list(counts)
        n = len(counts)
        return ConfusionCounts(*(sum(getattr(c, a) for c in counts) / n for a in ("tp", "fp", "fn", "tn")))


@dataclass(frozen=True)
class Metrics:
    """Rates in percent at full precision; ``degenerate`` names 0/0 rates."""

    precision: float
    sensitivity: float
    specificity: float
    accuracy: float
    degenerate: tuple[str, ...] = ()

    def rounded(self) -> dict[str, int]:
        return {m: round_half_up(getattr(self, m)) for m in METRIC_NAMES}


def _rate(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return 100.0 * num / den


def metrics(c: ConfusionCounts) -> Metrics:
    if c.total <= 0:
        raise EmptyConfusion("no examples in confusion counts")
    flags: list[str] = []
    return Metrics(
        precision=_rate(c.tp, c.tp + c.fp, "precision", flags),
        sensitivity=_rate(c.tp, c.tp + c.fn, "sensitivity", flags),
        specificity=_rate(c.tn, c.tn + c.fp, "specificity", flags),
        accuracy=100.0 * (c.tp + c.tn) / c.total,
        degenerate=tuple(flags),
    )


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for f, t, th in zip(self.fpr, self.tpr, self.thresholds):
            w.writerow([repr(float(f)), repr(float(t)), repr(float(th))])
        return buf.getvalue()


def roc_auc(scores, labels, positive=HEALTHY) -> RocCurve:
    """ROC by sweeping a threshold down through the unique scores.

    The first point is (0, 0) at threshold +inf; tied scores move the curve
    diagonally. AUC is the trapezoidal area under the points.
    """
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(labels) == positive
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, pos = s[order], pos[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(pos)[last]
    fp = np.cumsum(~pos)[last]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return RocCurve(fpr, tpr, thresholds, auc)


@dataclass(frozen=True, eq=False)
class FoldResult:
    fold: int
    test_ids: tuple[str, ...]
    y_true: np.ndarray
    y_pred: np.ndarray
    scores: np.ndarray
    counts: dict[str, ConfusionCounts]
    roc: RocCurve | None
    degenerate: bool = False

    @property
    def metrics(self) -> dict[str, Metrics]:
        return {o: _as_metrics(c) for o, c in self.counts.items()}

    @property
    def auc(self) -> float:
        return self.roc.auc if self.roc is not None else float("nan")


def _as_metrics(c) -> Metrics:
    return c if isinstance(c, Metrics) else metrics(c)


def _mean_metrics(ms) -> Metrics:
    ms = list(ms)
    return Metrics(*(float(np.mean([getattr(m, n) for m in ms])) for n in METRIC_NAMES))


def _binary_counts(y_true, y_pred) -> dict[str, ConfusionCounts]:
    h = ConfusionCounts.from_labels(y_true, y_pred, HEALTHY)
    l = h.swapped()
    return {"H": h, "L": l, "Avg": ConfusionCounts.mean([h, l])}


@dataclass(eq=False)
class ProtocolReport:
    protocol: str
    arm: str
    folds: list[FoldResult]
    config: RunConfig
    n_features: int
    multiclass: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def valid_folds(self) -> list[FoldResult]:
        return [f for f in self.folds if not f.degenerate]

    def fold_accuracy(self) -> np.ndarray:
        key = "macro" if self.multiclass else "Avg"
        return np.array([f.metrics[key].accuracy for f in self.valid_folds])

    @property
    def mean_accuracy(self) -> float:
        return float(self.fold_accuracy().mean())

    @property
    def mean_auc(self) -> float:
        return float(np.nanmean([f.auc for f in self.valid_folds]))

    def scenarios(self) -> dict[str, dict[str, ConfusionCounts]]:
        """worst / average / best columns in the published layout.

        worst and best are the folds with the lowest and highest accuracy
        (first one on ties); average holds fold-averaged counts.
        """
        folds = self.valid_folds
        acc = self.fold_accuracy()
        worst = folds[int(np.argmin(acc))]
        best = folds[int(np.argmax(acc))]
        if self.multiclass:
            avg = {"macro": _mean_metrics(f.counts["macro"] for f in folds)}
        else:
            avg = {k: ConfusionCounts.mean(f.counts[k] for f in folds) for k in ("H", "L")}
            avg["Avg"] = ConfusionCounts.mean([avg["H"], avg["L"]])
        return {"worst": worst.counts, "average": avg, "best": best.counts}

    def scenario_metrics(self) -> dict[str, dict[str, Metrics]]:
        return {s: {o: _as_metrics(c) for o, c in cols.items()} for s, cols in self.scenarios().items()}

    # ------------------------------------------------------------------ output

    def rows(self):
        """Long-format rows ``(protocol, arm, fold, orientation, metric, value)``."""
        out = []
        for f in self.folds:
            for o, c in f.counts.items():
                if isinstance(c, ConfusionCounts):
                    for name in ("tp", "fp", "fn", "tn"):
                        out.append((self.protocol, self.arm, f.fold, o, name, getattr(c, name)))
                m = _as_metrics(c)
                for name in METRIC_NAMES:
                    out.append((self.protocol, self.arm, f.fold, o, name, getattr(m, name)))
            out.append((self.protocol, self.arm, f.fold, "score", "auc", f.auc))
            out.append((self.protocol, self.arm, f.fold, "score", "degenerate", int(f.degenerate)))
        for scen, cols in self.scenarios().items():
            for o, c in cols.items():
                if isinstance(c, ConfusionCounts):
                    for name in ("tp", "fp", "fn", "tn"):
                        out.append((self.protocol, self.arm, scen, o, name, getattr(c, name)))
                m = _as_metrics(c)
                for name in METRIC_NAMES:
                    out.append((self.protocol, self.arm, scen, o, name, getattr(m, name)))
        out.append((self.protocol, self.arm, "mean", "score", "accuracy", self.mean_accuracy))
        out.append((self.protocol, self.arm, "mean", "score", "auc", self.mean_auc))
        return out

    def to_text(self) -> str:
        scen = self.scenarios()
        orients = list(next(iter(scen.values())))
        header = ["", *(f"{s}:{o}" for s in scen for o in orients)]
        table = []
        if not self.multiclass:
            for name in ("tp", "fp", "fn", "tn"):
                table.append([name.upper(), *(_fmt_count(getattr(scen[s][o], name)) for s in scen for o in orients)])
        labels = {"precision": "Pre.", "sensitivity": "Sen.", "specificity": "Spe.", "accuracy": "Acc."}
        for name in METRIC_NAMES:
            row = [labels[name]]
            for s in scen:
                for o in orients:
                    c = scen[s][o]
                    m = _as_metrics(c)
                    row.append(str(round_half_up(getattr(m, name))))
            table.append(row)
        widths = [max(len(r[i]) for r in [header, *table]) for i in range(len(header))]
        lines = [f"{self.protocol} / {self.arm}  ({len(self.valid_folds)} folds, {self.n_features} features)"]
        for r in [header, *table]:
            lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
        lines.append(f"mean accuracy {self.mean_accuracy:.1f}%  mean AUC {self.mean_auc:.3f}"
                     f"  (AUC axis {AUC_AXIS[0]}-{AUC_AXIS[1]})")
        return "\n".join(lines) + "\n"

    def roc_files(self) -> dict[str, str]:
        return {f"roc_{self.arm}_{f.fold}.csv": f.roc.to_csv() for f in self.folds if f.roc is not None}


def _fmt_count(v) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:g}"


@dataclass(eq=False)
class AblationReport:
    protocol: str
    arms: dict[str, ProtocolReport]
    config: RunConfig

    def ranking(self, arms=SIGNAL_ARMS) -> list[tuple[str, float]]:
        """Arms ordered by mean accuracy, best first (ties keep arm order)."""
        present = [(a, self.arms[a].mean_accuracy) for a in arms if a in self.arms]
        return sorted(present, key=lambda t: -t[1])

    def rows(self):
        out = []
        for rep in self.arms.values():
            out.extend(rep.rows())
        return out

    def to_text(self) -> str:
        parts = [rep.to_text() for rep in self.arms.values()]
        for title, arms in (("signal groups", SIGNAL_ARMS), ("feature families", FAMILY_ARMS)):
            ranked = self.ranking(arms)
            if ranked:
                parts.append(f"ranking by mean accuracy ({title}): "
                             + ", ".join(f"{a} {acc:.1f}%" for a, acc in ranked) + "\n")
        return "\n".join(parts)

    def roc_files(self) -> dict[str, str]:
        out = {}
        for rep in self.arms.values():
            out.update(rep.roc_files())
        return out


def rows_to_csv(rows, config: RunConfig) -> str:
    buf = io.StringIO()
    for line in config.to_text().splitlines():
        buf.write(f"# {line.lstrip('# ')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["protocol", "arm", "fold", "orientation", "metric", "value"])
    for r in rows:
        *head, value = r
        w.writerow([*head, repr(float(value))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# feature tables and runners


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Per-cow feature matrix (rows ordered by cow id)."""

    cow_ids: tuple[str, ...]
    scores: np.ndarray
    X: np.ndarray

    @property
    def binary_labels(self) -> np.ndarray:
        return np.where(self.scores == 1, HEALTHY, LAME)

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest, config: RunConfig = RunConfig(),
                      channel_group: str = "all") -> "FeatureTable":
        jobs = config.resolved_jobs()
        records = load_records(manifest, n_jobs=jobs)
        return cls.from_records(records, config, channel_group)

    @classmethod
    def from_records(cls, records, config: RunConfig = RunConfig(), channel_group: str = "all") -> "FeatureTable":
        ext = CowFeatureExtractor(
            channel_group=channel_group, median_order=config.median_order,
            lowpass_cutoff_hz=config.lowpass_cutoff_hz, lowpass_order=config.lowpass_order,
            threshold=config.threshold, log_floor=config.log_floor, a0=config.czt_a0,
            theta0=config.czt_theta0, w0=config.czt_w0, phi0=config.czt_phi0,
            decimation=config.decimation, n_jobs=config.resolved_jobs(),
        )
        records = sorted(records, key=lambda r: r.cow_id)
        X = ext.fit_transform(records)
        return cls(tuple(r.cow_id for r in records), np.array([r.lameness_score for r in records]), X)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cow_id", "score", "label", *(f"f{i + 1:04d}" for i in range(self.X.shape[1]))])
        for cow, s, lab, row in zip(self.cow_ids, self.scores, self.binary_labels, self.X):
            w.writerow([cow, int(s), "healthy" if lab == HEALTHY else "lame", *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureTable":
        rows = list(csv.reader(io.StringIO(text)))
        body = rows[1:]
        return cls(tuple(r[0] for r in body), np.array([int(r[1]) for r in body]),
                   np.array([[float(v) for v in r[3:]] for r in body]).reshape(len(body), -1))


def _fit_fold(X, y, train, test, fold, params, multiclass):
    if multiclass:
        model = OneVsRestSVC(**params).fit(X[train], y[train])
        scores = model.decision_function(X[test])
    else:
        model = PolynomialSVC(positive_label=HEALTHY, **params).fit(X[train], y[train])
        scores = model.decision_function(X[test])
    return fold, model.predict(X[test]), scores


def _evaluate(table: FeatureTable, columns, config: RunConfig, protocol: str, arm: str,
              multiclass: bool = False) -> ProtocolReport:
    X = table.X if columns is None else table.X[:, columns]
    y = table.scores if multiclass else table.binary_labels
    plan = make_folds(table.cow_ids, y, config.folds, config.seed, config.test_size)
    pos = {c: i for i, c in enumerate(table.cow_ids)}
    splits = [(np.array([pos[c] for c in tr]), np.array([pos[c] for c in te])) for tr, te in plan]
    params = config.svm_params()
    jobs = config.resolved_jobs()
    if jobs != 1 and len(splits) > 1:
        from joblib import Parallel, delayed

        fitted = Parallel(n_jobs=jobs)(delayed(_fit_fold)(X, y, tr, te, f, params, multiclass)
                                       for f, (tr, te) in enumerate(splits))
    else:
        fitted = [_fit_fold(X, y, tr, te, f, params, multiclass) for f, (tr, te) in enumerate(splits)]
    folds = []
    for (f, pred, scores), (_, te) in zip(fitted, splits):
        truth = y[te]
        test_ids = tuple(table.cow_ids[i] for i in te)
        if multiclass:
            folds.append(_multiclass_fold(f, test_ids, truth, pred, scores, np.unique(y)))
        else:
            roc = roc_auc(scores, truth, HEALTHY) if len(np.unique(truth)) == 2 else None
            folds.append(FoldResult(f, test_ids, truth, pred, scores, _binary_counts(truth, pred), roc,
                                    degenerate=roc is None))
    return ProtocolReport(protocol, arm, folds, config, X.shape[1], multiclass)


def _multiclass_fold(fold, test_ids, truth, pred, scores, classes) -> FoldResult:
    present = np.unique(truth)
    if len(present) < 2:
        return FoldResult(fold, test_ids, truth, pred, scores, {}, None, degenerate=True)
    per_class, aucs = [], []
    for ci, c in enumerate(classes):
        if c not in present:
            continue
        per_class.append(metrics(ConfusionCounts.from_labels(truth, pred, c)))
        col = scores[:, ci] if scores.ndim == 2 else (scores if ci == 0 else -scores)
        aucs.append(roc_auc(col, truth, c).auc)
    macro = _mean_metrics(per_class)
    roc = RocCurve(np.array([]), np.array([]), np.array([]), float(np.mean(aucs)))
    return FoldResult(fold, test_ids, truth, pred, scores, {"macro": macro}, roc)


def _table(data, config: RunConfig) -> FeatureTable:
    if isinstance(data, FeatureTable):
        return data
    if isinstance(data, DatasetManifest):
        return FeatureTable.from_manifest(data, config)
    return FeatureTable.from_records(data, config)


def run_protocol1(data, config: RunConfig = RunConfig()) -> ProtocolReport:
    """All channels, all features (optionally narrowed by ``config``)."""
    table = _table(data, config)
    cols = _columns(config.channel_group, config.feature_family)
    arm = "all" if cols is None else f"{config.channel_group}-{config.feature_family}"
    return _evaluate(table, cols, config, "protocol1", arm)


def _columns(group: str, family: str):
    if group == "all" and family == "all":
        return None
    g = group_columns(group)
    f = family_columns(family)
    return np.intersect1d(g, f)


def run_protocol2(data, config: RunConfig = RunConfig()) -> AblationReport:
    """One run per signal group, then one per feature family."""
    table = _table(data, config)
    arms = {}
    for g in SIGNAL_ARMS:
        arms[g] = _evaluate(table, group_columns(g), config, "protocol2", g)
    for fam in FAMILY_ARMS:
        arms[fam] = _evaluate(table, family_columns(fam), config, "protocol2", fam)
    return AblationReport("protocol2", arms, config)


def run_multiclass(data, config: RunConfig = RunConfig()) -> ProtocolReport:
    """Five-level scores, one-vs-rest, macro-averaged per-class metrics."""
    table = _table(data, config)
    classes = np.unique(table.scores)
    cols = _columns(config.channel_group, config.feature_family)
    if len(classes) == 2 and HEALTHY in classes:
        # healthy vs one lame level is exactly the binary problem
        return _evaluate(table, cols, config, "multiclass", "binary")
    return _evaluate(table, cols, config, "multiclass", "all", multiclass=True)


def report_header(config: RunConfig) -> str:
    return f"gaitscreen {__version__}  seed={config.seed}\n" + config.to_text()
