"""Cross-validated evaluation of confounder corrections.

Each (trial, fold) cell confounds its training fold, fits every method on
the same preprocessed training data, and scores both the entire test fold
and the largest test subset that reproduces the training set's
(group x label) mix.  The gap between the two AUCs is what naive k-fold
validation on confounded data would hide.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from . import models
from .confound import BiasSubsampleRule, assign_groups, biased_subsample_indices
from .data_core import (CovariateSet, Dataset, apply_preprocessor, fit_preprocessor,
                        principal_axes, read_dataset)
from .errors import ConfigError, EmptyCellRequired, SingleClass, TooFewSamples
from .onion import onion_fit, onion_transform
from .simulate import CohortConfig, SimConfig, confounding_predicate, simulate_pool, \
    synthetic_count_cohort

log = logging.getLogger(__name__)

TEST_SET_KINDS = ("entire", "confounded")
CSV_COLUMNS = ("method", "trial", "fold", "test_set_kind", "auc")


# ---------------------------------------------------------------------------
# metrics and splits
# ---------------------------------------------------------------------------


def auc(scores, labels) -> float:
    """Rank-sum (Mann-Whitney) AUC; tied scores earn half credit."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.size != labels.size:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise SingleClass("AUC needs both classes present")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


@dataclass
class FoldPlan:
    fold_count: int
    assignments: np.ndarray
    seed: int = 0

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def make_folds(labels, fold_count: int = 5, seed=0) -> FoldPlan:
    """Label-stratified fold assignment.

    Samples are shuffled within each class, the classes are laid end to end
    and dealt round-robin, so fold sizes differ by at most one and each
    class is spread evenly.
    """
    labels = np.asarray(labels).ravel()
    n = labels.size
    if fold_count < 2:
        raise ValueError("fold_count must be at least 2")
    if n < fold_count:
        raise TooFewSamples(f"{n} samples cannot fill {fold_count} folds")
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2 or counts.min() < fold_count:
        raise TooFewSamples(f"each class needs >= {fold_count} members, got {dict(zip(classes, counts))}")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in classes])
    assignments = np.empty(n, dtype=int)
    assignments[order] = np.arange(n) % fold_count
    return FoldPlan(fold_count, assignments, seed if isinstance(seed, int) else 0)


def cell_counts(groups, labels) -> Counter:
    return Counter(zip(list(groups), [float(v) for v in labels]))


def _as_fraction(w) -> Fraction:
    if isinstance(w, (int, np.integer)):
        return Fraction(int(w))
    return Fraction(str(float(w)))


def subset_targets(test_counts: dict, train_weights: dict):
    """Largest proportion-matching subset size and per-cell target counts.

    ``train_weights`` may hold counts or proportions.  Returns ``(m, targets)``
    with ``m = min_c floor(test_count_c / q_c)`` over cells with training
    mass ``q_c > 0`` and targets apportioned by largest remainder (ties go
    to the cell listed first).
    """
    weights = {c: _as_fraction(w) for c, w in train_weights.items() if w > 0}
    total = sum(weights.values())
    if total == 0:
        raise ValueError("training cells carry no mass")
    q = {c: w / total for c, w in weights.items()}
    missing = [c for c in q if test_counts.get(c, 0) == 0]
    if missing:
        raise EmptyCellRequired(f"training cells absent from test set: {missing}")
    m = min(math.floor(Fraction(test_counts[c]) / qc) for c, qc in q.items())
    exact = {c: m * qc for c, qc in q.items()}
    targets = {c: math.floor(v) for c, v in exact.items()}
    short = m - sum(targets.values())
    by_remainder = sorted(q, key=lambda c: -(exact[c] - targets[c]))  # stable on ties
    for c in by_remainder[:short]:
        targets[c] += 1
    return m, targets


def confounded_test_subset(test_groups, test_labels, train_weights: dict, seed=0) -> np.ndarray:
    """Indices of the largest test subset whose (group, label) mix matches training.

    Parameters
    ----------
    test_groups, test_labels : per-sample group and 0/1 label of the test set.
    train_weights : mapping ``(group, label) -> count or proportion`` from training.
    seed : sampling seed (cells are subsampled without replacement).
    """
    test_labels = np.asarray(test_labels, dtype=float)
    groups = np.asarray(list(test_groups), dtype=object)
    counts = cell_counts(groups, test_labels)
    train_weights = {(g, float(y)): w for (g, y), w in train_weights.items()}
    m, targets = subset_targets(counts, train_weights)
    rng = np.random.default_rng(seed)
    picked = []
    for (g, y), t in targets.items():
        members = np.flatnonzero((groups == g) & (test_labels == y))
        picked.append(rng.choice(members, size=t, replace=False))
    return np.sort(np.concatenate(picked)).astype(int) if picked else np.zeros(0, int)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    name: str
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def methods(self) -> list:
        seen = []
        for r in self.records:
            if r["method"] not in seen:
                seen.append(r["method"])
        return seen

    def values(self, method: str, kind: str) -> np.ndarray:
        return np.array([r["auc"] for r in self.records
                         if r["method"] == method and r["test_set_kind"] == kind], dtype=float)

    def trial_means(self, method: str, kind: str) -> np.ndarray:
        by_trial = {}
        for r in self.records:
            if r["method"] == method and r["test_set_kind"] == kind and np.isfinite(r["auc"]):
                by_trial.setdefault(r["trial"], []).append(r["auc"])
        return np.array([np.mean(v) for _, v in sorted(by_trial.items())])

    @property
    def aggregates(self) -> dict:
        """Mean, sd (across all cells) and se (across trial means) per method and test set."""
        out = {}
        for method in self.methods():
            out[method] = {}
            for kind in TEST_SET_KINDS:
                v = self.values(method, kind)
                v = v[np.isfinite(v)]
                tm = self.trial_means(method, kind)
                out[method][kind] = {
                    "mean": float(v.mean()) if v.size else float("nan"),
                    "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0 if v.size else float("nan"),
                    "se": float(tm.std(ddof=1) / np.sqrt(tm.size)) if tm.size > 1 else float("nan"),
                    "cells": int(v.size),
                }
        return out

    @property
    def failures(self) -> list:
        return [r for r in self.records if r.get("error")]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([r["method"], r["trial"], r["fold"], r["test_set_kind"], "%.17g" % r["auc"]])
        return buf.getvalue()

    def write(self, out_dir) -> dict:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "report.csv"
        csv_path.write_text(self.csv_text())
        json_path = out_dir / "report.json"
        doc = {"name": self.name, "config": self.config, "aggregates": self.aggregates,
               "records": self.records}
        json_path.write_text(json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n")
        return {"csv": csv_path, "json": json_path}

    def summary_table(self) -> str:
        agg = self.aggregates
        width = max([len("method")] + [len(m) for m in agg]) + 2
        lines = [f"{self.name}: mean AUC (SD)",
                 f"{'method':<{width}}{'entire test set':<20}{'confounded test set':<20}"]
        for method, kinds in agg.items():
            cells = []
            for kind in TEST_SET_KINDS:
                a = kinds[kind]
                cells.append(f"{a['mean']:.2f} ({a['sd']:.2f})")
            lines.append(f"{method:<{width}}{cells[0]:<20}{cells[1]:<20}")
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


DEFAULT_METHODS = [
    {"name": "logreg", "model": "logreg"},
    {"name": "logreg+ONION", "model": "logreg", "onion": True},
    {"name": "MLP", "model": "mlp"},
    {"name": "DANN", "model": "dann"},
]


def _seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _split_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.int64).tobytes())
        h.update(b"|")
    return h.hexdigest()[:16]


def _load_source(cfg: dict, trial_seed: int) -> Dataset:
    data = cfg["data"]
    source = data.get("source", "simulate")
    if source == "simulate":
        sim = SimConfig(**{**data.get("sim", {}), "seed": trial_seed})
        k = cfg.get("fold_count", 5)
        # pool sized so each fold's filtered training part holds ~n samples
        _, pool = simulate_pool(sim, int(math.ceil(sim.n * k / (k - 1))))
        return pool
    if source == "cohort":
        return synthetic_count_cohort(CohortConfig(**{**data.get("cohort", {}), "seed": trial_seed}))
    if source == "files":
        return read_dataset(data["matrix"], data["covariates"])
    raise ConfigError(f"unknown data source {source!r}")


def _confounding(cfg: dict, dataset: Dataset):
    """Return ``(groups, train_filter)`` for the configured confounding scheme.

    ``groups`` is the per-sample group label used to describe confounding
    levels; ``train_filter(train_idx, seed)`` returns the retained subset
    of a training fold.
    """
    conf = cfg.get("confounding", {"kind": "sign_filter"})
    kind = conf.get("kind", "sign_filter")
    if kind == "sign_filter":
        y1 = dataset.covariates.confounders[0]
        groups = assign_groups(y1, 0.0)
        ok = confounding_predicate(y1, dataset.y)

        def train_filter(idx, seed):
            return idx[ok[idx]]

        return groups, train_filter
    if kind == "subsample":
        rule = BiasSubsampleRule.from_dict(conf["rule"])
        groups = rule.group_of(dataset)

        def train_filter(idx, seed):
            sub = biased_subsample_indices(dataset.subset(idx), rule, seed)
            return idx[sub]

        return groups, train_filter
    if kind == "none":
        groups = np.zeros(dataset.n, dtype=object)
        return groups, lambda idx, seed: idx
    raise ConfigError(f"unknown confounding kind {kind!r}")


def _confounder_columns(dataset: Dataset, names: Optional[list]):
    cov = dataset.covariates
    names = names or cov.names
    return [cov.column(n) for n in names], [cov.kinds[cov.names.index(n)] for n in names]


def _fit_score(method: dict, cfg: dict, Xtr, ytr, ctr, kinds, Xte, train_seed: int):
    """Fit one method on preprocessed training data; return test-set scores."""
    base = dict(cfg.get("train", {}))
    base.update(method.get("train", {}))
    base["seed"] = train_seed
    tc = models.TrainConfig.from_dict(base)
    if method.get("pca_components"):
        axes = principal_axes(Xtr, min(int(method["pca_components"]), *Xtr.shape))
        mean = Xtr.mean(axis=0)
        Xtr, Xte = (Xtr - mean) @ axes, (Xte - mean) @ axes
    if method.get("onion"):
        Xtr_c = Xtr - Xtr.mean(axis=0)
        basis, _ = onion_fit(Xtr_c, ctr, seed=train_seed, on_degenerate="skip")
        Xtr, Xte = onion_transform(Xtr, basis), onion_transform(Xte, basis)
    model = method.get("model", "logreg")
    if method.get("ancova"):
        keep = models.ancova_filter(Xtr, ytr, ctr, method.get("alpha_level", 0.05))
        if keep.size == 0:
            return np.zeros(Xte.shape[0])
        Xtr, Xte = Xtr[:, keep], Xte[:, keep]
    if model == "logreg":
        params = models.logreg_fit(Xtr, ytr, tc)
    elif model == "mlp":
        params = models.mlp_fit(Xtr, ytr, tc)
    elif model == "dann":
        params, _ = models.dann_fit(Xtr, ytr, ctr, tc, kinds=kinds)
    else:
        raise ConfigError(f"unknown model {model!r}")
    return models.predict_logits(params, Xte)


def run_trial(cfg: dict, trial: int) -> list:
    """All folds of one trial; returns the AUC records."""
    seed = int(cfg.get("seed", 0))
    fold_count = int(cfg.get("fold_count", 5))
    methods = cfg.get("methods") or DEFAULT_METHODS
    dataset = _load_source(cfg, _seed(seed, trial, 0))
    if cfg["data"].get("shuffle_labels"):
        # permutation null: same features, labels re-dealt every trial
        perm = np.random.default_rng(_seed(seed, trial, 5)).permutation(dataset.n)
        cov = dataset.covariates
        dataset = Dataset(dataset.X, CovariateSet(cov.confounders, cov.label[perm], cov.names,
                                                  cov.kinds, cov.label_name),
                          dataset.feature_names)
    groups, train_filter = _confounding(cfg, dataset)
    plan = make_folds(dataset.y, fold_count, _seed(seed, trial, 1))
    folds = cfg.get("folds_per_trial") or fold_count
    pre = cfg.get("preprocess", {})
    records = []
    for fold in range(int(folds)):
        base_rec = {"trial": trial, "fold": fold}
        train_idx = train_filter(plan.train_indices(fold), _seed(seed, trial, 2, fold))
        test_idx = plan.test_indices(fold)
        ytr, yte = dataset.y[train_idx], dataset.y[test_idx]
        train_cells = cell_counts(groups[train_idx], ytr)
        conf_error = None
        try:
            conf_local = confounded_test_subset(groups[test_idx], yte, train_cells,
                                                _seed(seed, trial, 3, fold))
        except Exception as exc:  # recorded, scored as missing
            conf_local, conf_error = None, f"{type(exc).__name__}: {exc}"
        split_hash = _split_hash(train_idx, test_idx,
                                 conf_local if conf_local is not None else [])
        state = fit_preprocessor(dataset.X[train_idx], pre.get("depth_constant"),
                                 pre.get("clip", True))
        Xtr = apply_preprocessor(state, dataset.X[train_idx])
        Xte = apply_preprocessor(state, dataset.X[test_idx])
        for method in methods:
            ctr, kinds = _confounder_columns(dataset, method.get("confounders")
                                             or cfg.get("confounders"))
            ctr = [c[train_idx] for c in ctr]
            rec = {**base_rec, "method": method["name"], "split_hash": split_hash,
                   "n_train": int(train_idx.size), "n_test": int(test_idx.size),
                   "n_confounded": int(conf_local.size) if conf_local is not None else 0}
            try:
                scores = _fit_score(method, cfg, Xtr, ytr, ctr, kinds, Xte,
                                    _seed(seed, trial, 4, fold))
                entire = auc(scores, yte)
                err = None
            except Exception as exc:
                log.warning("trial %d fold %d method %s failed: %s", trial, fold,
                            method["name"], exc)
                scores, entire, err = None, float("nan"), f"{type(exc).__name__}: {exc}"
            records.append({**rec, "test_set_kind": "entire", "auc": entire, "error": err})
            if scores is not None and conf_local is not None:
                try:
                    conf_auc, cerr = auc(scores[conf_local], yte[conf_local]), None
                except Exception as exc:
                    conf_auc, cerr = float("nan"), f"{type(exc).__name__}: {exc}"
            else:
                conf_auc, cerr = float("nan"), err or conf_error
            records.append({**rec, "test_set_kind": "confounded", "auc": conf_auc, "error": cerr})
    return records


def run_experiment(config: dict, workers: int = 1) -> ExperimentReport:
    """Run every trial of an experiment config and collect an :class:`ExperimentReport`.

    Trials are independent; with ``workers > 1`` they run in separate
    processes.  Records are ordered by (trial, fold, method) regardless of
    completion order.
    """
    cfg = copy.deepcopy(config)
    trials = int(cfg.get("trials", 1))
    if workers > 1 and trials > 1:
        from joblib import Parallel, delayed

        chunks = Parallel(n_jobs=workers)(delayed(run_trial)(cfg, t) for t in range(trials))
    else:
        chunks = [run_trial(cfg, t) for t in range(trials)]
    records = [r for chunk in chunks for r in chunk]
    return ExperimentReport(cfg.get("name", "experiment"), records, cfg)


def set_path(cfg: dict, dotted: str, value):
    """Assign ``value`` at a dotted key path, creating dicts as needed."""
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def expand_sweep(config: dict) -> list:
    """``[(label, config)]``: one entry per sweep value, or the config itself."""
    sweep = config.get("sweep")
    if not sweep:
        return [("", config)]
    if len(sweep) != 1:
        raise ConfigError("sweep must name exactly one key path")
    (path, values), = sweep.items()
    out = []
    for v in values:
        c = copy.deepcopy(config)
        c.pop("sweep")
        set_path(c, path, v)
        out.append((f"{path.rsplit('.', 1)[-1]}_{v}", c))
    return out
