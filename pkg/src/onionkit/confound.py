"""Empirical confounding: AT dropout and biased training-set subsampling."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data_core import Dataset
from .errors import EmptyClass

GC_BINS = 101


@dataclass
class GcProfile:
    """Expected and observed coverage fractions indexed by integer percent GC 0..100."""

    expected: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        self.expected = np.asarray(self.expected, dtype=float)
        self.observed = np.asarray(self.observed, dtype=float)
        for name, v in (("expected", self.expected), ("observed", self.observed)):
            if v.shape != (GC_BINS,):
                raise ValueError(f"{name} fractions must have length {GC_BINS}")
            if np.any(v < 0):
                raise ValueError(f"{name} fractions must be non-negative")
            if v.sum() > 1 + 1e-9:
                raise ValueError(f"{name} fractions sum to {v.sum()} > 1")


def at_dropout(profile: GcProfile) -> float:
    """Sum over gc = 0..50 of ``max(E_gc - O_gc, 0)``."""
    short = profile.expected[:51] - profile.observed[:51]
    return float(np.sum(np.maximum(short, 0.0)))


def read_gc_profile(path) -> GcProfile:
    """Read a CSV with columns ``gc, expected_fraction, observed_fraction``."""
    expected = np.zeros(GC_BINS)
    observed = np.zeros(GC_BINS)
    seen = set()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            gc = int(row["gc"])
            if not 0 <= gc <= 100 or gc in seen:
                raise ValueError(f"{path}: bad or repeated gc value {gc}")
            seen.add(gc)
            expected[gc] = float(row["expected_fraction"])
            observed[gc] = float(row["observed_fraction"])
    return GcProfile(expected, observed)


def write_gc_profile(path, profile: GcProfile) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gc", "expected_fraction", "observed_fraction"])
        for gc in range(GC_BINS):
            w.writerow([gc, "%.17g" % profile.expected[gc], "%.17g" % profile.observed[gc]])
    return path


@dataclass
class BiasSubsampleRule:
    """Which (group, label) cells to thin, and how hard.

    ``group_column`` names the covariate that defines groups.  With a
    ``threshold`` the covariate is split into ``"low"`` (strictly below)
    and ``"high"`` (at or above); otherwise its raw values are the groups.
    ``groups`` may hold precomputed per-sample group labels instead.
    """

    drop_cells: list
    drop_probability: float = 0.9
    group_column: Optional[str] = None
    threshold: Optional[float] = None
    groups: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")
        self.drop_cells = [(_norm_group(g), float(y)) for g, y in self.drop_cells]

    def group_of(self, dataset: Dataset) -> np.ndarray:
        if self.groups is not None:
            g = np.asarray(self.groups, dtype=object)
            if g.size != dataset.n:
                raise ValueError("rule.groups length does not match the dataset")
            return np.array([_norm_group(v) for v in g], dtype=object)
        if self.group_column is None:
            raise ValueError("rule needs group_column or groups")
        return assign_groups(dataset.covariates.column(self.group_column), self.threshold)

    def to_dict(self) -> dict:
        return {
            "group_column": self.group_column,
            "threshold": self.threshold,
            "drop_probability": self.drop_probability,
            "drop_cells": [[g, y] for g, y in self.drop_cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BiasSubsampleRule":
        return cls(d["drop_cells"], d.get("drop_probability", 0.9), d.get("group_column"),
                   d.get("threshold"))


def _norm_group(v):
    # numeric group labels compare as floats so 1, 1.0 and "1" from JSON agree
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return float(v)


def assign_groups(values, threshold: Optional[float] = None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if threshold is None:
        return np.array([float(v) for v in values], dtype=object)
    return np.where(values < threshold, "low", "high").astype(object)


def rule_from_json(path) -> BiasSubsampleRule:
    return BiasSubsampleRule.from_dict(json.loads(Path(path).read_text()))


def biased_subsample_indices(dataset: Dataset, rule: BiasSubsampleRule, seed=0) -> np.ndarray:
    """Sorted indices of samples kept after thinning the rule's drop cells."""
    rng = np.random.default_rng(seed)
    groups = rule.group_of(dataset)
    labels = dataset.y
    in_drop = np.zeros(dataset.n, dtype=bool)
    for g, y in rule.drop_cells:
        in_drop |= (groups == g) & (labels == y)
    # one uniform per sample keeps the draw independent of which cells are listed
    u = rng.random(dataset.n)
    keep = ~in_drop | (u >= rule.drop_probability)
    idx = np.flatnonzero(keep)
    for cls in (0.0, 1.0):
        if np.any(labels == cls) and not np.any(labels[idx] == cls):
            raise EmptyClass(f"subsampling removed every sample with label {cls:g}")
    return idx


def biased_subsample(dataset: Dataset, rule: BiasSubsampleRule, seed=0) -> Dataset:
    return dataset.subset(biased_subsample_indices(dataset, rule, seed))


def categorical_confound_rule(group_column: str, drop_cells, drop_probability: float = 0.9
                              ) -> BiasSubsampleRule:
    """Rule thinning the listed (category, label) cells, e.g. male cancer and female healthy."""
    return BiasSubsampleRule(list(drop_cells), drop_probability, group_column)


def gc_confound_rule(dropout_values, threshold: float = 3.5, drop_probability: float = 0.9
                     ) -> BiasSubsampleRule:
    """Thin healthy samples below ``threshold`` and cancer samples at or above it."""
    groups = assign_groups(dropout_values, threshold)
    return BiasSubsampleRule([("low", 0), ("high", 1)], drop_probability, threshold=threshold,
                             groups=groups)
