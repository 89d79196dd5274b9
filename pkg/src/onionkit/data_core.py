"""Dataset containers, file I/O and the train-fitted preprocessing pipeline.

A data matrix is a plain 2-D float ``numpy.ndarray`` (rows are samples,
columns are features).  :func:`check_matrix` enforces the shape and
finiteness invariants at module boundaries.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, RankDeficient, TooFewSamples, ZeroRowSum

FLOAT_FMT = "%.17g"
COVARIATE_KINDS = ("continuous", "binary")


def check_matrix(X, name="X") -> np.ndarray:
    """Return ``X`` as a finite 2-D float array with at least one row and column."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatch(f"{name} must have n >= 1 and p >= 1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


@dataclass
class CovariateSet:
    """Confounders ``Y_1..Y_{k-1}`` plus the binary label ``Y_k``.

    ``kinds`` tags each confounder as ``"continuous"`` or ``"binary"``;
    binary confounders are stored as 0/1 floats.
    """

    confounders: list
    label: np.ndarray
    names: list = field(default_factory=list)
    kinds: list = field(default_factory=list)
    label_name: str = "label"

    def __post_init__(self):
        self.label = np.asarray(self.label, dtype=float).ravel()
        self.confounders = [np.asarray(c, dtype=float).ravel() for c in self.confounders]
        if not self.names:
            self.names = [f"Y{i + 1}" for i in range(len(self.confounders))]
        if not self.kinds:
            self.kinds = [_infer_kind(c) for c in self.confounders]
        n = self.label.size
        if len(self.names) != len(self.confounders) or len(self.kinds) != len(self.confounders):
            raise ValueError("names/kinds must have one entry per confounder")
        for name, c, kind in zip(self.names, self.confounders, self.kinds):
            if c.size != n:
                raise DimensionMismatch(f"confounder {name!r} has length {c.size}, label has {n}")
            if kind not in COVARIATE_KINDS:
                raise ValueError(f"unknown covariate kind {kind!r}")
        if not np.all(np.isin(self.label, (0.0, 1.0))):
            raise ValueError("label must contain only 0 and 1")

    @property
    def n(self) -> int:
        return self.label.size

    @property
    def n_confounders(self) -> int:
        return len(self.confounders)

    def subset(self, idx) -> "CovariateSet":
        idx = np.asarray(idx)
        return CovariateSet(
            [c[idx] for c in self.confounders],
            self.label[idx],
            list(self.names),
            list(self.kinds),
            self.label_name,
        )

    def column(self, name: str) -> np.ndarray:
        if name == self.label_name:
            return self.label
        try:
            return self.confounders[self.names.index(name)]
        except ValueError:
            raise KeyError(f"no covariate named {name!r}") from None


def _infer_kind(values: np.ndarray) -> str:
    return "binary" if np.all(np.isin(values, (0.0, 1.0))) else "continuous"


@dataclass
class Dataset:
    X: np.ndarray
    covariates: CovariateSet
    feature_names: Optional[list] = None

    def __post_init__(self):
        self.X = check_matrix(self.X)
        if self.X.shape[0] != self.covariates.n:
            raise DimensionMismatch(
                f"X has {self.X.shape[0]} rows but covariates have {self.covariates.n}"
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def y(self) -> np.ndarray:
        return self.covariates.label

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.covariates.subset(idx), self.feature_names)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def depth_normalize(X, depth_constant: float = 1e6) -> np.ndarray:
    """Rescale each row to sum to ``depth_constant``."""
    X = check_matrix(X)
    if not depth_constant > 0:
        raise ValueError("depth_constant must be positive")
    sums = X.sum(axis=1, keepdims=True)
    if np.any(sums == 0):
        bad = np.flatnonzero(sums.ravel() == 0)
        raise ZeroRowSum(f"rows with zero sum: {bad[:10].tolist()}")
    return X * (depth_constant / sums)


@dataclass
class PreprocessorState:
    mean: np.ndarray
    sd: np.ndarray
    clip_threshold: np.ndarray
    zero_sd: np.ndarray
    depth_constant: Optional[float] = None
    clip: bool = True

    @property
    def p(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "clip_threshold": self.clip_threshold.tolist(),
            "zero_sd": self.zero_sd.tolist(),
            "depth_constant": self.depth_constant,
            "clip": self.clip,
        }


def fit_preprocessor(X_train, depth_constant: Optional[float] = None, clip: bool = True,
                     percentile: float = 99.0) -> PreprocessorState:
    """Learn clip thresholds, means and standard deviations from training data.

    If ``depth_constant`` is given the rows are depth-normalized first, and
    :func:`apply_preprocessor` repeats that step on new data.  Thresholds are
    per-feature percentiles with linear interpolation between order
    statistics; mean and sd are taken on the clipped matrix.
    """
    X = check_matrix(X_train, "X_train")
    if X.shape[0] < 2:
        raise TooFewSamples("fit_preprocessor needs at least 2 training rows")
    if depth_constant is not None:
        X = depth_normalize(X, depth_constant)
    if clip:
        thresholds = np.percentile(X, percentile, axis=0, method="linear")
        X = np.minimum(X, thresholds)
    else:
        thresholds = np.full(X.shape[1], np.inf)
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    zero_sd = sd == 0
    return PreprocessorState(mean, sd, thresholds, zero_sd, depth_constant, clip)


def apply_preprocessor(state: PreprocessorState, X) -> np.ndarray:
    X = check_matrix(X)
    if X.shape[1] != state.p:
        raise DimensionMismatch(f"expected {state.p} features, got {X.shape[1]}")
    if state.depth_constant is not None:
        X = depth_normalize(X, state.depth_constant)
    if state.clip:
        X = np.minimum(X, state.clip_threshold)
    scale = np.where(state.zero_sd, 1.0, state.sd)
    out = (X - state.mean) / scale
    out[:, state.zero_sd] = 0.0
    return out


def center_columns(X):
    """Subtract column means; returns ``(centered, means)``."""
    X = check_matrix(X)
    mean = X.mean(axis=0)
    return X - mean, mean


def pca_reduce(X_train, X_test, components: int):
    """Project train and test data onto the leading principal axes of the training data.

    Parameters
    ----------
    X_train, X_test : ndarray
        Matrices with matching column counts. Only ``X_train`` is used to
        fit the centering vector and the axes.
    components : int
        Number of axes to keep.  If this exceeds the numerical rank of the
        centered training data a :class:`RankDeficient` warning is issued
        and only the rank-many axes are returned.

    Returns
    -------
    (train_scores, test_scores)
        Score matrices with columns ordered by decreasing variance.  Each
        axis is sign-fixed so its largest-magnitude loading is positive.
    """
    X_train = check_matrix(X_train, "X_train")
    X_test = check_matrix(X_test, "X_test")
    if X_test.shape[1] != X_train.shape[1]:
        raise DimensionMismatch("train and test feature counts differ")
    n, p = X_train.shape
    if components < 1 or components > min(n, p):
        raise ValueError(f"components must be in [1, {min(n, p)}], got {components}")
    axes = principal_axes(X_train, components)
    mean = X_train.mean(axis=0)
    return (X_train - mean) @ axes, (X_test - mean) @ axes


def principal_axes(X, components: int) -> np.ndarray:
    """Return a ``p x m`` matrix of orthonormal principal axes of ``X``."""
    Xc = X - X.mean(axis=0)
    n, p = Xc.shape
    if p <= n:
        evals, evecs = np.linalg.eigh(Xc.T @ Xc)
        order = np.argsort(evals)[::-1]
        evals, axes = evals[order], evecs[:, order]
    else:
        # dual form: eigenvectors of the n x n Gram matrix mapped back to feature space
        evals, evecs = np.linalg.eigh(Xc @ Xc.T)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        positive = evals > 0
        axes = np.zeros((p, evals.size))
        axes[:, positive] = (Xc.T @ evecs[:, positive]) / np.sqrt(evals[positive])
    top = max(evals[0], 0.0)
    rank = int(np.sum(evals > top * max(n, p) * np.finfo(float).eps)) if top > 0 else 0
    if components > rank:
        warnings.warn(
            RankDeficient(f"requested {components} components but numerical rank is {rank}"),
            stacklevel=3,
        )
        components = rank
    axes = axes[:, :components]
    if components:
        pivot = np.argmax(np.abs(axes), axis=0)
        signs = np.sign(axes[pivot, np.arange(components)])
        axes = axes * signs
    return axes


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_matrix(path, X, feature_names: Optional[Sequence[str]] = None) -> Path:
    """Write a headerless CSV plus a ``.json`` sidecar with ``n``, ``p`` and names."""
    path = Path(path)
    X = check_matrix(X)
    np.savetxt(path, X, delimiter=",", fmt=FLOAT_FMT)
    meta = {"n": X.shape[0], "p": X.shape[1]}
    if feature_names is not None:
        meta["feature_names"] = list(feature_names)
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_matrix(path):
    """Read a matrix written by :func:`write_matrix`; returns ``(X, feature_names)``."""
    path = Path(path)
    X = np.loadtxt(path, delimiter=",", ndmin=2)
    names = None
    side = _sidecar(path)
    if side.exists():
        meta = json.loads(side.read_text())
        if (meta.get("n"), meta.get("p")) != X.shape:
            raise DimensionMismatch(
                f"{path}: sidecar declares {meta.get('n')}x{meta.get('p')}, file holds {X.shape}"
            )
        names = meta.get("feature_names")
    return check_matrix(X, str(path)), names


def write_covariates(path, covariates: CovariateSet) -> Path:
    """CSV with a header row (one column per covariate) plus a JSON sidecar of types."""
    path = Path(path)
    columns = covariates.names + [covariates.label_name]
    values = covariates.confounders + [covariates.label]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in zip(*values):
            writer.writerow([FLOAT_FMT % v for v in row])
    types = dict(zip(covariates.names, covariates.kinds))
    types[covariates.label_name] = "binary"
    meta = {"label": covariates.label_name, "types": types}
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_covariates(path) -> CovariateSet:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    side = _sidecar(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    label_name = meta.get("label", header[-1])
    types = meta.get("types", {})
    if label_name not in header:
        raise ValueError(f"{path}: label column {label_name!r} not in header")
    names = [h for h in header if h != label_name]
    conf = [data[:, header.index(h)] for h in names]
    kinds = [types.get(h) or _infer_kind(c) for h, c in zip(names, conf)]
    return CovariateSet(conf, data[:, header.index(label_name)], names, kinds, label_name)


def write_dataset(prefix, dataset: Dataset) -> tuple:
    """Write ``<prefix>.csv`` and ``<prefix>_covariates.csv`` (with sidecars)."""
    prefix = Path(prefix)
    mpath = write_matrix(prefix.with_name(prefix.name + ".csv"), dataset.X, dataset.feature_names)
    cpath = write_covariates(prefix.with_name(prefix.name + "_covariates.csv"), dataset.covariates)
    return mpath, cpath


def read_dataset(matrix_path, covariate_path) -> Dataset:
    X, names = read_matrix(matrix_path)
    return Dataset(X, read_covariates(covariate_path), names)
