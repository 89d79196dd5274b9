"""ONION: peel confounder directions off a data matrix.

For each confounder ``Y_i`` in turn, find the unit vector ``w`` that
maximizes ``(Y_i' X_d w)^2`` where ``X_d`` is the data with all previously
found directions projected out, then append ``w`` to the basis.  The
normalized data is ``X - X W W'``; it needs no covariates, so a fitted basis
can be frozen and applied to unseen samples.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data_core import check_matrix
from .errors import DegenerateConfounder, DimensionMismatch, NotCentered, ZeroOperator

SIGN_CONVENTION = "YtXw_nonneg"


def power_iteration(matvec, dim: int, tol: float = 1e-10, max_iter: int = 1000, seed=0):
    """Leading eigenvector of a symmetric PSD operator.

    Parameters
    ----------
    matvec : callable
        Maps a length-``dim`` vector ``u`` to ``M u``.
    dim : int
        Dimension of the space.
    tol : float
        Stop once ``|1 - |u_t . u_{t-1}|| < tol``.
    max_iter : int
        Maximum number of operator applications.
    seed : int or numpy.random.Generator
        Source of the random start vector.

    Returns
    -------
    (u, iterations, converged)
    """
    rng = np.random.default_rng(seed)
    u = _unit(rng.standard_normal(dim))
    v = matvec(u)
    if not np.any(v):
        # one deterministic restart from a fresh draw before giving up
        u = _unit(rng.standard_normal(dim))
        v = matvec(u)
        if not np.any(v):
            raise ZeroOperator("operator maps the start vector and its restart to zero")
    iterations = 0
    converged = False
    while True:
        iterations += 1
        nv = np.linalg.norm(v)
        if nv == 0:
            raise ZeroOperator("operator collapsed to zero during iteration")
        u_new = v / nv
        delta = abs(1.0 - abs(float(u_new @ u)))
        u = u_new
        if delta < tol:
            converged = True
            break
        if iterations >= max_iter:
            break
        v = matvec(u)
    return u, iterations, converged


def _unit(v):
    return v / np.linalg.norm(v)


@dataclass
class OrthonormalBasis:
    """``p x m`` matrix whose columns span the confounded subspace."""

    W: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2:
            raise DimensionMismatch("basis must be a p x m matrix")

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @classmethod
    def empty(cls, p: int) -> "OrthonormalBasis":
        return cls(np.zeros((p, 0)))


@dataclass
class OnionFitReport:
    iterations_per_confounder: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    captured_covariance: list = field(default_factory=list)
    # indices (into the input confounder list) of confounders that were skipped
    skipped: list = field(default_factory=list)
    # input index of each basis column
    confounder_index: list = field(default_factory=list)


def onion_fit(X, confounders, tol: float = 1e-10, max_iter: int = 1000, seed=0,
              degenerate_tol: float = 1e-10, on_degenerate: str = "raise"):
    """Build the confounder basis from centered data.

    Parameters
    ----------
    X : ndarray, shape (n, p)
        Column-centered data.
    confounders : sequence of length-n vectors
        ``Y_1..Y_{k-1}``, processed in order.  Each is centered before use.
    tol, max_iter, seed
        Power-iteration controls.
    degenerate_tol : float
        A confounder is degenerate when ``||X_d' Y|| < degenerate_tol * ||X|| * ||Y||``.
    on_degenerate : {"raise", "skip"}
        Raise :class:`DegenerateConfounder`, or leave the confounder out of
        the basis and list its index in ``report.skipped``.

    Returns
    -------
    (OrthonormalBasis, OnionFitReport)
    """
    X = check_matrix(X)
    n, p = X.shape
    scale = max(1.0, float(np.max(np.abs(X))))
    if np.any(np.abs(X.mean(axis=0)) > 1e-6 * scale):
        raise NotCentered("X must be column-centered before onion_fit")
    if on_degenerate not in ("raise", "skip"):
        raise ValueError("on_degenerate must be 'raise' or 'skip'")
    ys = [np.asarray(y, dtype=float).ravel() for y in confounders]
    if not 1 <= len(ys) <= p:
        raise ValueError(f"need between 1 and p={p} confounders, got {len(ys)}")
    for y in ys:
        if y.size != n:
            raise DimensionMismatch(f"confounder length {y.size} != n={n}")

    rng = np.random.default_rng(seed)
    x_norm = np.linalg.norm(X)
    Xd = X.copy()
    columns = []
    report = OnionFitReport()
    for i, y in enumerate(ys):
        y = y - y.mean()
        if columns:
            w_prev = columns[-1]
            Xd -= np.outer(Xd @ w_prev, w_prev)
        cross = Xd.T @ y
        if np.linalg.norm(cross) < degenerate_tol * x_norm * np.linalg.norm(y) or not np.any(y):
            msg = f"confounder {i} has no covariance with the remaining subspace"
            if on_degenerate == "raise":
                raise DegenerateConfounder(msg, index=i)
            report.skipped.append(i)
            continue

        def matvec(u, Xd=Xd, y=y):
            # X_d' Y Y' X_d u without forming the p x p matrix
            s = y @ (Xd @ u)
            return Xd.T @ (y * s)

        w, iters, ok = power_iteration(matvec, p, tol=tol, max_iter=max_iter, seed=rng)
        score = float(y @ (Xd @ w))
        if score < 0:
            w, score = -w, -score
        columns.append(w)
        report.iterations_per_confounder.append(iters)
        report.converged.append(bool(ok))
        report.captured_covariance.append(score * score)
        report.confounder_index.append(i)

    W = np.column_stack(columns) if columns else np.zeros((p, 0))
    return OrthonormalBasis(W), report


def onion_transform(X, basis) -> np.ndarray:
    """Return ``X - X W W'``.  Uses no covariates."""
    X = check_matrix(X)
    W = basis.W if isinstance(basis, OrthonormalBasis) else np.asarray(basis, dtype=float)
    if W.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"basis has p={W.shape[0]}, data has {X.shape[1]} columns")
    if W.shape[1] == 0:
        return X.copy()
    return X - (X @ W) @ W.T


def confounded_part(X, basis) -> np.ndarray:
    """``X W W'``, the component removed by :func:`onion_transform`."""
    X = check_matrix(X)
    W = basis.W if isinstance(basis, OrthonormalBasis) else np.asarray(basis, dtype=float)
    if W.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"basis has p={W.shape[0]}, data has {X.shape[1]} columns")
    return (X @ W) @ W.T


def save_basis(path, basis: OrthonormalBasis, report: OnionFitReport = None) -> Path:
    path = Path(path)
    doc = {
        "p": basis.p,
        "m": basis.m,
        # one list per basis vector; repr round-trips float64 exactly
        "columns": basis.W.T.tolist(),
        "sign_convention": SIGN_CONVENTION,
        "fit_report": asdict(report) if report is not None else {},
    }
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def load_basis(path):
    """Returns ``(basis, report_dict)``."""
    doc = json.loads(Path(path).read_text())
    p, m = int(doc["p"]), int(doc["m"])
    cols = doc["columns"]
    W = np.array(cols, dtype=float).T if m else np.zeros((p, 0))
    if W.shape != (p, m):
        raise DimensionMismatch(f"{path}: declared {p}x{m}, columns give {W.shape}")
    return OrthonormalBasis(W), doc.get("fit_report", {})
