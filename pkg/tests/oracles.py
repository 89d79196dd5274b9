"""Independent reference computations used by several test modules."""

import itertools

import numpy as np
import scipy.linalg


def onion_oracle(X, confounders):
    """Basis from the constrained eigenproblem, solved densely on the orthogonal complement.

    For confounder i, the unit vector orthogonal to the earlier columns that
    maximizes ``w' X' y y' X w`` is the top eigenvector of the objective
    restricted to the complement, mapped back to feature space.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    cols = []
    for y in confounders:
        y = np.asarray(y, dtype=float) - np.mean(y)
        N = scipy.linalg.null_space(np.array(cols)) if cols else np.eye(p)
        a = N.T @ (X.T @ y)
        M = np.outer(a, a)
        evals, evecs = np.linalg.eigh(M)
        w = N @ evecs[:, -1]
        if y @ X @ w < 0:
            w = -w
        cols.append(w)
    return np.column_stack(cols)


def brute_force_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for a, b in itertools.product(pos, neg):
        total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def central_difference(f, arrays, eps=1e-6):
    """Numerical gradient of scalar ``f()`` with respect to each array (perturbed in place)."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = a[i]
            a[i] = old + eps
            up = f()
            a[i] = old - eps
            down = f()
            a[i] = old
            g[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)
