"""
Removing a confounder direction with ONION
==========================================

A small walk through fitting an orthonormal confounder basis, checking
what it removes, and applying it to samples that come without covariates.
"""

import numpy as np

from onionkit import onion_fit, onion_transform
from onionkit.data_core import center_columns

rng = np.random.default_rng(0)

# 200 samples, 15 features; two covariates leak into the features linearly
n, p = 200, 15
age = rng.normal(size=n)
batch = rng.integers(0, 2, n).astype(float)
X = rng.normal(size=(n, p))
X += np.outer(age, rng.normal(size=p)) + np.outer(batch, rng.normal(size=p))

Xc, mean = center_columns(X)
basis, report = onion_fit(Xc, [age, batch])
print("basis shape", basis.W.shape)
print("power iterations per confounder", report.iterations_per_confounder)
print("captured covariance", np.round(report.captured_covariance, 2))

# the columns are orthonormal
print("max |W'W - I|", np.abs(basis.W.T @ basis.W - np.eye(2)).max())

# after projection no linear combination along W survives
Xn = onion_transform(X, basis)
print("max |X_n W|", np.abs(Xn @ basis.W).max())


def covariance_with(v, M):
    v = v - v.mean()
    M = M - M.mean(axis=0)
    return np.linalg.norm(M.T @ v) / len(v)


# the first direction absorbs the age signal completely, the second one
# removes what is left of batch after the first deflation
print("feature covariance with age   before %.3f after %.3g"
      % (covariance_with(age, X), covariance_with(age, Xn)))
print("feature covariance with batch before %.3f after %.3f"
      % (covariance_with(batch, X), covariance_with(batch, Xn)))

# new samples only need the basis, not their covariates
new = rng.normal(size=(5, p))
print("unseen rows projected, max |X_n W| =", np.abs(onion_transform(new, basis) @ basis.W).max())
