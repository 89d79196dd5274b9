"""Synthetic confounded data.

Two generators live here:

* the latent-factor model (:func:`sim_world`, :func:`sim_draw`) in which
  ``k`` latent blocks ``Z_i`` drive both the features and the covariates,
  with the label a thresholded Dirichlet-weighted mix of confounders and
  its own latent signal;
* :func:`synthetic_count_cohort`, a bin-count cohort with sex-chromosome
  proxy bins and an AT-dropout covariate, used for the sex- and GC-style
  experiments and weight-sign checks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .data_core import CovariateSet, Dataset
from .errors import EmptyTrainingSet


@dataclass
class SimConfig:
    d: int = 20
    p: int = 300
    sigma: float = 2.0
    k: int = 2
    concentration: list = field(default_factory=lambda: [40.0, 50.0])
    n: int = 6000
    seed: int = 0

    def __post_init__(self):
        if min(self.d, self.p, self.k) < 1 or self.n < 1:
            raise ValueError("d, p, k and n must all be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        self.concentration = [float(s) for s in self.concentration]
        if len(self.concentration) != self.k:
            raise ValueError(f"need {self.k} concentration values, got {len(self.concentration)}")
        if any(s <= 0 for s in self.concentration):
            raise ValueError("concentration entries must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimWorld:
    W_x: list
    W_y: list
    alpha: np.ndarray


def dirichlet(concentration, rng) -> np.ndarray:
    """One Dirichlet draw as normalized independent Gamma variates."""
    g = rng.gamma(np.asarray(concentration, dtype=float), 1.0)
    return g / g.sum()


def sim_world(config: SimConfig, rng=None) -> SimWorld:
    """Draw the loading matrices and mixing weights; uses ``config.seed`` unless ``rng`` is given."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    W_x = [rng.standard_normal((config.d, config.p)) for _ in range(config.k)]
    W_y = [rng.standard_normal(config.d) for _ in range(config.k)]
    return SimWorld(W_x, W_y, dirichlet(config.concentration, rng))


def sim_draw(world: SimWorld, config: SimConfig, n: int, rng):
    """Draw ``n`` samples; returns ``(X, CovariateSet)`` with ``k-1`` continuous confounders."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k, d, p, sigma = config.k, config.d, config.p, config.sigma
    X = np.zeros((n, p))
    ys = []
    mix = np.zeros(n)
    for i in range(k):
        Z = rng.standard_normal((n, d))
        X += Z @ world.W_x[i]
        signal = Z @ world.W_y[i]
        noise = sigma * rng.standard_normal(n)
        if i < k - 1:
            y_i = signal + noise
            ys.append(y_i)
            mix += world.alpha[i] * y_i
        else:
            mix += world.alpha[i] * signal + noise
    X += sigma * rng.standard_normal((n, p))
    label = (mix > 0).astype(float)
    names = [f"Y{i + 1}" for i in range(k - 1)]
    cov = CovariateSet(ys, label, names, ["continuous"] * (k - 1), f"Y{k}")
    return X, cov


def confounding_predicate(confounder, label) -> np.ndarray:
    """Training-set filter: keep ``Y_1 < 0`` with label 1 and ``Y_1 >= 0`` with label 0."""
    confounder = np.asarray(confounder)
    label = np.asarray(label)
    return ((confounder < 0) & (label == 1)) | ((confounder >= 0) & (label == 0))


def balanced_quadrants(confounder, label, rng) -> np.ndarray:
    """Indices subsampled so the four (sign of confounder, label) cells are equal-sized."""
    cells = [np.flatnonzero((np.asarray(confounder) >= 0) == g) for g in (False, True)]
    lab = np.asarray(label)
    groups = [c[lab[c] == v] for c in cells for v in (0, 1)]
    m = min(g.size for g in groups)
    picked = [rng.choice(g, size=m, replace=False) for g in groups]
    return np.sort(np.concatenate(picked))


def confound_split(X, covariates: CovariateSet, test_fraction: float = 0.2, seed=0,
                   strict_balance: bool = False):
    """Partition into train/test, then filter only the training side.

    Returns ``(train, test)`` as :class:`Dataset` objects.  The test side is
    the raw generative distribution unless ``strict_balance`` asks for
    equal-sized (confounder sign, label) quadrants.
    """
    if covariates.n_confounders != 1:
        raise ValueError("confound_split needs exactly one confounder (k = 2)")
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n = covariates.n
    is_test = rng.random(n) < test_fraction
    y1, label = covariates.confounders[0], covariates.label
    keep = ~is_test & confounding_predicate(y1, label)
    train_idx = np.flatnonzero(keep)
    test_idx = np.flatnonzero(is_test)
    if train_idx.size == 0:
        raise EmptyTrainingSet("confounding filter removed every training sample")
    if test_idx.size == 0:
        raise EmptyTrainingSet("test partition is empty")
    if strict_balance:
        test_idx = test_idx[balanced_quadrants(y1[test_idx], label[test_idx], rng)]
    data = Dataset(X, covariates)
    return data.subset(train_idx), data.subset(test_idx)


def simulate_confounded(config: SimConfig, test_fraction: float = 0.2, batch: int = 2000,
                        rng=None, strict_balance: bool = False):
    """Generate a filtered training set of exactly ``config.n`` samples plus its test set.

    Samples are drawn in batches; each is assigned to the test side with
    probability ``test_fraction``, otherwise it is a training candidate
    that must pass :func:`confounding_predicate`.  Drawing stops once
    ``config.n`` training samples have passed.  Returns
    ``(world, train, test)``.
    """
    if config.k != 2:
        raise ValueError("the confounding filter is defined for k = 2")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    world = sim_world(config, rng)
    train_parts, test_parts = [], []
    have = 0
    while have < config.n:
        X, cov = sim_draw(world, config, batch, rng)
        is_test = rng.random(batch) < test_fraction
        keep = ~is_test & confounding_predicate(cov.confounders[0], cov.label)
        take = np.flatnonzero(keep)[: config.n - have]
        if take.size:
            last = take[-1]
        else:
            last = batch - 1
        # test samples are only those drawn up to the last accepted training sample
        t_idx = np.flatnonzero(is_test[: last + 1]) if have + take.size >= config.n \
            else np.flatnonzero(is_test)
        data = Dataset(X, cov)
        train_parts.append(data.subset(take))
        test_parts.append(data.subset(t_idx))
        have += take.size
    train, test = _concat(train_parts), _concat(test_parts)
    if strict_balance:
        test = test.subset(balanced_quadrants(test.covariates.confounders[0], test.y, rng))
    return world, train, test


def simulate_pool(config: SimConfig, n_filtered: int, batch: int = 2000, rng=None):
    """Draw raw samples until ``n_filtered`` of them satisfy the training predicate.

    Used for cross-validation, where the filter is applied per fold.
    Returns ``(world, Dataset)`` with the unfiltered pool.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    world = sim_world(config, rng)
    parts, have = [], 0
    while have < n_filtered:
        X, cov = sim_draw(world, config, batch, rng)
        ok = np.flatnonzero(confounding_predicate(cov.confounders[0], cov.label))
        if have + ok.size >= n_filtered:
            stop = ok[n_filtered - have - 1] + 1
            parts.append(Dataset(X[:stop], cov.subset(np.arange(stop))))
            have = n_filtered
        else:
            parts.append(Dataset(X, cov))
            have += ok.size
    return world, _concat(parts)


def _concat(parts) -> Dataset:
    X = np.vstack([p.X for p in parts])
    c0 = parts[0].covariates
    confs = [np.concatenate([p.covariates.confounders[i] for p in parts])
             for i in range(c0.n_confounders)]
    label = np.concatenate([p.covariates.label for p in parts])
    return Dataset(X, CovariateSet(confs, label, list(c0.names), list(c0.kinds), c0.label_name),
                   parts[0].feature_names)


# ---------------------------------------------------------------------------
# bin-count cohorts
# ---------------------------------------------------------------------------


@dataclass
class CohortConfig:
    """Synthetic sequencing-style cohort.

    Default cell counts (156/245 female healthy/cancer, 58/275 male) give a
    cohort in which cancer is more common among males.
    """

    female_healthy: int = 156
    female_cancer: int = 245
    male_healthy: int = 58
    male_cancer: int = 275
    n_autosomal: int = 400
    n_chrx: int = 1
    n_chry: int = 1
    # fraction of autosomal bins altered in tumours
    altered_fraction: float = 0.1
    tumour_fraction: tuple = (0.02, 0.15)
    reads_per_sample: float = 2e5
    # multiplicative read-depth jitter (lognormal sd)
    depth_jitter: float = 0.3
    # per-bin biological noise (lognormal sd)
    bin_noise: float = 0.05
    gc_bias: bool = False
    seed: int = 0


def _gc_profile_for(bin_gc, coverage):
    from .confound import GcProfile

    pct = np.clip(np.round(bin_gc * 100).astype(int), 0, 100)
    expected = np.bincount(pct, minlength=101) / pct.size
    observed = np.bincount(pct, weights=coverage, minlength=101) / coverage.sum()
    return GcProfile(expected, observed)


def synthetic_count_cohort(config: Optional[CohortConfig] = None) -> Dataset:
    """Bin counts for a cohort with sex (and optionally GC-bias) covariates.

    Features are Poisson counts per bin: autosomal bins, then ``n_chrx``
    chrX-like bins (two copies in females, one in males) and ``n_chry``
    chrY-like bins (present in males only).  Cancer samples carry a
    tumour-fraction-scaled gain or loss on a fixed set of autosomal bins.
    With ``gc_bias`` each sample gets a GC-dependent coverage slope and an
    ``at_dropout`` covariate (in percent) computed from its GC profile.
    Covariates: ``sex`` (0 female, 1 male), optionally ``at_dropout``; label
    1 = cancer.
    """
    from .confound import at_dropout

    c = config or CohortConfig()
    rng = np.random.default_rng(c.seed)
    cells = [(0, 0, c.female_healthy), (0, 1, c.female_cancer),
             (1, 0, c.male_healthy), (1, 1, c.male_cancer)]
    sex = np.concatenate([np.full(m, s, float) for s, _, m in cells])
    label = np.concatenate([np.full(m, y, float) for _, y, m in cells])
    n = sex.size
    order = rng.permutation(n)
    sex, label = sex[order], label[order]

    pa = c.n_autosomal
    p = pa + c.n_chrx + c.n_chry
    base = rng.gamma(20.0, 1.0 / 20.0, size=p)
    n_alt = max(1, int(round(c.altered_fraction * pa)))
    altered = rng.choice(pa, size=n_alt, replace=False)
    direction = rng.choice([-1.0, 1.0], size=n_alt)

    copies = np.full((n, p), 2.0)
    copies[:, pa:pa + c.n_chrx] = np.where(sex[:, None] == 1, 1.0, 2.0)
    copies[:, pa + c.n_chrx:] = np.where(sex[:, None] == 1, 1.0, 0.02)
    tf = rng.uniform(*c.tumour_fraction, size=n) * label
    # a gain adds one copy, a loss removes one, diluted by tumour fraction
    copies[:, altered] += tf[:, None] * direction[None, :]

    rate = base * copies * np.exp(c.bin_noise * rng.standard_normal((n, p)))
    covs, names, kinds = [sex], ["sex"], ["binary"]
    if c.gc_bias:
        bin_gc = np.clip(rng.normal(0.45, 0.08, size=p), 0.2, 0.8)
        slope = rng.gamma(2.0, 1.0, size=n)
        rate = rate * np.exp(slope[:, None] * (bin_gc[None, :] - 0.45))
        dropout = np.array([100.0 * at_dropout(_gc_profile_for(bin_gc, rate[i] / base))
                            for i in range(n)])
        covs.append(dropout)
        names.append("at_dropout")
        kinds.append("continuous")
    depth = c.reads_per_sample * np.exp(c.depth_jitter * rng.standard_normal(n))
    lam = rate / rate.sum(axis=1, keepdims=True) * depth[:, None]
    X = rng.poisson(lam).astype(float)
    feature_names = ([f"auto_{j}" for j in range(pa)] + [f"chrX_{j}" for j in range(c.n_chrx)]
                     + [f"chrY_{j}" for j in range(c.n_chry)])
    return Dataset(X, CovariateSet(covs, label, names, kinds, "cancer"), feature_names)
