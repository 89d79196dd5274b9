import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onionkit.simulate import (CohortConfig, SimConfig, confound_split, confounding_predicate,
                               dirichlet, sim_draw, sim_world, simulate_confounded,
                               simulate_pool, synthetic_count_cohort)

SMALL = SimConfig(d=4, p=10, n=300)


@pytest.fixture(scope="module")
def split():
    cfg = SimConfig()
    X, cov = sim_draw(sim_world(cfg), cfg, 6000, np.random.default_rng(5))
    return confound_split(X, cov, 0.2, seed=0)


@pytest.fixture(scope="module")
def cohort():
    return synthetic_count_cohort(CohortConfig(n_autosomal=50, n_chrx=2, n_chry=2))


class TestConfig:
    def test_defaults(self):
        c = SimConfig()
        assert (c.d, c.p, c.sigma, c.k, c.concentration) == (20, 300, 2.0, 2, [40.0, 50.0])

    @pytest.mark.parametrize("kw", [{"d": 0}, {"sigma": 0}, {"concentration": [1.0]},
                                    {"concentration": [1.0, -1.0]}, {"n": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)


class TestWorld:
    def test_concentrated_dirichlet(self):
        world = sim_world(SimConfig(d=2, p=3, concentration=[1e9, 1e9]))
        np.testing.assert_allclose(world.alpha, [0.5, 0.5], atol=1e-3)

    def test_deterministic(self):
        a, b = sim_world(SimConfig(seed=5)), sim_world(SimConfig(seed=5))
        for x, y in zip(a.W_x + a.W_y + [a.alpha], b.W_x + b.W_y + [b.alpha]):
            np.testing.assert_array_equal(x, y)
        c = sim_world(SimConfig(seed=6))
        assert not np.array_equal(a.W_x[0], c.W_x[0])

    def test_shapes(self):
        w = sim_world(SimConfig(d=3, p=7, k=3, concentration=[1, 2, 3]))
        assert [m.shape for m in w.W_x] == [(3, 7)] * 3
        assert [v.shape for v in w.W_y] == [(3,)] * 3

    def test_dirichlet_mean(self):
        rng = np.random.default_rng(0)
        cfg = SimConfig(d=1, p=1)
        alphas = np.array([sim_world(cfg, rng).alpha for _ in range(10_000)])
        np.testing.assert_allclose(alphas.mean(axis=0), [4 / 9, 5 / 9], atol=0.01)

    @settings(max_examples=50)
    @given(st.lists(st.floats(1e-2, 1e3), min_size=1, max_size=6), st.integers(0, 2**32 - 1))
    def test_dirichlet_on_simplex(self, conc, seed):
        a = dirichlet(conc, np.random.default_rng(seed))
        assert np.all(a >= 0)
        assert abs(a.sum() - 1) < 1e-12


class TestDraw:
    def test_noise_free_single_factor(self):
        cfg = SimConfig(d=3, p=12, k=1, concentration=[1.0], sigma=1e-9)
        world = sim_world(cfg)
        X, cov = sim_draw(world, cfg, 500, np.random.default_rng(1))
        assert cov.n_confounders == 0
        # recover the latent block from the (near noise-free) features
        Z = np.linalg.lstsq(world.W_x[0].T, X.T, rcond=None)[0].T
        signal = Z @ world.W_y[0]
        clear = np.abs(signal) > 1e-6
        np.testing.assert_array_equal(cov.label[clear], (signal[clear] > 0).astype(float))

    def test_cross_covariance_direction(self):
        cfg = SimConfig(sigma=0.1)
        world = sim_world(cfg)
        X, cov = sim_draw(world, cfg, 50_000, np.random.default_rng(2))
        y1 = cov.confounders[0]
        v = X.T @ (y1 - y1.mean())
        truth = world.W_x[0].T @ world.W_y[0]
        assert abs(np.corrcoef(v, truth)[0, 1]) > 0.9

    def test_prevalence(self):
        cfg = SimConfig()
        X, cov = sim_draw(sim_world(cfg), cfg, 10_000, np.random.default_rng(3))
        assert abs(cov.label.mean() - 0.5) <= 0.02

    def test_column_variance(self):
        cfg = SimConfig()
        X, _ = sim_draw(sim_world(cfg), cfg, 50_000, np.random.default_rng(4))
        expected = cfg.d * cfg.k + cfg.sigma ** 2
        assert abs(X.var(axis=0).mean() / expected - 1) < 0.05
        assert np.abs(X.mean(axis=0)).max() < 0.2

    def test_names(self):
        X, cov = sim_draw(sim_world(SMALL), SMALL, 5, np.random.default_rng(0))
        assert X.shape == (5, 10)
        assert cov.names == ["Y1"] and cov.label_name == "Y2"
        assert cov.kinds == ["continuous"]


class TestConfoundSplit:
    def test_predicate_holds_on_train(self, split):
        train, _ = split
        assert confounding_predicate(train.covariates.confounders[0], train.y).all()

    def test_sign_separates_train(self, split):
        train, _ = split
        pred = (train.covariates.confounders[0] < 0).astype(float)
        assert np.mean(pred == train.y) == 1.0

    def test_test_side_unfiltered(self, split):
        _, test = split
        y1 = test.covariates.confounders[0]
        cells = {(bool(s), int(v)) for s, v in zip(y1 >= 0, test.y)}
        assert len(cells) == 4
        assert not confounding_predicate(y1, test.y).all()

    def test_strict_balance(self):
        cfg = SMALL
        X, cov = sim_draw(sim_world(cfg), cfg, 2000, np.random.default_rng(6))
        _, test = confound_split(X, cov, 0.3, seed=1, strict_balance=True)
        y1 = test.covariates.confounders[0]
        counts = [np.sum(((y1 >= 0) == s) & (test.y == v)) for s in (0, 1) for v in (0, 1)]
        assert len(set(counts)) == 1

    def test_empty_train(self):
        from onionkit.data_core import CovariateSet
        from onionkit.errors import EmptyTrainingSet

        cov = CovariateSet([np.ones(10)], np.ones(10))
        with pytest.raises(EmptyTrainingSet):
            confound_split(np.zeros((10, 2)), cov, 0.5)


class TestSimulateConfounded:
    def test_exact_train_size(self):
        world, train, test = simulate_confounded(SimConfig(d=4, p=10, n=777), batch=100)
        assert train.n == 777
        assert confounding_predicate(train.covariates.confounders[0], train.y).all()
        assert 0.1 < test.n / (train.n / 0.5 + test.n) < 0.3

    def test_deterministic(self):
        _, a, ta = simulate_confounded(SMALL)
        _, b, tb = simulate_confounded(SMALL)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(ta.X, tb.X)

    def test_pool(self):
        _, pool = simulate_pool(SMALL, 250, batch=64)
        ok = confounding_predicate(pool.covariates.confounders[0], pool.y)
        assert ok.sum() == 250 and ok[-1]


class TestCohort:
    def test_cell_counts(self, cohort):
        sex, y = cohort.covariates.column("sex"), cohort.y
        counts = [int(np.sum((sex == s) & (y == v))) for s in (0, 1) for v in (0, 1)]
        assert counts == [156, 245, 58, 275]

    def test_sex_proxies(self, cohort):
        sex = cohort.covariates.column("sex")
        depth = cohort.X.sum(axis=1)
        frac = cohort.X / depth[:, None]
        chrx, chry = frac[:, 50:52].sum(axis=1), frac[:, 52:].sum(axis=1)
        assert chrx[sex == 0].min() > chrx[sex == 1].max()
        assert chry[sex == 1].min() > chry[sex == 0].max()

    def test_gc_covariate(self):
        d = synthetic_count_cohort(CohortConfig(n_autosomal=60, gc_bias=True, seed=3))
        assert d.covariates.names == ["sex", "at_dropout"]
        drop = d.covariates.column("at_dropout")
        assert np.all(drop >= 0) and drop.std() > 0

    def test_deterministic(self):
        cfg = CohortConfig(n_autosomal=20, seed=9)
        np.testing.assert_array_equal(synthetic_count_cohort(cfg).X, synthetic_count_cohort(cfg).X)
