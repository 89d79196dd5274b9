import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onionkit.errors import DegenerateConfounder, DimensionMismatch, NotCentered, ZeroOperator
from onionkit.onion import (OrthonormalBasis, confounded_part, load_basis, onion_fit,
                            onion_transform, power_iteration, save_basis)
from oracles import onion_oracle


def centered(rng, n, p):
    X = rng.normal(size=(n, p))
    return X - X.mean(axis=0)


def confounded_instance(seed, n=60, p=12, m=2):
    rng = np.random.default_rng(seed)
    X = centered(rng, n, p)
    ys = [X @ rng.normal(size=p) + rng.normal(size=n) for _ in range(m)]
    return X, ys


class TestPowerIteration:
    def test_diagonal(self):
        M = np.diag([4.0, 1.0])
        u, iters, ok = power_iteration(lambda v: M @ v, 2)
        assert ok
        assert abs(abs(u[0]) - 1) < 1e-5

    def test_rank_one_first_step(self):
        a = np.array([1.0, -2.0, 3.0])
        target = a / np.linalg.norm(a)
        u, iters, ok = power_iteration(lambda v: a * (a @ v), 3, max_iter=1)
        assert iters == 1 and not ok
        assert np.allclose(u, target, atol=1e-12) or np.allclose(u, -target, atol=1e-12)
        # the second application confirms the fixed point
        u, iters, ok = power_iteration(lambda v: a * (a @ v), 3)
        assert ok and iters == 2

    def test_random_psd_matches_eigh(self, rng):
        A = rng.normal(size=(6, 6))
        M = A.T @ A
        u, _, ok = power_iteration(lambda v: M @ v, 6, tol=1e-14, max_iter=10000)
        lead = np.linalg.eigh(M)[1][:, -1]
        assert ok
        assert min(np.linalg.norm(u - lead), np.linalg.norm(u + lead)) < 1e-6

    def test_unit_norm(self, rng):
        A = rng.normal(size=(4, 4))
        u, _, _ = power_iteration(lambda v: A.T @ (A @ v), 4, max_iter=3)
        assert abs(np.linalg.norm(u) - 1) < 1e-12

    def test_zero_operator(self):
        with pytest.raises(ZeroOperator):
            power_iteration(lambda v: np.zeros_like(v), 3)

    def test_non_convergence_flagged(self):
        M = np.diag([1.0, 0.999999])
        _, iters, ok = power_iteration(lambda v: M @ v, 2, tol=1e-15, max_iter=5)
        assert iters == 5 and not ok


class TestOnionFit:
    def test_single_confounder_closed_form(self, rng):
        X = centered(rng, 40, 7)
        y = rng.normal(size=40)
        basis, report = onion_fit(X, [y])
        yc = y - y.mean()
        target = X.T @ yc / np.linalg.norm(X.T @ yc)
        np.testing.assert_allclose(basis.W[:, 0], target, atol=1e-10)
        assert report.iterations_per_confounder == [2] and report.converged == [True]
        assert report.captured_covariance[0] == pytest.approx(np.sum((X.T @ yc) ** 2), rel=1e-10)

    def test_identical_confounders_degenerate(self, rng):
        X = centered(rng, 30, 5)
        y = rng.normal(size=30)
        with pytest.raises(DegenerateConfounder) as info:
            onion_fit(X, [y, y.copy()])
        assert info.value.index == 1

    def test_skip_degenerate(self, rng):
        X = centered(rng, 30, 5)
        y = rng.normal(size=30)
        basis, report = onion_fit(X, [y, 2 * y, rng.normal(size=30)], on_degenerate="skip")
        assert basis.m == 2
        assert report.skipped == [1]
        assert report.confounder_index == [0, 2]
        assert len(report.converged) == len(report.captured_covariance) == basis.m

    def test_orthogonal_columns(self):
        X = np.zeros((4, 3))
        X[:, 0] = [1, -1, 1, -1]
        X[:, 1] = [1, 1, -1, -1]
        X[:, 2] = [1, -1, -1, 1]
        basis, _ = onion_fit(X, [X[:, 0]])
        np.testing.assert_allclose(basis.W[:, 0], [1, 0, 0], atol=1e-12)

    def test_second_direction_is_projected_cross_covariance(self):
        X, (y1, y2) = confounded_instance(3)
        basis, _ = onion_fit(X, [y1, y2])
        w1 = basis.W[:, 0]
        Xd = X @ (np.eye(X.shape[1]) - np.outer(w1, w1))
        v = Xd.T @ (y2 - y2.mean())
        v -= (v @ w1) * w1
        v /= np.linalg.norm(v)
        if (y2 - y2.mean()) @ X @ v < 0:
            v = -v
        np.testing.assert_allclose(basis.W[:, 1], v, atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_oracle(self, seed):
        X, ys = confounded_instance(seed, m=3)
        basis, _ = onion_fit(X, ys, seed=seed)
        np.testing.assert_allclose(basis.W, onion_oracle(X, ys), atol=1e-6)

    def test_sign_convention(self):
        X, ys = confounded_instance(11, m=3)
        basis, _ = onion_fit(X, ys)
        for w, y in zip(basis.W.T, ys):
            assert (y - y.mean()) @ X @ w >= 0

    def test_seed_independent(self):
        X, ys = confounded_instance(12)
        a, _ = onion_fit(X, ys, seed=1)
        b, _ = onion_fit(X, ys, seed=99)
        np.testing.assert_allclose(a.W, b.W, atol=1e-9)

    def test_requires_centered_input(self, rng):
        with pytest.raises(NotCentered):
            onion_fit(rng.normal(size=(10, 3)) + 5, [rng.normal(size=10)])

    def test_confounder_length_checked(self, rng):
        with pytest.raises(DimensionMismatch):
            onion_fit(centered(rng, 10, 3), [np.ones(9)])

    def test_more_confounders_than_rank(self, rng):
        # rank-1 data cannot host two independent directions
        X = np.outer(rng.normal(size=20), rng.normal(size=4))
        X -= X.mean(axis=0)
        with pytest.raises(DegenerateConfounder):
            onion_fit(X, [rng.normal(size=20), rng.normal(size=20)])


class TestOnionTransform:
    def test_empty_basis_is_identity(self, rng):
        X = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(onion_transform(X, OrthonormalBasis.empty(3)), X)

    def test_full_basis_zeroes(self, rng):
        X = rng.normal(size=(5, 3))
        Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        np.testing.assert_allclose(onion_transform(X, Q), 0, atol=1e-12)

    def test_two_by_two(self):
        out = onion_transform(np.eye(2), np.array([[1.0], [0.0]]))
        np.testing.assert_array_equal(out, [[0, 0], [0, 1]])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            onion_transform(rng.normal(size=(3, 4)), np.zeros((3, 1)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 3))
    def test_properties(self, seed, m):
        X, ys = confounded_instance(seed, n=25, p=8, m=m)
        basis, _ = onion_fit(X, ys, seed=seed)
        W = basis.W
        Xn = onion_transform(X, basis)
        scale = np.abs(X).max()
        assert np.abs(W.T @ W - np.eye(W.shape[1])).max() < 1e-8
        assert np.abs(Xn @ W).max() < 1e-8 * scale
        np.testing.assert_allclose(confounded_part(X, basis) + Xn, X, atol=1e-10)
        np.testing.assert_allclose(onion_transform(Xn, basis), Xn, atol=1e-10)
        for w, y in zip(W.T, ys):
            assert abs(y @ (Xn @ w)) < 1e-6 * np.linalg.norm(y) * np.linalg.norm(X)

    def test_applies_to_unseen_rows(self, rng):
        X, ys = confounded_instance(4)
        basis, _ = onion_fit(X, ys)
        new = rng.normal(size=(7, X.shape[1]))
        assert np.abs(onion_transform(new, basis) @ basis.W).max() < 1e-10


def test_basis_file_round_trip(tmp_path):
    X, ys = confounded_instance(5)
    basis, report = onion_fit(X, ys)
    save_basis(tmp_path / "b.json", basis, report)
    back, rep = load_basis(tmp_path / "b.json")
    np.testing.assert_array_equal(back.W, basis.W)
    assert rep["captured_covariance"] == report.captured_covariance
    import json

    doc = json.loads((tmp_path / "b.json").read_text())
    assert doc["sign_convention"] == "YtXw_nonneg" and doc["m"] == 2 and doc["p"] == 12
