"""Tests for the mean-ambiguity solver."""

import numpy as np
import pytest

from optilik.mean_solver import (
    MeanProblem,
    _dual_grad,
    fr_mean_distance,
    kl_mean_divergence,
    solve_mean,
)
from optilik.spd_core import SpdMatrix


def random_spd(rng, n, spread=2.0):
    b = rng.standard_normal((n, n))
    _, q = np.linalg.eigh(b + b.T)
    vals = np.exp(rng.uniform(-spread / 2, spread / 2, size=n))
    return SpdMatrix((q * vals) @ q.T)


def test_distance_equal_means():
    cov = SpdMatrix(np.diag([2.0, 5.0]))
    mu = np.array([1.0, -3.0])
    assert fr_mean_distance(mu, mu, cov) == 0.0


def test_distance_identity_cov_is_euclidean():
    rng = np.random.default_rng(60)
    cov = SpdMatrix(np.eye(4))
    for _ in range(10):
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        assert abs(fr_mean_distance(a, b, cov) - np.linalg.norm(a - b)) < 1e-12


def test_distance_dim_mismatch():
    with pytest.raises(ValueError):
        fr_mean_distance(np.zeros(2), np.zeros(3), SpdMatrix(np.eye(2)))
    with pytest.raises(ValueError):
        fr_mean_distance(np.zeros(3), np.zeros(3), SpdMatrix(np.eye(2)))


def test_kl_mean_basic_values():
    cov = SpdMatrix(np.eye(2))
    assert kl_mean_divergence(np.zeros(2), np.zeros(2), cov) == 0.0
    got = kl_mean_divergence(np.array([1.0, 1.0]), np.zeros(2), cov)
    assert abs(got - 1.0) < 1e-14


def test_kl_mean_symmetric():
    rng = np.random.default_rng(61)
    cov = random_spd(rng, 3)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    assert abs(kl_mean_divergence(a, b, cov) - kl_mean_divergence(b, a, cov)) < 1e-14


def test_twice_kl_equals_squared_distance():
    rng = np.random.default_rng(62)
    for _ in range(20):
        cov = random_spd(rng, 3)
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        d = fr_mean_distance(a, b, cov)
        assert abs(2.0 * kl_mean_divergence(a, b, cov) - d * d) < 1e-10


def test_problem_validation():
    cov = SpdMatrix(np.eye(2))
    with pytest.raises(ValueError):
        MeanProblem(np.zeros(2), cov, 0.0, np.ones(2), 3, 1.0)
    with pytest.raises(ValueError):
        MeanProblem(np.zeros(2), cov, 0.5, np.ones(2), 0, 1.0)
    with pytest.raises(ValueError):
        MeanProblem(np.zeros(3), cov, 0.5, np.ones(2), 3, 1.0)
    with pytest.raises(ValueError):
        MeanProblem(np.zeros((2, 1)), cov, 0.5, np.ones(2), 3, 1.0)
    with pytest.raises(ValueError):
        MeanProblem.from_observations([], np.zeros(2), cov, 0.5)
    with pytest.raises(ValueError):
        MeanProblem.from_observations([[1.0, 2.0, 3.0]], np.zeros(2), cov, 0.5)


def test_from_observations_caches_quadratic():
    rng = np.random.default_rng(63)
    cov = random_spd(rng, 3)
    obs = rng.standard_normal((5, 3))
    p = MeanProblem.from_observations(obs, np.zeros(3), cov, 1.0)
    inv = np.linalg.inv(cov.entries)
    expect = float(np.mean(np.einsum("mi,ij,mj->m", obs, inv, obs)))
    assert abs(p.scatter_about_samples - expect) < 1e-10
    assert np.allclose(p.sample_mean, obs.mean(axis=0))
    assert p.sample_count == 5


def test_solve_sample_mean_inside_ball():
    rng = np.random.default_rng(64)
    cov = random_spd(rng, 3)
    nominal = rng.standard_normal(3)
    obs = nominal + 0.01 * rng.standard_normal((4, 3))
    p = MeanProblem.from_observations(obs, nominal, cov, 5.0)
    mu_star, gamma, value = solve_mean(p)
    assert gamma == 0.0
    assert np.array_equal(mu_star, obs.mean(axis=0))
    assert np.isfinite(value)


def test_solve_scalar_projection_case():
    p = MeanProblem.from_observations([[2.0]], np.zeros(1), SpdMatrix([[1.0]]), 1.0)
    mu_star, gamma, value = solve_mean(p)
    assert abs(mu_star[0] - 1.0) < 1e-10
    assert abs(gamma - 1.0) < 1e-8
    assert abs(value - 1.0) < 1e-10


def test_solve_matches_closed_form_projection():
    # outside the ball the optimum is the nominal mean plus rho times the
    # unit (in the Mahalanobis sense) direction toward the sample mean
    rng = np.random.default_rng(65)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        cov = random_spd(rng, n)
        nominal = rng.standard_normal(n)
        obs = rng.standard_normal((3, n)) * 3.0
        rho = 0.3
        p = MeanProblem.from_observations(obs, nominal, cov, rho)
        x_bar = obs.mean(axis=0)
        dist = fr_mean_distance(x_bar, nominal, cov)
        if dist <= rho:
            continue
        mu_star, gamma, _ = solve_mean(p)
        assert abs(gamma - (dist / rho - 1.0)) < 1e-8 * max(1.0, dist / rho)
        expect = nominal + rho * (x_bar - nominal) / dist
        assert np.linalg.norm(mu_star - expect) < 1e-8
        assert abs(fr_mean_distance(mu_star, nominal, cov) - rho) < 1e-8


def test_solve_huge_radius_recovers_sample_mean():
    rng = np.random.default_rng(66)
    cov = random_spd(rng, 3)
    obs = rng.standard_normal((6, 3))
    p = MeanProblem.from_observations(obs, np.zeros(3), cov, 1e6)
    mu_star, gamma, value = solve_mean(p)
    x_bar = obs.mean(axis=0)
    assert gamma == 0.0
    assert np.allclose(mu_star, x_bar)
    dev = obs - x_bar
    inv = np.linalg.inv(cov.entries)
    pooled = float(np.mean(np.einsum("mi,ij,mj->m", dev, inv, dev)))
    logdet = float(np.sum(np.log(cov.eigenvalues)))
    assert abs(value - (pooled + logdet)) < 1e-8


def test_value_non_increasing_in_radius():
    rng = np.random.default_rng(67)
    cov = random_spd(rng, 3)
    obs = rng.standard_normal((4, 3)) + 2.0
    prev = np.inf
    for rho in (0.05, 0.1, 0.3, 1.0, 3.0, 10.0):
        p = MeanProblem.from_observations(obs, np.zeros(3), cov, rho)
        value = solve_mean(p)[2]
        assert value <= prev + 1e-10
        prev = value


def test_kl_ball_equivalence():
    # an FR ball of radius sqrt(2 rho_kl) is the KL ball of radius rho_kl
    rng = np.random.default_rng(68)
    cov = random_spd(rng, 3)
    obs = rng.standard_normal((4, 3)) + 3.0
    for rho_kl in (0.01, 0.1, 0.5):
        p = MeanProblem.from_observations(
            obs, np.zeros(3), cov, np.sqrt(2.0 * rho_kl)
        )
        mu_star, gamma, _ = solve_mean(p)
        if gamma > 1e-10:
            assert abs(kl_mean_divergence(mu_star, np.zeros(3), cov) - rho_kl) < 1e-8


def test_dual_derivatives_match_finite_difference():
    # the dual objective is gamma rho^2 + dist^2 / (1 + gamma) up to an
    # additive constant; its derivatives must match the solver's internals
    rng = np.random.default_rng(69)
    h = 1e-6
    for _ in range(10):
        cov = random_spd(rng, 3)
        inv = np.linalg.inv(cov.entries)
        nominal = rng.standard_normal(3)
        x_bar = rng.standard_normal(3) * 2.0
        rho = 0.4
        a = float(nominal @ inv @ nominal)
        b = float(nominal @ inv @ x_bar)
        c = float(x_bar @ inv @ x_bar)
        dist_sq = a - 2.0 * b + c

        def g(gamma):
            return gamma * rho**2 + dist_sq / (1.0 + gamma)

        for gamma in (0.2, 1.0, 5.0):
            gp, gpp = _dual_grad(gamma, rho**2, a, b, c)
            fd1 = (g(gamma + h) - g(gamma - h)) / (2.0 * h)
            fd2 = (
                _dual_grad(gamma + h, rho**2, a, b, c)[0]
                - _dual_grad(gamma - h, rho**2, a, b, c)[0]
            ) / (2.0 * h)
            assert abs(gp - fd1) <= 1e-5 * max(abs(gp), 1.0)
            assert abs(gpp - fd2) <= 1e-4 * max(abs(gpp), 1.0)
