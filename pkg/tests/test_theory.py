"""Temperature-fit divergence bound: fitting, divergences, coverage."""

import numpy as np
import pytest

from spinanneal.errors import InputError
from spinanneal.rng import stream
from spinanneal.theory import (BoltzmannFamily, check_bound, coverage_grid, cross_entropy,
                               fit_beta, kl_divergence, random_family)


class TestFamily:
    def test_energy_range_validated(self):
        with pytest.raises(InputError):
            BoltzmannFamily(np.array([0.0, 1.5]))
        with pytest.raises(InputError):
            BoltzmannFamily(np.array([0.5]))

    def test_probs_normalized(self):
        family = random_family(16, seed=0)
        for beta in (-3.0, 0.0, 2.0, 50.0):
            assert family.probs(beta).sum() == pytest.approx(1.0, abs=1e-12)

    def test_beta_zero_is_uniform(self):
        family = random_family(8, seed=1)
        np.testing.assert_allclose(family.probs(0.0), 1 / 8, atol=1e-12)


class TestKl:
    def test_nonnegative_and_zero_iff_equal(self):
        family = random_family(16, seed=2)
        rng = np.random.default_rng(2)
        for _ in range(50):
            a, b = rng.uniform(-5, 5, size=2)
            kl = kl_divergence(family, a, b)
            assert kl >= -1e-12
        assert kl_divergence(family, 1.7, 1.7) == pytest.approx(0.0, abs=1e-12)
        # non-constant energies make the map beta -> p(beta) injective
        assert kl_divergence(family, 1.0, 2.0) > 1e-6


class TestFitBeta:
    def test_recovers_zero_temperature_truth(self):
        # median over trials of the fitted value at beta* = 0 with a large
        # sample and no regularizer
        family = random_family(16, seed=3)
        fits = []
        for trial in range(20):
            samples = family.sample(0.0, 10_000, stream(4, "t", trial))
            fits.append(abs(fit_beta(family, samples, 0.0)))
        assert np.median(fits) < 0.1

    def test_constant_energy_family_resolves_to_zero(self):
        family = BoltzmannFamily(np.full(8, 0.5))
        samples = np.zeros(100, dtype=np.int64)
        assert fit_beta(family, samples, 0.01) == 0.0

    def test_huge_regularizer_forces_zero(self):
        family = random_family(16, seed=5)
        samples = family.sample(3.0, 200, stream(6, "s"))
        assert fit_beta(family, samples, 1e9) == 0.0

    def test_objective_at_fit_is_minimal_on_grid(self):
        family = random_family(16, seed=7)
        samples = family.sample(1.5, 500, stream(8, "s"))
        lam = 0.01
        mean_e = float(family.energies[samples].mean())
        beta_hat = fit_beta(family, samples, lam)
        best = cross_entropy(family, beta_hat, mean_e) + lam * abs(beta_hat)
        for beta in np.linspace(-20, 20, 801):
            assert best <= cross_entropy(family, float(beta), mean_e) + lam * abs(beta) + 1e-7

    def test_objective_convex_per_branch(self):
        family = random_family(16, seed=9)
        mean_e = 0.4
        grid = np.linspace(0.0, 30.0, 200)
        vals = np.array([cross_entropy(family, float(b), mean_e) for b in grid])
        second = np.diff(vals, 2)
        assert np.all(second >= -1e-9)

    def test_empty_samples_rejected(self):
        with pytest.raises(InputError):
            fit_beta(random_family(8, seed=10), np.array([], dtype=int), 0.1)


class TestCheckBound:
    def test_zero_temperature_truth_has_full_coverage(self):
        family = random_family(16, seed=11)
        result = check_bound(family, beta_star=0.0, m=100, delta=0.1, trials=50, seed=12)
        assert result.bound_rhs == 0.0
        assert result.coverage == 1.0

    def test_reference_setting_covers(self):
        family = random_family(16, seed=13)
        result = check_bound(family, beta_star=2.0, m=200, delta=0.1, trials=200, seed=14)
        assert result.coverage >= 0.9
        assert result.bound_rhs == pytest.approx(
            2.0 / np.sqrt(200) * np.sqrt(2 * np.log(2 / 0.1)))

    def test_coverage_monotone_in_samples(self):
        medians = []
        for m in (50, 800):
            per_family = []
            for fam_seed in range(5):
                family = random_family(16, seed=100 + fam_seed)
                per_family.append(check_bound(family, 2.0, m, 0.1, trials=60,
                                              seed=15 + fam_seed).coverage)
            medians.append(np.median(per_family))
        assert medians[1] >= medians[0]

    def test_grid_shape_and_determinism(self):
        families = [random_family(8, seed=s) for s in (1, 2)]
        a = coverage_grid(families, 1.0, [50, 100], [0.1], trials=20, seed=3)
        b = coverage_grid(families, 1.0, [50, 100], [0.1], trials=20, seed=3)
        assert len(a) == 4
        assert [(c.m, c.delta, c.coverage) for c in a] == [(c.m, c.delta, c.coverage) for c in b]

    def test_bad_parameters(self):
        family = random_family(8, seed=16)
        with pytest.raises(InputError):
            check_bound(family, 1.0, 0, 0.1, 10, 0)
        with pytest.raises(InputError):
            check_bound(family, 1.0, 10, 1.5, 10, 0)
