"""Empirical check of the temperature-estimation sample-complexity bound.

For a finite family of Boltzmann distributions over a fixed energy table
normalized to [0, 1], the regularized maximum-likelihood temperature fit
from m samples satisfies, with probability at least 1 - delta,

    KL(p(beta*) || p(beta_hat)) <= |beta*| / sqrt(m) * sqrt(2 ln(2 / delta))

when the regularizer weight is lambda = sqrt(ln(2 / delta) / (2 m)). The
harness draws samples exactly, fits beta by golden-section search on each
sign branch (the objective is convex in beta), computes the exact
divergence by enumeration, and reports how often the bound holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .rng import stream

BETA_MAX = 100.0
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BoltzmannFamily:
    """One-parameter family of distributions over a finite state list with
    energies normalized to [0, 1]."""

    energies: np.ndarray

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=np.float64)
        object.__setattr__(self, "energies", energies)
        if energies.ndim != 1 or energies.size < 2:
            raise InputError("need a 1-D energy table with at least 2 states")
        if energies.min() < 0.0 or energies.max() > 1.0:
            raise InputError("energies must lie in [0, 1]")

    @property
    def n_states(self) -> int:
        return int(self.energies.size)

    def log_partition(self, beta: float) -> float:
        logw = -beta * self.energies
        peak = logw.max()
        return float(peak + np.log(np.exp(logw - peak).sum()))

    def log_probs(self, beta: float) -> np.ndarray:
        return -beta * self.energies - self.log_partition(beta)

    def probs(self, beta: float) -> np.ndarray:
        return np.exp(self.log_probs(beta))

    def sample(self, beta: float, m: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.n_states, size=m, p=self.probs(beta))


def random_family(n_states: int, seed: int) -> BoltzmannFamily:
    return BoltzmannFamily(stream(seed, "family").uniform(0.0, 1.0, size=n_states))


def cross_entropy(family: BoltzmannFamily, beta: float, mean_sample_energy: float) -> float:
    """Cross-entropy between the empirical sample distribution and the family
    member at beta; depends on the samples only through their mean energy."""
    return beta * mean_sample_energy + family.log_partition(beta)


def kl_divergence(family: BoltzmannFamily, beta_a: float, beta_b: float) -> float:
    pa = family.probs(beta_a)
    return float(np.dot(pa, family.log_probs(beta_a) - family.log_probs(beta_b)))


def _golden_min(fn, lo: float, hi: float, tol: float = 1e-8) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def fit_beta(family: BoltzmannFamily, samples, lambda_reg: float) -> float:
    """Penalized maximum-likelihood inverse temperature.

    Minimizes cross-entropy(beta) + lambda * |beta| over [-BETA_MAX,
    BETA_MAX] by golden-section search on each sign branch; the objective
    is convex on each. An exact zero wins ties so degenerate families
    resolve deterministically.
    """
    samples = np.asarray(samples)
    if samples.size == 0:
        raise InputError("need at least one sample")
    if lambda_reg < 0:
        raise InputError("lambda_reg must be >= 0")
    mean_e = float(family.energies[samples].mean())

    def objective(beta: float) -> float:
        return cross_entropy(family, beta, mean_e) + lambda_reg * abs(beta)

    candidates = [0.0,
                  _golden_min(objective, -BETA_MAX, 0.0),
                  _golden_min(objective, 0.0, BETA_MAX)]
    values = [objective(b) for b in candidates]
    best = min(range(len(candidates)), key=lambda i: (values[i], abs(candidates[i])))
    return float(candidates[best])


@dataclass(frozen=True)
class BoundCheck:
    beta_star: float
    m: int
    delta: float
    trials: int
    coverage: float
    mean_kl: float
    bound_rhs: float


def check_bound(family: BoltzmannFamily, beta_star: float, m: int, delta: float,
                trials: int, seed: int) -> BoundCheck:
    """Fraction of independent trials in which the divergence bound holds.

    Each trial draws m exact samples at beta_star, fits beta_hat with the
    prescribed regularizer weight sqrt(ln(2/delta) / (2m)), and compares
    the exact divergence against |beta*|/sqrt(m) * sqrt(2 ln(2/delta)).
    """
    if m < 1 or trials < 1:
        raise InputError("m and trials must be >= 1")
    if not (0.0 < delta < 1.0):
        raise InputError(f"delta must be in (0, 1), got {delta}")
    lam = np.sqrt(np.log(2.0 / delta) / (2.0 * m))
    rhs = abs(beta_star) / np.sqrt(m) * np.sqrt(2.0 * np.log(2.0 / delta))
    hits = 0
    kls = []
    for trial in range(trials):
        rng = stream(seed, "trial", trial)
        samples = family.sample(beta_star, m, rng)
        beta_hat = fit_beta(family, samples, lam)
        kl = kl_divergence(family, beta_star, beta_hat)
        kls.append(kl)
        if kl <= rhs:
            hits += 1
    return BoundCheck(beta_star=float(beta_star), m=int(m), delta=float(delta),
                      trials=int(trials), coverage=hits / trials,
                      mean_kl=float(np.mean(kls)), bound_rhs=float(rhs))


def coverage_grid(families: list[BoltzmannFamily], beta_star: float,
                  m_values: list[int], deltas: list[float], trials: int,
                  seed: int) -> list[BoundCheck]:
    """Bound checks for every (family, m, delta) combination, in
    deterministic order."""
    out = []
    for fi, family in enumerate(families):
        for m in m_values:
            for di, delta in enumerate(deltas):
                out.append(check_bound(family, beta_star, m, delta, trials,
                                       seed=int(stream(seed, "grid", fi, m, di).integers(1 << 62))))
    return out
