"""Regularized boundary GMC measure and moment-scaling estimates.

At scale ``epsilon`` the measure puts mass
``epsilon^{g^2/4} exp(g h_eps(x) / 2) * spacing`` on each boundary lattice
point ``x``, where ``h_eps`` is the semicircle average of radius ``epsilon``.
Cells are half-open, so masses of adjacent intervals add exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gff import DomainError, ExactSampler, FieldGrid, ProbeSet, circle_averages, semicircle_variance
from .stats import LogLogSlope

__all__ = [
    "BoundaryMeasure",
    "boundary_gmc",
    "gmc_atoms",
    "measure_mass",
    "ExactBoundaryGMC",
    "expected_mass",
    "MomentScaling",
    "moment_scaling",
    "MIN_MOMENT_SAMPLES",
]

MIN_MOMENT_SAMPLES = 500


def _check_gp(gamma_prime):
    if not 0.0 < gamma_prime < 2.0:
        raise ValueError(f"gamma_prime must lie in (0, 2), got {gamma_prime!r}")


def gmc_atoms(h_eps, gamma_prime, epsilon, spacing):
    """``epsilon^{g^2/4} exp(g h_eps / 2) * spacing`` elementwise."""
    g = float(gamma_prime)
    return spacing * epsilon ** (g * g / 4.0) * np.exp(0.5 * g * np.asarray(h_eps, dtype=float))


def _grid_points(lo, hi, origin, spacing):
    # lattice points origin + k * spacing in [lo, hi)
    k0 = int(np.ceil((lo - origin) / spacing - 1e-9))
    k1 = int(np.ceil((hi - origin) / spacing - 1e-9))
    return origin + spacing * np.arange(k0, k1)


@dataclass(frozen=True)
class BoundaryMeasure:
    """Atomic boundary measure on ``[a, b)`` at a fixed regularization scale."""

    interval: tuple
    epsilon: float
    gamma_prime: float
    spacing: float
    points: np.ndarray
    atoms: np.ndarray

    def __post_init__(self):
        if not np.all(self.atoms > 0) or not np.all(np.isfinite(self.atoms)):
            raise ArithmeticError("GMC atoms must be positive and finite")

    def total(self):
        return float(np.sum(self.atoms))

    def mass(self, lo, hi):
        return measure_mass(self, (lo, hi))


def measure_mass(measure: BoundaryMeasure, sub) -> float:
    """Sum of atoms at points in the half-open ``sub = [lo, hi)``."""
    lo, hi = sub
    a, b = measure.interval
    tol = 1e-9 * measure.spacing
    if lo < a - tol or hi > b + tol or hi < lo:
        raise DomainError(f"sub-interval {sub!r} is not inside {measure.interval!r}")
    sel = (measure.points >= lo - tol) & (measure.points < hi - tol)
    return float(np.sum(measure.atoms[sel]))


def boundary_gmc(field: FieldGrid, gamma_prime: float, epsilon: float, interval) -> BoundaryMeasure:
    """Boundary GMC of ``field`` on the boundary lattice points of ``[a, b)``."""
    _check_gp(gamma_prime)
    s = field.spec
    if epsilon < 2 * s.spacing * (1 - 1e-12):
        raise DomainError(f"epsilon={epsilon!r} is below two lattice spacings")
    a, b = interval
    if not b > a:
        raise ValueError("empty interval")
    xs = _grid_points(a, b, s.origin_x, s.spacing)
    if xs.size == 0 or xs[0] < s.origin_x - 1e-9 * s.spacing or xs[-1] > s.x_max + 1e-9 * s.spacing:
        raise DomainError(f"interval {interval!r} outside the grid")
    h = circle_averages(field, xs, epsilon)
    return BoundaryMeasure((float(a), float(b)), float(epsilon), float(gamma_prime), s.spacing, xs,
                           gmc_atoms(h, gamma_prime, epsilon, s.spacing))


class ExactBoundaryGMC:
    """GMC atoms driven by exact joint draws of the semicircle averages.

    Points are ``a + k * spacing`` in ``[a, b)``; each carries the
    semicircle average of radius ``epsilon``. No lattice is involved, so the
    field covariance is exact at every probe.
    """

    def __init__(self, interval, epsilon, spacing, gamma_prime):
        _check_gp(gamma_prime)
        a, b = interval
        self.interval = (float(a), float(b))
        self.epsilon = float(epsilon)
        self.spacing = float(spacing)
        self.gamma_prime = float(gamma_prime)
        self.points = _grid_points(a, b, a, spacing)
        self.sampler = ExactSampler(ProbeSet(self.points + 0j, radius=self.epsilon))

    def sample_atoms(self, rng, size):
        """Atoms of ``size`` independent fields, shape ``(size, n_points)``."""
        h = self.sampler.sample(rng, size)
        return gmc_atoms(h, self.gamma_prime, self.epsilon, self.spacing)

    def masses(self, atoms, intervals):
        """Column ``j`` holds each field's mass of ``intervals[j]`` (half-open)."""
        tol = 1e-9 * self.spacing
        cols = []
        for lo, hi in intervals:
            sel = (self.points >= lo - tol) & (self.points < hi - tol)
            cols.append(atoms[:, sel].sum(axis=1))
        return np.stack(cols, axis=1)


def expected_mass(interval, gamma_prime, n_nodes=48, v_nodes=128):
    """Gauss-Legendre quadrature of ``int_I exp(g^2 V(x) / 8) dx``.

    ``V(x)`` is the variance of the unit semicircle average about ``x``.
    """
    a, b = interval
    t, w = np.polynomial.legendre.leggauss(int(n_nodes))
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    g2 = float(gamma_prime) ** 2
    f = np.array([np.exp(g2 * semicircle_variance(xi, v_nodes) / 8.0) for xi in x])
    return float(0.5 * (b - a) * (w @ f))


class MomentScaling(LogLogSlope):
    """Multifractal slope of ``E[mass^p]`` against interval length.

    ``p`` must lie in ``(0, 4 / gamma_prime^2)``; at least 4 scales and
    ``MIN_MOMENT_SAMPLES`` fields are required.
    """

    def __init__(self, p=1.0, gamma_prime=1.0, n_boot=1000, random_state=0):
        super().__init__(p=p, n_boot=n_boot, random_state=random_state)
        self.gamma_prime = gamma_prime

    def fit(self, Y, scales):
        _check_gp(self.gamma_prime)
        if not 0.0 < self.p < 4.0 / self.gamma_prime ** 2:
            raise ValueError(f"p={self.p!r} outside the moment range (0, {4.0 / self.gamma_prime ** 2:g})")
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] < 4:
            raise ValueError("need at least 4 dyadic scales")
        if Y.shape[0] < MIN_MOMENT_SAMPLES:
            raise ValueError(f"need at least {MIN_MOMENT_SAMPLES} field samples, got {Y.shape[0]}")
        return super().fit(Y, scales)


def moment_scaling(masses, scales, p, gamma_prime, n_boot=1000, random_state=0):
    """Functional form of :class:`MomentScaling`; returns ``(slope, stderr)``."""
    est = MomentScaling(p=p, gamma_prime=gamma_prime, n_boot=n_boot, random_state=random_state).fit(masses, scales)
    return est.slope_, est.stderr_
