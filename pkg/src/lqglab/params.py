"""LQG constants and exponent formulas.

Every other module reads gamma, xi, Q and the multifractal exponents from
the objects defined here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "GAMMA_PURE_GRAVITY",
    "KNOWN_DIMENSIONS",
    "LqgParams",
    "CoalescenceConfig",
    "psi",
    "variation_exponent",
    "normalization_exponent",
    "check_alpha",
]

GAMMA_PURE_GRAVITY = math.sqrt(8.0 / 3.0)

# Only the pure-gravity dimension is known in closed form.
KNOWN_DIMENSIONS = {GAMMA_PURE_GRAVITY: 4.0}


def _check_gamma(gamma, name="gamma"):
    if not (isinstance(gamma, (int, float)) and math.isfinite(gamma)):
        raise ValueError(f"{name} must be a finite real, got {gamma!r}")
    if not 0.0 < gamma < 2.0:
        raise ValueError(f"{name} must lie in (0, 2), got {gamma!r}")


def psi(gamma, p):
    """Multifractal exponent ``p - p (p - 1) gamma^2 / 4``."""
    _check_gamma(gamma)
    return p - p * (p - 1.0) * gamma * gamma / 4.0


def _lookup_dimension(gamma):
    for g, d in KNOWN_DIMENSIONS.items():
        if abs(g - gamma) <= 1e-12:
            return d
    return None


@dataclass(frozen=True)
class LqgParams:
    """Constants of one (gamma, gamma') experiment.

    ``d_gamma`` may be omitted only for gamma = sqrt(8/3), where it is 4.
    Derived fields (``xi``, ``q``, ``q_prime``) are filled in on construction.
    """

    gamma: float = GAMMA_PURE_GRAVITY
    gamma_prime: float | None = None
    d_gamma: float | None = None
    xi: float = field(init=False)
    q: float = field(init=False)
    q_prime: float = field(init=False)

    def __post_init__(self):
        _check_gamma(self.gamma, "gamma")
        if self.gamma_prime is None:
            object.__setattr__(self, "gamma_prime", float(self.gamma))
        _check_gamma(self.gamma_prime, "gamma_prime")
        d = self.d_gamma
        if d is None:
            d = _lookup_dimension(self.gamma)
            if d is None:
                raise ValueError(
                    "d_gamma is required unless gamma = sqrt(8/3); "
                    "no closed form is known for gamma = %r" % self.gamma
                )
        if not (math.isfinite(d) and d > 2.0):
            raise ValueError(f"d_gamma must be a finite real > 2, got {d!r}")
        object.__setattr__(self, "d_gamma", float(d))
        object.__setattr__(self, "xi", self.gamma / self.d_gamma)
        object.__setattr__(self, "q", self.gamma / 2.0 + 2.0 / self.gamma)
        object.__setattr__(self, "q_prime", self.gamma_prime / 2.0 + 2.0 / self.gamma_prime)

    @property
    def exponent(self):
        return variation_exponent(self)

    @property
    def normalization(self):
        return normalization_exponent(self)

    def as_dict(self):
        return {"gamma": self.gamma, "gamma_prime": self.gamma_prime, "d_gamma": self.d_gamma}


def variation_exponent(params: LqgParams) -> float:
    """Power applied to each profile increment: gamma' d_gamma / (2 gamma)."""
    return params.gamma_prime * params.d_gamma / (2.0 * params.gamma)


def normalization_exponent(params: LqgParams) -> float:
    """``1 - psi_gamma(gamma'/gamma)``; level-n sums carry the factor 2^{-n * this}."""
    return 1.0 - psi(params.gamma, params.gamma_prime / params.gamma)


@dataclass(frozen=True)
class CoalescenceConfig:
    """Scale window used to call a dyadic pair "good".

    ``annulus_ratio`` bounds how far the two geodesics may wander, in units of
    the coalescence-radius budget ``2^{-n (1 - alpha2)}``.
    """

    alpha1: float = 0.25
    alpha2: float = 0.5
    annulus_ratio: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.alpha1 < self.alpha2 < 1.0:
            raise ValueError(
                f"need 0 < alpha1 < alpha2 < 1, got alpha1={self.alpha1!r}, alpha2={self.alpha2!r}"
            )
        if not self.annulus_ratio > 1.0:
            raise ValueError(f"annulus_ratio must be > 1, got {self.annulus_ratio!r}")

    def radius_budget(self, n):
        return 2.0 ** (-n * (1.0 - self.alpha2))

    def containment_radius(self, n):
        return self.annulus_ratio * self.radius_budget(n)

    def as_dict(self):
        return {"alpha1": self.alpha1, "alpha2": self.alpha2, "annulus_ratio": self.annulus_ratio}


def check_alpha(cfg: CoalescenceConfig, params: LqgParams) -> bool:
    """True iff ``(1 - a2) * exponent - a2 * psi(gamma'/gamma) > 0``."""
    if not 0.0 < cfg.alpha1 < cfg.alpha2 < 1.0:
        raise ValueError("need 0 < alpha1 < alpha2 < 1")
    a2 = cfg.alpha2
    lhs = (1.0 - a2) * variation_exponent(params) - a2 * psi(params.gamma, params.gamma_prime / params.gamma)
    return lhs > 0.0
