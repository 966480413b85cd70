"""Problem parameters, cross-section profiles and closed-form constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BadDimension,
    NonPositive,
    NonPositiveProfile,
    OutOfDomain,
    SigmaOutOfRange,
)

# slack for x1 == +-l comparisons after floating point mesh arithmetic
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    """Constants of the thin-domain problem.

    Parameters
    ----------
    n : int
        Space dimension (>= 2).
    sigma : float
        Poisson ratio, ``-1/(n-1) < sigma < 1``.
    mu : float
        Weight of the normal-derivative boundary term, ``> 0``.
    l : float
        Half length of the segment.
    epsilon : float, optional
        Thinness of the domain; only needed for 2D runs.
    """

    n: int = 2
    sigma: float = 0.0
    mu: float = 1.0
    l: float = 1.0
    epsilon: Optional[float] = None

    def with_epsilon(self, epsilon: float) -> "ProblemParams":
        return ProblemParams(self.n, self.sigma, self.mu, self.l, epsilon)


def validate_params(p: ProblemParams) -> ProblemParams:
    """Return ``p`` unchanged if every invariant holds, otherwise raise."""
    if int(p.n) != p.n or p.n < 2:
        raise BadDimension(f"n must be an integer >= 2, got {p.n!r}")
    lower = -1.0 / (p.n - 1)
    if not (lower < p.sigma < 1.0):
        raise SigmaOutOfRange(
            f"sigma={p.sigma} outside ({lower:g}, 1) for n={p.n}"
        )
    if not p.mu > 0:
        raise NonPositive(f"mu must be > 0, got {p.mu}")
    if not p.l > 0:
        raise NonPositive(f"l must be > 0, got {p.l}")
    if p.epsilon is not None and not p.epsilon > 0:
        raise NonPositive(f"epsilon must be > 0, got {p.epsilon}")
    return p


def n_factor(n: int, sigma: float) -> float:
    """Return ``(n - 1) / (1 - 2 sigma + sigma n)``."""
    denom = 1.0 - 2.0 * sigma + sigma * n
    assert denom > 0, "denominator must be positive on the valid sigma range"
    return (n - 1) / denom


def distortion_factor(n: int, sigma: float) -> float:
    """Coefficient ``1 - sigma^2 * n_factor`` of the limiting 4th-order term."""
    return 1.0 - sigma * sigma * n_factor(n, sigma)


def unit_ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m."""
    if int(m) != m or m < 1:
        raise BadDimension(f"ball dimension must be an integer >= 1, got {m!r}")
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


@dataclass(frozen=True)
class DerivedConstants:
    n_factor: float
    distortion: float
    ball_volume: float


def derived_constants(n: int, sigma: float) -> DerivedConstants:
    return DerivedConstants(
        n_factor=n_factor(n, sigma),
        distortion=distortion_factor(n, sigma),
        ball_volume=unit_ball_volume(n - 1),
    )


PROFILE_KINDS = ("constant", "polynomial", "cosine")


@dataclass(frozen=True)
class Profile:
    """Cross-section radius rho on ``[-l, l]`` from a closed catalog.

    ``coeffs`` meaning depends on ``kind``:

    * ``constant``: ``(c,)``
    * ``polynomial``: ascending power coefficients, rho = sum c_i x^i
    * ``cosine``: ``(a, b)`` for rho = a + b cos(pi x / l)

    Use the class constructors rather than building instances by hand.
    """

    kind: str
    coeffs: tuple = field(default=(1.0,))
    l: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.l > 0:
            raise NonPositive(f"l must be > 0, got {self.l}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.kind == "constant" and len(self.coeffs) != 1:
            raise ValueError("constant profile takes exactly one coefficient")
        if self.kind == "cosine" and len(self.coeffs) != 2:
            raise ValueError("cosine profile takes (a, b)")
        if self.kind == "polynomial" and len(self.coeffs) == 0:
            raise ValueError("polynomial profile needs at least one coefficient")

    @classmethod
    def constant(cls, c: float = 1.0, l: float = 1.0) -> "Profile":
        return cls("constant", (c,), l)

    @classmethod
    def polynomial(cls, coeffs, l: float = 1.0) -> "Profile":
        return cls("polynomial", tuple(coeffs), l)

    @classmethod
    def cosine_bump(cls, a: float, b: float, l: float = 1.0) -> "Profile":
        return cls("cosine", (a, b), l)

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "polynomial":
            return all(c == 0.0 for c in self.coeffs[1:])
        return self.coeffs[1] == 0.0

    def evaluate(self, x1):
        """Vectorized ``(rho, rho', rho'')`` without domain or sign checks."""
        x = np.asarray(x1, dtype=float)
        if self.kind == "constant":
            c = self.coeffs[0]
            return np.full_like(x, c), np.zeros_like(x), np.zeros_like(x)
        if self.kind == "polynomial":
            p = np.polynomial.Polynomial(self.coeffs)
            dp = p.deriv(1)
            d2p = p.deriv(2)
            return p(x), dp(x), d2p(x)
        a, b = self.coeffs
        k = math.pi / self.l
        return a + b * np.cos(k * x), -b * k * np.sin(k * x), -b * k * k * np.cos(k * x)

    def check_positive(self, samples: int = 1001) -> None:
        """Raise ``NonPositiveProfile`` unless rho > 0 on a grid of [-l, l]."""
        x = np.linspace(-self.l, self.l, samples)
        rho = self.evaluate(x)[0]
        if np.any(rho <= 0):
            bad = x[np.argmin(rho)]
            raise NonPositiveProfile(f"rho <= 0 near x1={bad:g}")


def profile_eval(profile: Profile, x1: float):
    """Return ``(rho, rho', rho'')`` at a single point of ``[-l, l]``."""
    l = profile.l
    if not (-l - _DOMAIN_TOL * l <= x1 <= l + _DOMAIN_TOL * l):
        raise OutOfDomain(f"x1={x1} outside [-{l}, {l}]")
    rho, drho, d2rho = (float(v) for v in profile.evaluate(x1))
    if rho <= 0:
        raise NonPositiveProfile(f"rho({x1}) = {rho} is not positive")
    return rho, drho, d2rho
