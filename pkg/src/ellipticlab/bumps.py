"""Compactly supported C^2 test functions with closed-form Laplacians.

Two radial profiles on the unit disk are provided:

  polynomial-bump   p(r) = (1 - r^2)^3
  gaussian-bump     p(r) = exp(1 - 1/(1 - r^2))   (smooth bump)

A TestFunction places the profile at a center with a support radius, and
exposes the mesoscopic observable n^{2 alpha} f(n^alpha (zeta - zeta0))
together with its Laplacian and the L^1 / L^{2+a} norms of Delta f.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

KINDS = ("polynomial-bump", "gaussian-bump")


def _poly_profile(rho):
    w = np.maximum(1.0 - rho ** 2, 0.0)
    return w ** 3


def _poly_laplacian(rho):
    w = 1.0 - rho ** 2
    return np.where(w > 0.0, 12.0 * w * (3.0 * rho ** 2 - 1.0), 0.0)


def _gauss_profile(rho):
    w = 1.0 - rho ** 2
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = np.exp(1.0 - 1.0 / np.where(w > 0.0, w, 1.0))
    return np.where(w > 0.0, val, 0.0)


def _gauss_laplacian(rho):
    w = 1.0 - rho ** 2
    safe = np.where(w > 0.0, w, 1.0)
    r2 = rho ** 2
    factor = 4.0 * r2 / safe ** 4 - 8.0 * r2 / safe ** 3 - 4.0 / safe ** 2
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = np.exp(1.0 - 1.0 / safe) * factor
    return np.where(w > 0.0, val, 0.0)


_PROFILES = {
    "polynomial-bump": (_poly_profile, _poly_laplacian),
    "gaussian-bump": (_gauss_profile, _gauss_laplacian),
}


@dataclass
class TestFunction:
    """Radial C^2 bump f centered at `center` with support radius `radius`.

    `alpha` is the mesoscopic scale exponent in [0, 1/2); `a` fixes which
    L^{2+a} norm of Delta f accompanies the L^1 norm.
    """

    kind: str = "polynomial-bump"
    center: complex = 0.0 + 0.0j
    radius: float = 1.0
    alpha: float = 0.0
    a: float = 1.0
    _norm_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not (0.0 <= self.alpha < 0.5):
            raise ValueError(f"alpha must lie in [0, 1/2), got {self.alpha}")
        if self.a <= 0:
            raise ValueError("a must be positive")

    # base function f (no mesoscopic scaling)

    def f(self, zeta):
        prof = _PROFILES[self.kind][0]
        rho = np.abs(np.asarray(zeta, dtype=complex) - self.center) / self.radius
        return prof(rho)

    def laplacian(self, zeta):
        lap = _PROFILES[self.kind][1]
        rho = np.abs(np.asarray(zeta, dtype=complex) - self.center) / self.radius
        return lap(rho) / self.radius ** 2

    # mesoscopic observable f_{zeta0, alpha}

    def scale(self, n: int) -> float:
        return float(n) ** self.alpha

    def support_radius(self, n: int) -> float:
        return self.radius / self.scale(n)

    def observable(self, zeta, n: int):
        s = self.scale(n)
        prof = _PROFILES[self.kind][0]
        rho = s * np.abs(np.asarray(zeta, dtype=complex) - self.center) / self.radius
        return s ** 2 * prof(rho)

    def observable_laplacian(self, zeta, n: int):
        s = self.scale(n)
        lap = _PROFILES[self.kind][1]
        rho = s * np.abs(np.asarray(zeta, dtype=complex) - self.center) / self.radius
        return s ** 4 * lap(rho) / self.radius ** 2

    # norms of Delta f (of the base f; both scale simply under the
    # mesoscopic rescaling: ||Delta f_{z0,alpha}||_1 = n^{2 alpha} ||Delta f||_1)

    def _profile_norm(self, p: float) -> float:
        lap = _PROFILES[self.kind][1]
        val, _ = quad(lambda r: np.abs(lap(r)) ** p * r, 0.0, 1.0, limit=200)
        return (2.0 * np.pi * val) ** (1.0 / p)

    @property
    def norm_delta_l1(self) -> float:
        """||Delta f||_{L^1}; scale-invariant in the support radius."""
        if "l1" not in self._norm_cache:
            self._norm_cache["l1"] = self._profile_norm(1.0)
        return self._norm_cache["l1"]

    @property
    def norm_delta_l2a(self) -> float:
        """||Delta f||_{L^{2+a}} of the base f."""
        if "l2a" not in self._norm_cache:
            p = 2.0 + self.a
            prof_norm = self._profile_norm(p)
            self._norm_cache["l2a"] = prof_norm * self.radius ** (2.0 / p - 2.0)
        return self._norm_cache["l2a"]

    def validate(self, n: int, d_exponent: int = 1) -> None:
        """Reject functions violating the norm comparison constraint."""
        if self.norm_delta_l2a > float(n) ** d_exponent * self.norm_delta_l1:
            raise ValueError(
                "test function violates ||Delta f||_{L^{2+a}} <= n^D ||Delta f||_{L^1}")
