"""Deterministic 2x2 Dyson equation of the elliptic ensemble Hermitization.

The self-consistent equation

    -M^{-1} = [[i*eta, zeta], [conj(zeta), i*eta]] + S[M],
    S[[a11, a12], [a21, a22]] = [[a22, rho*a21], [rho*a12, a11]],

has a unique solution with positive definite imaginary part, of the form
M = [[i*v, conj(b)], [b, i*v]] with v > 0.  This module solves for (v, b)
and evaluates the derived quantities: the uniform density on the ellipse
with semi-axes 1+rho and 1-rho, the eta -> 0 bulk limit of v, and the
algebraic identities tying v and b together.

The solver runs a damped fixed-point iteration on M (which preserves
Im M > 0 and the equal-diagonal structure), polishes the result with
Newton steps on the scalar equation in u = eta/v, and falls back to a
bracketed bisection in u when the fixed point stalls near the spectral
edge.  All entry points are vectorized over (zeta, eta) grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Below this spectral scale the equation is numerically degenerate; the
# eta -> 0 limit is exposed separately through v_limit_bulk.
ETA_FLOOR = 1e-12

_DAMPING = 0.5
_SEED_TOL = 1e-7          # fixed-point target before Newton polish
_FP_CHUNK = 25            # iterations between convergence checks
_NEWTON_STEPS = 8
_BISECT_STEPS = 110


class DysonConvergenceError(RuntimeError):
    """Raised when no method reaches the requested residual.

    Signals that tol is below what double precision supports at this
    point, or that eta is denormally small.
    """


@dataclass(frozen=True)
class EllipticParam:
    """Entry correlation rho in (-1, 1)."""

    rho: float

    def __post_init__(self) -> None:
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter zeta and scale eta > 0."""

    zeta: complex
    eta: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.zeta):
            raise ValueError("zeta must be finite")
        if not (self.eta >= ETA_FLOOR and np.isfinite(self.eta)):
            raise ValueError(f"eta must be >= {ETA_FLOOR:g}, got {self.eta}")


@dataclass(frozen=True)
class EllipseRegion:
    """The ellipse E_{rho,delta}; boundary points count as inside."""

    rho: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def semi_axes(self) -> tuple[float, float]:
        return (1.0 + self.rho, 1.0 - self.rho)

    def ellipse_form(self, zeta):
        """(Re z)^2/(1+rho)^2 + (Im z)^2/(1-rho)^2, vectorized."""
        zeta = np.asarray(zeta, dtype=complex)
        ax, ay = self.semi_axes
        return (zeta.real / ax) ** 2 + (zeta.imag / ay) ** 2

    def contains(self, zeta):
        return self.ellipse_form(zeta) <= 1.0 - self.delta

    def bounding_box(self) -> tuple[float, float, float, float]:
        ax, ay = self.semi_axes
        s = np.sqrt(1.0 - self.delta)
        return (-ax * s, ax * s, -ay * s, ay * s)

    @property
    def area(self) -> float:
        ax, ay = self.semi_axes
        return np.pi * ax * ay * (1.0 - self.delta)

    def sample_uniform(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """m points uniform on the region, by rejection from the bounding box."""
        x0, x1, y0, y1 = self.bounding_box()
        out = np.empty(m, dtype=complex)
        filled = 0
        while filled < m:
            k = max(2 * (m - filled), 16)
            cand = rng.uniform(x0, x1, k) + 1j * rng.uniform(y0, y1, k)
            cand = cand[self.contains(cand)]
            take = min(cand.size, m - filled)
            out[filled:filled + take] = cand[:take]
            filled += take
        return out


@dataclass
class DysonSolution:
    """Solution pair (v, b) at one spectral point, with solver diagnostics."""

    v: float
    b: complex
    residual: float
    iterations: int
    zeta: complex
    eta: float
    rho: float

    @property
    def norm_m_sq(self) -> float:
        """||M||^2 = v^2 + |b|^2 = v/(eta+v)."""
        return self.v ** 2 + abs(self.b) ** 2


def elliptic_density(zeta, param: EllipticParam):
    """Uniform density 1/(pi (1-rho^2)) on the ellipse, 0 outside."""
    region = EllipseRegion(param.rho)
    inside = region.contains(zeta)
    val = 1.0 / (np.pi * (1.0 - param.rho ** 2))
    out = np.where(inside, val, 0.0)
    return float(out) if np.isscalar(zeta) or np.ndim(zeta) == 0 else out


def v_limit_bulk(zeta: complex, param: EllipticParam) -> float:
    """eta -> 0 limit of v for zeta strictly inside the ellipse."""
    form = float(EllipseRegion(param.rho).ellipse_form(zeta))
    if form >= 1.0:
        raise ValueError(f"zeta={zeta} is not strictly inside the ellipse")
    return float(np.sqrt(1.0 - form))


def b_from_v(v, point: SpectralPoint, param: EllipticParam) -> complex:
    """Off-diagonal b recovered from v at a spectral point."""
    if np.any(np.asarray(v) <= 0):
        raise ValueError("v must be positive")
    u = point.eta / v
    return -point.zeta.real / (1.0 + param.rho + u) + 1j * point.zeta.imag / (1.0 - param.rho + u)


def v_equation_residual(v, point: SpectralPoint, param: EllipticParam) -> float:
    """Residual of the scalar equation for v; zero at the true solution."""
    u = point.eta / v
    x, y = point.zeta.real, point.zeta.imag
    lhs = x ** 2 / (1.0 + u + param.rho) ** 2 + y ** 2 / (1.0 + u - param.rho) ** 2
    return lhs - (1.0 / (1.0 + u) - v ** 2)


def m_matrix(solution: DysonSolution) -> np.ndarray:
    """The 2x2 matrix [[i v, conj(b)], [b, i v]]."""
    v, b = solution.v, solution.b
    return np.array([[1j * v, np.conjugate(b)], [b, 1j * v]])


def _mde_residual(m, c, d, z, e, rho):
    """Max-entry residual of I + (i eta + Z + S[M]) M for M = [[m, c], [d, m]]."""
    a = 1j * e + m
    p = z + rho * d
    q = np.conj(z) + rho * c
    r11 = 1.0 + a * m + p * d
    r12 = a * c + p * m
    r21 = q * m + a * d
    r22 = 1.0 + q * c + a * m
    return np.max(np.abs(np.stack([r11, r12, r21, r22])), axis=0)


def _scalar_g(u, x2, y2, e2, rho):
    """Scalar equation in u = eta/v; positive left of the root."""
    return (x2 / (1.0 + u + rho) ** 2 + y2 / (1.0 + u - rho) ** 2
            + e2 / u ** 2 - 1.0 / (1.0 + u))


def _scalar_g_prime(u, x2, y2, e2, rho):
    return (-2.0 * x2 / (1.0 + u + rho) ** 3 - 2.0 * y2 / (1.0 + u - rho) ** 3
            - 2.0 * e2 / u ** 3 + 1.0 / (1.0 + u) ** 2)


def _newton_polish(u, x2, y2, e2, rho, steps=_NEWTON_STEPS):
    """Newton iteration on the scalar equation; keeps the best iterate."""
    best_u = u.copy()
    best_g = np.abs(_scalar_g(u, x2, y2, e2, rho))
    for _ in range(steps):
        g = _scalar_g(u, x2, y2, e2, rho)
        gp = _scalar_g_prime(u, x2, y2, e2, rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / gp
        u_new = u - step
        ok = np.isfinite(u_new) & (u_new > 0)
        u = np.where(ok, u_new, u)
        cur = np.abs(_scalar_g(u, x2, y2, e2, rho))
        better = cur < best_g
        best_u = np.where(better, u, best_u)
        best_g = np.where(better, cur, best_g)
    return best_u


def _bisect(x2, y2, e, rho):
    """Bracketed bisection for the unique positive root of the scalar equation."""
    e2 = e * e
    u_lo = e * np.maximum(1.0, e)          # v = min(1, 1/eta); g >= 0 there
    u_hi = np.maximum(2.0 * (1.0 + e2 + x2 + y2), 2.0 * u_lo)
    for _ in range(80):
        bad = _scalar_g(u_hi, x2, y2, e2, rho) >= 0
        if not bad.any():
            break
        u_hi = np.where(bad, 2.0 * u_hi, u_hi)
    for _ in range(_BISECT_STEPS):
        u_mid = 0.5 * (u_lo + u_hi)
        pos = _scalar_g(u_mid, x2, y2, e2, rho) > 0
        u_lo = np.where(pos, u_mid, u_lo)
        u_hi = np.where(pos, u_hi, u_mid)
    return _newton_polish(0.5 * (u_lo + u_hi), x2, y2, e2, rho, steps=3)


def _solve_flat(z, e, rho, tol, max_iter):
    """Solve for flat arrays z (complex) and e (float) of equal size."""
    size = z.size
    m = 1j / (1.0 + e)
    c = np.zeros(size, dtype=complex)
    d = np.zeros(size, dtype=complex)
    iters = np.zeros(size, dtype=np.int64)

    # Phase 1: damped fixed point, retiring converged entries as we go.
    fp_budget = min(max(_FP_CHUNK, max_iter), 1500)
    seed_tol = max(_SEED_TOL, tol)
    active = np.arange(size)
    k = 0
    while active.size and k < fp_budget:
        za, ea = z[active], e[active]
        ma, ca, da = m[active], c[active], d[active]
        for _ in range(_FP_CHUNK):
            a = 1j * ea + ma
            p = za + rho * da
            q = np.conj(za) + rho * ca
            det = a * a - p * q
            ma = (1.0 - _DAMPING) * ma - _DAMPING * a / det
            ca = (1.0 - _DAMPING) * ca + _DAMPING * p / det
            da = (1.0 - _DAMPING) * da + _DAMPING * q / det
        k += _FP_CHUNK
        m[active], c[active], d[active] = ma, ca, da
        done = _mde_residual(ma, ca, da, za, ea, rho) <= seed_tol
        iters[active[done]] = k
        active = active[~done]
    iters[active] = k

    # Phase 2: Newton polish on u = eta/v, seeded by the fixed point.
    x2, y2 = z.real ** 2, z.imag ** 2
    v_seed = np.maximum(m.imag, 1e-300)
    u = _newton_polish(e / v_seed, x2, y2, e * e, rho)
    v = e / u
    b = -z.real / (1.0 + rho + u) + 1j * z.imag / (1.0 - rho + u)
    res = _mde_residual(1j * v, np.conj(b), b, z, e, rho)

    # Phase 3: bisection rescue for anything the polish did not fix.
    stuck = res > tol
    if stuck.any():
        u_s = _bisect(x2[stuck], y2[stuck], e[stuck], rho)
        v_s = e[stuck] / u_s
        b_s = (-z.real[stuck] / (1.0 + rho + u_s)
               + 1j * z.imag[stuck] / (1.0 - rho + u_s))
        v[stuck], b[stuck] = v_s, b_s
        res[stuck] = _mde_residual(1j * v_s, np.conj(b_s), b_s,
                                   z[stuck], e[stuck], rho)
        iters[stuck] += _BISECT_STEPS

    if np.any(res > tol):
        worst = float(res.max())
        raise DysonConvergenceError(
            f"Dyson solver did not reach tol={tol:g} (worst residual {worst:.3e}); "
            "tol may be below double-precision reach at this point")
    return v, b, res, iters


def solve_dyson_grid(zeta, eta, rho: float, tol: float = 1e-12,
                     max_iter: int = 100_000):
    """Vectorized solve over broadcast (zeta, eta) arrays at fixed rho.

    Returns arrays (v, b, residual, iterations) in the broadcast shape.
    """
    if abs(rho) >= 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    zeta = np.asarray(zeta, dtype=complex)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < ETA_FLOOR):
        raise ValueError(f"eta must be >= {ETA_FLOOR:g}")
    zb, eb = np.broadcast_arrays(zeta, eta)
    shape = zb.shape
    v, b, res, iters = _solve_flat(zb.ravel().astype(complex),
                                   eb.ravel().astype(float),
                                   float(rho), tol, max_iter)
    return (v.reshape(shape), b.reshape(shape),
            res.reshape(shape), iters.reshape(shape))


def solve_dyson(point: SpectralPoint, param: EllipticParam,
                tol: float = 1e-12, max_iter: int = 100_000) -> DysonSolution:
    """Solve the Dyson equation at a single spectral point."""
    v, b, res, iters = solve_dyson_grid(point.zeta, point.eta, param.rho,
                                        tol=tol, max_iter=max_iter)
    return DysonSolution(v=float(v), b=complex(b), residual=float(res),
                         iterations=int(iters), zeta=complex(point.zeta),
                         eta=float(point.eta), rho=float(param.rho))
