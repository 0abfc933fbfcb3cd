"""Franchetti's constant C_p and the norm of I - gamma*E.

    C_p = max over alpha in [0, 1] of
          (alpha^(p-1) + (1-alpha)^(p-1))^(1/p)
        * (alpha^(1/(p-1)) + (1-alpha)^(1/(p-1)))^(1 - 1/p),   C_1 = 2.

The objective is symmetric under alpha <-> 1 - alpha and equals 1 at both
endpoints and at alpha = 1/2, so the maximum is searched on [0, 1/2].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .lp_core import Exponent, Grid, LpVector, as_exponent, embed, weighted_norm
from .norm_engine import LOWER, NormEstimate, op_norm_p
from .operator_zoo import OperatorMatrix

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

SCAN_STEP = 1e-4
GOLDEN_TOL = 1e-12

# two-valued candidate mesh: b = 1, a on a signed geometric mesh
MESH_HALF = 2000
MESH_MIN, MESH_MAX = 1e-4, 100.0
MESH_PHASES = 64


@dataclass(frozen=True)
class CpResult:
    p: Exponent
    value: float
    alpha_star: float
    method: str


@dataclass(frozen=True)
class RhsEstimate:
    gamma: complex
    p: Exponent
    grid_n: int
    value: NormEstimate


def _log_pow_sum(alpha, e):
    """log(alpha^e + (1-alpha)^e) for e > 0, with 0^e = 0."""
    alpha = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore"):
        la = np.where(alpha > 0, np.log(alpha), -np.inf)
        lb = np.where(alpha < 1, np.log1p(-alpha), -np.inf)
    return np.logaddexp(e * la, e * lb)


def cp_objective(alpha, p):
    """The Franchetti product at ``alpha`` (scalar or array), p > 1.

    Evaluated in log form so exponents 1/(p-1) stay finite as p -> 1+.
    """
    p = as_exponent(p).p
    if p == 1.0:
        raise ValueError("the objective is undefined at p = 1; C_1 = 2 directly")
    alpha = np.asarray(alpha, dtype=float)
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("alpha must lie in [0, 1]")
    log_val = (_log_pow_sum(alpha, p - 1.0) / p
               + _log_pow_sum(alpha, 1.0 / (p - 1.0)) * (1.0 - 1.0 / p))
    out = np.exp(log_val)
    return float(out) if out.ndim == 0 else out


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = GOLDEN_TOL):
    """Maximize a unimodal ``f`` on [a, b]; returns (x, f(x)) with the bracket narrowed to ``tol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    # the bracket ends and interior points are all candidates
    pts = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    fx, x = max(pts, key=lambda t: (t[0], -t[1]))
    return x, fx


@lru_cache(maxsize=256)
def _cp_cached(p: float) -> CpResult:
    if p == 1.0:
        return CpResult(Exponent(1.0), 2.0, 0.0, "closed-form")
    grid = np.linspace(0.0, 0.5, int(round(0.5 / SCAN_STEP)) + 1)
    vals = cp_objective(grid, p)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    x, fx = golden_section_max(lambda a: cp_objective(a, p), lo, hi)
    if vals[i] > fx:
        x, fx = float(grid[i]), float(vals[i])
    return CpResult(Exponent(p), float(fx), float(x), "scan+golden")


def cp_constant(p) -> CpResult:
    return _cp_cached(as_exponent(p).p)


# ---------------------------------------------------------------- ||I - gamma E||

def _mesh(gamma: complex) -> np.ndarray:
    mags = np.geomspace(MESH_MIN, MESH_MAX, MESH_HALF)
    real = np.concatenate([-mags[::-1], [0.0], mags])
    if gamma.imag == 0.0:
        return real.astype(complex)
    phases = np.exp(1j * np.pi * np.arange(MESH_PHASES) / MESH_PHASES)
    return (real[:, None] * phases[None, :]).ravel()


def _two_valued_ratio(alpha, a, gamma: complex, p: float):
    """||(I - gamma E) f|| / ||f|| for f = a on measure alpha and 1 elsewhere."""
    m = alpha * a + (1.0 - alpha)
    num = alpha * np.abs(a - gamma * m) ** p + (1.0 - alpha) * np.abs(1.0 - gamma * m) ** p
    den = alpha * np.abs(a) ** p + (1.0 - alpha)
    return (num / den) ** (1.0 / p)


def two_valued_scan(gamma, p, n: int, top: int = 4):
    """Best two-valued candidates on an equal n-cell grid.

    Returns a list of (value, k, a) sorted by decreasing value, where the
    candidate equals ``a`` on the first ``k`` cells and 1 on the rest. The
    best mesh points are refined by golden-section search in log|a| (and
    in the phase of ``a`` when gamma is not real).
    """
    gamma = complex(gamma)
    p = as_exponent(p).p
    mesh = _mesh(gamma)
    found = []
    for k in range(1, n):
        r = _two_valued_ratio(k / n, mesh, gamma, p)
        i = int(np.argmax(r))
        found.append((float(r[i]), k, complex(mesh[i])))
    # constant vector
    found.append((abs(1.0 - gamma), n, 1.0 + 0j))
    found.sort(key=lambda t: (-t[0], t[1]))
    refined = [_refine(v, k, a, gamma, p, n) for v, k, a in found[:top]]
    refined.sort(key=lambda t: (-t[0], t[1]))
    return refined


def _refine(v, k, a, gamma, p, n):
    if k == n or a == 0:
        return v, k, a
    alpha = k / n
    step = math.log(MESH_MAX / MESH_MIN) / (MESH_HALF - 1)
    r0, th0 = math.log(abs(a)), math.atan2(a.imag, a.real)

    def f(lr, th):
        return float(_two_valued_ratio(alpha, math.exp(lr) * complex(math.cos(th), math.sin(th)),
                                       gamma, p))

    lr, th = r0, th0
    best = f(lr, th)
    for _ in range(3 if gamma.imag else 1):
        lr, best = golden_section_max(lambda x: f(x, th), lr - step, lr + step, 1e-12)
        if gamma.imag:
            dth = math.pi / MESH_PHASES
            th, best = golden_section_max(lambda t: f(lr, t), th - dth, th + dth, 1e-12)
    a_new = math.exp(lr) * complex(math.cos(th), math.sin(th))
    if best < v:
        return v, k, a
    return best, k, a_new


def two_valued_vector(grid: Grid, k: int, a: complex) -> LpVector:
    c = np.ones(grid.n, dtype=complex)
    c[:k] = a
    return LpVector(grid, c)


def rhs_norm(gamma, p, grid: Grid, seed: int = 0,
             warm_start: Optional[LpVector] = None,
             restarts: int = 32) -> RhsEstimate:
    """Lower bound (exact at p in {1, 2}) for ||I - gamma E|| on an equal grid.

    Takes the best of the power-iteration estimate, the two-valued
    candidate scan and, if given, a witness from a coarser nested grid
    embedded as a block-constant vector.
    """
    if not grid.is_equal:
        raise ValueError("rhs_norm needs an equal-weight grid")
    gamma = complex(gamma)
    ex = as_exponent(p)
    S = _identity_minus_gamma_e(grid, gamma)

    if ex.p in (1.0, 2.0):
        est = op_norm_p(S, ex, seed=seed)
        return RhsEstimate(gamma, ex, grid.n, est)

    cands = [two_valued_vector(grid, k, a) for _, k, a in two_valued_scan(gamma, ex, grid.n)]
    if warm_start is not None:
        if warm_start.grid != grid:
            warm_start = embed(warm_start, warm_start.grid, grid)
        cands.append(warm_start)
    est = op_norm_p(S, ex, strategy="power", seed=seed, restarts=restarts, candidates=cands)
    # direct evaluation keeps the best candidate even if iteration moved elsewhere
    w = grid.weights
    for c in cands:
        val = weighted_norm(S.entries @ c.coeffs, w, ex.p) / weighted_norm(c.coeffs, w, ex.p)
        if val > est.value + 1e-15:
            cv = LpVector(grid, c.coeffs / weighted_norm(c.coeffs, w, ex.p))
            est = NormEstimate(val, LOWER, cv, "two-valued", seed)
    return RhsEstimate(gamma, ex, grid.n, est)


def _identity_minus_gamma_e(grid: Grid, gamma: complex) -> OperatorMatrix:
    a = -gamma * np.tile(grid.weights, (grid.n, 1)).astype(complex)
    a[np.diag_indices(grid.n)] += 1.0
    return OperatorMatrix(grid, a, f"I-{_fmt_gamma(gamma)}E")


def _fmt_gamma(g: complex) -> str:
    if g.imag == 0:
        return f"{g.real:g}"
    return f"({g.real:g}{g.imag:+g}i)"
