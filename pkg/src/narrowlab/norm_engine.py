"""Induced p -> p operator norms and minimal moduli on the weighted space.

Everything is computed on the unweighted similarity ``A = D T D^{-1}`` with
``D = diag(w^{1/p})``: ``x = D v`` carries the weighted p-norm of ``v`` to
the plain p-norm of ``x``. Witnesses are mapped back to coefficients.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.ndimage import maximum_filter

from .lp_core import LpVector, as_exponent, weighted_norm
from .operator_zoo import OperatorMatrix

EXACT, LOWER, UPPER = "exact", "lower_bound", "upper_bound"
STRATEGIES = ("auto", "exact", "power", "descent", "brute")

DEFAULT_RESTARTS = 32
POWER_MAXIT = 10_000
POWER_RTOL = 1e-12
TIE_RTOL = 1e-12
BRUTE_MAX_N = 6


class UnknownStrategyError(ValueError):
    pass


@dataclass(frozen=True)
class NormEstimate:
    value: float
    kind: str
    witness: Optional[LpVector]
    solver: str
    seed: int = 0

    def witness_hash(self) -> str:
        return witness_hash(self.witness)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "kind": self.kind,
            "solver": self.solver,
            "seed": self.seed,
            "witness_hash": self.witness_hash(),
        }


def witness_hash(v: Optional[LpVector]) -> str:
    if v is None:
        return ""
    c = np.round(v.coeffs, 9) + 0.0  # +0.0 folds -0.0 into 0.0
    raw = np.concatenate([c.real, c.imag]).astype("<f8").tobytes()
    return hashlib.sha256(raw).hexdigest()[:16]


# ---------------------------------------------------------------- helpers

def _scaling(T: OperatorMatrix, p: float):
    d = T.grid.weights ** (1.0 / p)
    A = (d[:, None] * T.entries) / d[None, :]
    return A, d


def _pnorm(x: np.ndarray, p: float) -> float:
    a = np.abs(x)
    top = a.max(initial=0.0)
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return float(top)
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


def _phase(z: np.ndarray) -> np.ndarray:
    a = np.abs(z)
    return np.where(a > 0, z / np.where(a > 0, a, 1.0), 0.0)


def _canonical(x: np.ndarray) -> np.ndarray:
    """Fix the phase so the first maximal-modulus entry is real positive."""
    a = np.abs(x)
    top = a.max(initial=0.0)
    if top == 0.0:
        return x
    j = int(np.flatnonzero(a >= top * (1 - 1e-9))[0])
    return x * np.conj(x[j]) / a[j]


def _lex_key(x: np.ndarray) -> tuple:
    r = np.round(x, 9) + 0.0
    return tuple(np.column_stack([r.real, r.imag]).ravel().tolist())


def _pick(results: list[tuple[float, np.ndarray]], maximize: bool):
    """Best (value, x); ties within TIE_RTOL go to the lexicographically smallest witness."""
    vals = np.array([r[0] for r in results])
    best = vals.max() if maximize else vals.min()
    slack = TIE_RTOL * max(1.0, abs(best))
    near = [r for r in results if abs(r[0] - best) <= slack]
    near = [(v, _canonical(x)) for v, x in near]
    return min(near, key=lambda r: _lex_key(r[1]))


def _to_estimate(T, p, x, d, value, kind, solver, seed, maximize=True) -> NormEstimate:
    v = _canonical(x) / d
    v = v / weighted_norm(v, T.grid.weights, p)
    w = LpVector(T.grid, v)
    if kind != EXACT or value is None:
        value = weighted_norm(T.entries @ w.coeffs, T.grid.weights, p)
    return NormEstimate(float(value), kind, w, solver, int(seed))


def _check_strategy(strategy: str):
    if strategy not in STRATEGIES:
        raise UnknownStrategyError(
            f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")


# ---------------------------------------------------------------- power iteration

def _pnorm_cols(X: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(X)
    top = a.max(axis=0)
    if math.isinf(p):
        return top
    safe = np.where(top > 0, top, 1.0)
    return top * np.sum((a / safe) ** p, axis=0) ** (1.0 / p)


def _dual_cols(Y: np.ndarray, p: float) -> np.ndarray:
    """Column-wise unit q-norm vectors attaining <y, .> = ||y||_p (Hoelder equality)."""
    if math.isinf(p):
        # dual of the sup-norm: a phase-matched coordinate vector at the largest entry
        a = np.abs(Y)
        j = np.argmax(a, axis=0)
        cols = np.arange(Y.shape[1])
        X = np.zeros_like(Y)
        X[j, cols] = np.where(a[j, cols] > 0, _phase(Y[j, cols]), 1.0)
        return X
    if p == 1.0:
        return _phase(Y)
    a = np.abs(Y)
    top = a.max(axis=0)
    safe = np.where(top > 0, top, 1.0)
    S = (a / safe) ** (p - 1.0) * _phase(Y)
    nrm = _pnorm_cols(S, p / (p - 1.0))
    return S / np.where(nrm > 0, nrm, 1.0)


def power_iteration(A: np.ndarray, p: float, X0: np.ndarray,
                    maxit: int = POWER_MAXIT, rtol: float = POWER_RTOL):
    """Dual-norm fixed-point iteration for max ||Ax||_p / ||x||_p.

    Each step maps A x through the p-duality, pulls it back with A^H and
    maps through the dual q-duality; values never decrease. Columns of
    ``X0`` are independent starts, iterated together. A column stops at a
    stationary point, when successive values agree to ``rtol`` (relative),
    or after ``maxit`` steps. Returns per-start values and vectors (a
    single start given as a 1-d array returns a scalar and a vector).
    """
    single = np.ndim(X0) == 1
    X = np.array(X0, dtype=complex).reshape(A.shape[1], -1)
    nx = _pnorm_cols(X, p)
    if np.any(nx == 0.0):
        raise ValueError("zero start vector")
    X = X / nx
    AH = A.conj().T
    q = math.inf if p == 1.0 else p / (p - 1.0)
    Y = A @ X
    val = _pnorm_cols(Y, p)
    best_val, best_X = val.copy(), X.copy()
    active = np.flatnonzero(val > 0)
    for _ in range(maxit):
        if active.size == 0:
            break
        Xa, Ya = X[:, active], Y[:, active]
        Z = AH @ _dual_cols(Ya, p)
        stationary = _pnorm_cols(Z, q) <= np.real(np.sum(Z.conj() * Xa, axis=0)) * (1 + 1e-15)
        Xn = _dual_cols(Z, q)
        Yn = A @ Xn
        new = _pnorm_cols(Yn, p)
        moved = ~stationary
        X[:, active[moved]] = Xn[:, moved]
        Y[:, active[moved]] = Yn[:, moved]
        better = moved & (new > best_val[active])
        best_val[active[better]] = new[better]
        best_X[:, active[better]] = Xn[:, better]
        converged = np.abs(new - val[active]) <= rtol * np.maximum(new, 1e-300)
        val[active[moved]] = new[moved]
        active = active[moved & ~converged]
    if single:
        return float(best_val[0]), best_X[:, 0]
    return best_val, best_X


def structured_starts(n: int, p: float) -> list[np.ndarray]:
    """Constant, periodic two-valued and coordinate-indicator start vectors."""
    from .franchetti import cp_constant

    starts = [np.ones(n, dtype=complex)]
    alphas = [0.5]
    if p > 1.0 and p != 2.0:
        a = cp_constant(p).alpha_star
        alphas += [a, 1.0 - a]
    # mean-zero two-valued patterns repeated with dyadic periods n, n/2, ..., 2
    period = n
    while period >= 2:
        for alpha in alphas:
            k = min(max(int(round(alpha * period)), 1), period - 1)
            block = np.full(period, -k / period, dtype=complex)
            block[:k] = 1.0 - k / period
            starts.append(np.resize(block, n))
        if period % 2:
            break
        period //= 2
    for j in np.unique(np.linspace(0, n - 1, min(n, 8)).round().astype(int)):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        starts.append(e)
    return starts


def _start_batch(n: int, p: float, restarts: int, rng: np.random.Generator,
                 real: bool) -> list[np.ndarray]:
    starts = structured_starts(n, p)[:restarts]
    k = 0
    while len(starts) < restarts:
        x = rng.standard_normal(n)
        # alternate real and complex random starts; complex only matters off the real line
        if not real or k % 2:
            x = x + 1j * rng.standard_normal(n)
        starts.append(x.astype(complex))
        k += 1
    return starts


# ---------------------------------------------------------------- operator norm

def op_norm_p(T: OperatorMatrix, p, strategy: str = "auto", seed: int = 0,
              restarts: int = DEFAULT_RESTARTS,
              candidates: Optional[Iterable[LpVector]] = None) -> NormEstimate:
    """Induced norm of T on the weighted L^p space.

    p == 1 uses the weighted column-sum formula and p == 2 the largest
    singular value of ``W^{1/2} T W^{-1/2}``; both are exact. Other p
    return a lower bound from multistart power iteration, started also
    from any ``candidates``.
    """
    _check_strategy(strategy)
    p = as_exponent(p).p
    if strategy == "brute":
        return brute_force_norm(T, p, "max")
    if strategy == "descent":
        raise UnknownStrategyError("descent is a minimal-modulus strategy")
    if strategy in ("auto", "exact") and p == 1.0:
        return _norm_p1(T)
    if strategy in ("auto", "exact") and p == 2.0:
        return _norm_p2(T)
    if strategy == "exact":
        raise UnknownStrategyError(f"no exact operator-norm routine at p={p}")

    A, d = _scaling(T, p)
    rng = np.random.default_rng(seed)
    starts = _start_batch(T.n, p, restarts, rng, T.is_real)
    for c in candidates or ():
        starts.append(d * np.asarray(c.coeffs, dtype=complex))
    X0 = np.column_stack([x for x in starts if np.any(x)])
    vals, X = power_iteration(A, p, X0)
    _, x = _pick(list(zip(vals, X.T)), maximize=True)
    return _to_estimate(T, p, x, d, None, LOWER, "power", seed)


def _norm_p1(T: OperatorMatrix) -> NormEstimate:
    w = T.grid.weights
    cols = (w @ np.abs(T.entries)) / w
    j = int(np.argmax(cols))
    x = np.zeros(T.n, dtype=complex)
    x[j] = 1.0 / w[j]
    return NormEstimate(float(cols[j]), EXACT, LpVector(T.grid, x), "exact-colsum", 0)


def _norm_p2(T: OperatorMatrix) -> NormEstimate:
    A, d = _scaling(T, 2.0)
    _, s, vh = np.linalg.svd(A)
    return _to_estimate(T, 2.0, vh[0].conj(), d, s[0], EXACT, "exact-svd", 0)


# ---------------------------------------------------------------- minimal modulus

def min_modulus(T: OperatorMatrix, p, strategy: str = "auto", seed: int = 0,
                restarts: int = DEFAULT_RESTARTS, descent_iters: int = 2000) -> NormEstimate:
    """inf over the unit p-sphere of ||T u||_p.

    A numerically singular T (rank-revealing SVD) gives exact 0 with a null
    vector. Otherwise p == 2 is the smallest singular value and p == 1 the
    reciprocal of the weighted column-sum norm of T^{-1}, both exact; other
    p give an upper bound from inverse power iteration followed by
    projected descent on the sphere.
    """
    _check_strategy(strategy)
    p = as_exponent(p).p
    if strategy == "brute":
        return brute_force_norm(T, p, "min")
    if strategy == "power":
        raise UnknownStrategyError("power is an operator-norm strategy")

    A2, d2 = _scaling(T, 2.0)
    _, s, vh = np.linalg.svd(A2)
    if s[0] == 0.0 or s[-1] <= s[0] * T.n * np.finfo(float).eps:
        est = _to_estimate(T, p, vh[-1].conj() / d2, np.ones(T.n), 0.0, EXACT,
                           "exact-kernel", 0)
        return est
    if strategy in ("auto", "exact") and p == 2.0:
        return _to_estimate(T, 2.0, vh[-1].conj(), d2, s[-1], EXACT, "exact-svd", 0)
    if strategy in ("auto", "exact") and p == 1.0:
        return _minmod_p1(T)
    if strategy == "exact":
        raise UnknownStrategyError(f"no exact minimal-modulus routine at p={p}")

    A, d = _scaling(T, p)
    rng = np.random.default_rng(seed)
    Ainv = np.linalg.inv(A)
    starts = _start_batch(T.n, p, restarts, rng, T.is_real)
    _, Yw = power_iteration(Ainv, p, np.column_stack(starts))
    Xw = Ainv @ Yw
    Xw = Xw / _pnorm_cols(Xw, p)
    results = list(zip(_pnorm_cols(A @ Xw, p), Xw.T))
    # polish the few best inverse-iteration points with sphere descent
    results.sort(key=lambda r: r[0])
    polished = [_sphere_descent(A, p, x, descent_iters) for _, x in results[:4]]
    _, x = _pick(results + polished, maximize=False)
    return _to_estimate(T, p, x, d, None, UPPER, "descent", seed, maximize=False)


def _minmod_p1(T: OperatorMatrix) -> NormEstimate:
    w = T.grid.weights
    inv = np.linalg.inv(T.entries)
    cols = (w @ np.abs(inv)) / w
    j = int(np.argmax(cols))
    u = inv[:, j] / w[j]
    u = u / weighted_norm(u, w, 1.0)
    return _to_estimate(T, 1.0, u, np.ones(T.n), 1.0 / cols[j], EXACT, "exact-inv-colsum", 0)


def _ratio(A, x, p):
    return _pnorm(A @ x, p) / _pnorm(x, p)


def _sphere_descent(A: np.ndarray, p: float, x0: np.ndarray, iters: int):
    """Projected gradient descent of ||Ax||_p on the unit p-sphere.

    Steps grow by 1.5 after an accepted move and shrink geometrically by 0.5
    after a rejected one.
    """
    AH = A.conj().T
    x = x0 / _pnorm(x0, p)
    val = _ratio(A, x, p)
    step = 0.1
    for _ in range(iters):
        y = A @ x
        ny = _pnorm(y, p)
        if ny == 0.0:
            break
        # Wirtinger gradient of log ||Ax||_p - log ||x||_p
        g = AH @ _grad_dir(y, p) / ny ** p - _grad_dir(x, p) / _pnorm(x, p) ** p
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        while step > 1e-14:
            cand = x - step * g / gn
            cand = cand / _pnorm(cand, p)
            cv = _ratio(A, cand, p)
            if cv < val:
                x, val = cand, cv
                step *= 1.5
                break
            step *= 0.5
        else:
            break
    return val, x


def _grad_dir(y: np.ndarray, p: float) -> np.ndarray:
    return np.abs(y) ** (p - 1.0) * _phase(y)


# ---------------------------------------------------------------- brute force oracle

def brute_force_norm(T: OperatorMatrix, p, mode: str = "max",
                     resolution: Optional[int] = None) -> NormEstimate:
    """Dense real-sphere sampling oracle for tiny grids.

    Every real direction is a multiple of a point on some face
    ``{x : x_i = 1, |x_k| <= 1}`` of the cube; each face is sampled on a
    ``resolution``-point lattice per free coordinate and the best samples
    are refined by compass (pattern) search in face coordinates. No
    power iteration or gradient is involved.
    """
    if mode not in ("max", "min"):
        raise ValueError(f"mode must be 'max' or 'min', got {mode!r}")
    p = as_exponent(p).p
    n = T.n
    if n > BRUTE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_MAX_N}, got n={n}")
    w = T.grid.weights
    M = T.entries
    sign = 1.0 if mode == "max" else -1.0

    def score(X):  # rows of X are coefficient vectors
        top = np.abs(X @ M.T)
        num = _rows_norm(top, w, p)
        den = _rows_norm(np.abs(X), w, p)
        return sign * num / den

    if n == 1:
        x = np.ones(1)
        val = abs(M[0, 0])
        return NormEstimate(float(val), LOWER if mode == "max" else UPPER,
                            LpVector(T.grid, x), "brute", 0)
    if resolution is None:
        resolution = max(5, int((300_000 / n) ** (1.0 / (n - 1))))
    lattice = np.linspace(-1.0, 1.0, resolution)
    free = np.stack(np.meshgrid(*([lattice] * (n - 1)), indexing="ij"), -1).reshape(-1, n - 1)
    shape = (resolution,) * (n - 1)
    faces = []
    for i in range(n):
        s = score(np.insert(free, i, 1.0, axis=1))
        # seed refinement from lattice-local maxima so narrow peaks are not crowded out
        peak = (s.reshape(shape) == maximum_filter(s.reshape(shape), size=3, mode="nearest"))
        idx = np.flatnonzero(peak.ravel())
        idx = idx[np.argsort(-s[idx], kind="stable")[:16]]
        faces.extend((s[k], i, free[k]) for k in idx)
    faces.sort(key=lambda r: -r[0])

    moves = _compass_moves(n - 1)
    best_s, best_x = -math.inf, None
    for s0, i, y in faces[:48]:
        s_cur = s0
        h = 2.0 / (resolution - 1)
        while h > 1e-11:
            trial = np.clip(y[None, :] + h * moves, -1.0, 1.0)
            st = score(np.insert(trial, i, 1.0, axis=1))
            k = int(np.argmax(st))
            if st[k] > s_cur:
                y, s_cur = trial[k], st[k]
            else:
                h *= 0.5
        if s_cur > best_s:
            best_s, best_x = s_cur, np.insert(y, i, 1.0)
    v = best_x / weighted_norm(best_x, w, p)
    val = weighted_norm(M @ v, w, p)
    return NormEstimate(float(val), LOWER if mode == "max" else UPPER,
                        LpVector(T.grid, v), "brute", 0)


def _compass_moves(m: int) -> np.ndarray:
    """Coordinate and pairwise-diagonal steps; diagonals let the search follow ridges."""
    eye = np.eye(m)
    moves = [eye, -eye]
    for k in range(m):
        for l in range(k + 1, m):
            for sk in (1.0, -1.0):
                for sl in (1.0, -1.0):
                    d = np.zeros(m)
                    d[k], d[l] = sk, sl
                    moves.append(d[None, :] / math.sqrt(2.0))
    return np.vstack(moves)


def _rows_norm(a: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    top = a.max(axis=1, keepdims=True)
    safe = np.where(top > 0, top, 1.0)
    return top[:, 0] * (((a / safe) ** p) @ w) ** (1.0 / p)
