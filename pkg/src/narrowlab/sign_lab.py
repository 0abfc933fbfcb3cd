"""Mean-zero signs: search, combination, the multiplication-lemma witness
and narrowness profiles under refinement."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .lp_core import (Grid, LpVector, PartitionMap, _frozen, _same_grid, as_exponent,
                      simple_approximation, weighted_norm)
from .operator_zoo import OperatorMatrix, multiply

EXHAUSTIVE_MAX = 20
DEFAULT_BUDGET = 50_000
TIE_TOL = 1e-12
_CHUNK = 1 << 14


class InfeasibleSignError(ValueError):
    """No sign on the requested support has |residual| <= eta."""


@dataclass(frozen=True, eq=False)
class SignVector:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} sign values, got shape {v.shape}")
        if not np.all(np.isin(v, (-1, 0, 1))):
            raise ValueError("sign values must lie in {-1, 0, 1}")
        object.__setattr__(self, "values", _frozen(v.astype(np.int8)))

    @property
    def support(self) -> frozenset:
        return frozenset(np.flatnonzero(self.values).tolist())

    @property
    def residual(self) -> float:
        return float(np.dot(self.values, self.grid.weights))

    def is_mean_zero(self, eta: float) -> bool:
        return abs(self.residual) <= eta

    def as_vector(self) -> LpVector:
        return LpVector(self.grid, self.values.astype(float))

    def hash(self) -> str:
        return hashlib.sha256(self.values.tobytes()).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, SignVector):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"SignVector(n={self.grid.n}, |A|={len(self.support)}, residual={self.residual:.3g})"


class SignSearch(NamedTuple):
    sign: SignVector
    value: float
    evaluations: int
    exhaustive: bool


class Lemma1Witness(NamedTuple):
    sign: SignVector
    value: float
    bound: float
    target: float
    pieces: list


def default_eta(grid: Grid) -> float:
    return float(grid.weights.min()) / 2.0


def _col_norms(Y: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """Weighted p-norm of each column of Y."""
    a = np.abs(Y)
    if p == 1.0:
        return w @ a
    top = a.max(axis=0)
    safe = np.where(top > 0, top, 1.0)
    return top * (w @ (a / safe) ** p) ** (1.0 / p)


def _support_array(grid: Grid, A: Iterable[int]) -> np.ndarray:
    cells = np.array(sorted(set(int(i) for i in A)), dtype=int)
    if cells.size == 0:
        raise ValueError("support A must be nonempty")
    if cells[0] < 0 or cells[-1] >= grid.n:
        raise ValueError("support A contains cells outside the grid")
    return cells


def find_mean_zero_sign(T: OperatorMatrix, A: Iterable[int], p, budget: int = DEFAULT_BUDGET,
                        seed: int = 0, eta: Optional[float] = None,
                        exhaustive: Optional[bool] = None) -> SignSearch:
    """Best sign g on exactly A with |residual| <= eta, minimizing ||T g||_p.

    Supports of at most 20 cells are enumerated completely (the budget does
    not cap enumeration); larger ones use randomized balanced starts and
    local search until ``budget`` objective evaluations are spent.
    """
    p = as_exponent(p).p
    grid = T.grid
    cells = _support_array(grid, A)
    eta = default_eta(grid) if eta is None else float(eta)
    if exhaustive is None:
        exhaustive = cells.size <= EXHAUSTIVE_MAX
    if exhaustive:
        if cells.size > EXHAUSTIVE_MAX:
            raise ValueError(f"exhaustive search limited to |A| <= {EXHAUSTIVE_MAX}")
        pattern, value, evals = _exhaustive(T, cells, p, eta)
    else:
        pattern, value, evals = _local_search(T, cells, p, eta, budget, seed)
    vals = np.zeros(grid.n, dtype=np.int8)
    vals[cells] = pattern
    return SignSearch(SignVector(grid, vals), float(value), int(evals), bool(exhaustive))


def _exhaustive(T, cells, p, eta):
    w = T.grid.weights
    wA = w[cells]
    cols = T.entries[:, cells]
    k = cells.size
    # g and -g have equal norms and |residual|; fixing the first entry to -1 keeps one of each pair
    free = k - 1
    total = 1 << free
    best_val, best_pat, evals = np.inf, None, 0
    shifts = np.arange(free - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        ints = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = (ints[:, None] >> shifts[None, :]) & 1
        G = np.concatenate([-np.ones((ints.size, 1)), 2.0 * bits - 1.0], axis=1)
        ok = np.abs(G @ wA) <= eta
        if not np.any(ok):
            continue
        G = G[ok]
        vals = _col_norms(cols @ G.T, w, p)
        evals += G.shape[0]
        m = vals.min()
        if m < best_val - TIE_TOL:
            near = np.flatnonzero(vals <= m + TIE_TOL)
            best_val, best_pat = m, _lex_first(G[near])
        elif m <= best_val + TIE_TOL:
            near = np.flatnonzero(vals <= best_val + TIE_TOL)
            best_pat = _lex_first(np.vstack([best_pat[None, :], G[near]]))
            best_val = min(best_val, m)
    if best_pat is None:
        raise InfeasibleSignError(
            f"no sign on {k} cells has |residual| <= eta={eta:g}")
    return best_pat.astype(np.int8), best_val, evals


def _lex_first(G: np.ndarray) -> np.ndarray:
    order = np.lexsort(G.T[::-1])
    return G[order[0]]


def _balanced_start(wA, eta, rng, tries=64):
    """Random sign on the support with |residual| <= eta, built greedily."""
    k = wA.size
    for _ in range(tries):
        order = rng.permutation(k)
        g = np.zeros(k)
        res = 0.0
        for i in order:
            s = -1.0 if res > 0 else 1.0 if res < 0 else rng.choice((-1.0, 1.0))
            g[i] = s
            res += s * wA[i]
        if abs(res) <= eta:
            return g
    return None


def _local_search(T, cells, p, eta, budget, seed):
    rng = np.random.default_rng(seed)
    w = T.grid.weights
    wA = w[cells]
    cols = T.entries[:, cells]
    k = cells.size
    ii, jj = np.triu_indices(k, 1)
    best_val, best_g, evals = np.inf, None, 0
    while evals < budget:
        g = _balanced_start(wA, eta, rng)
        if g is None:
            if best_g is None:
                raise InfeasibleSignError(
                    f"could not build a sign on {k} cells with |residual| <= eta={eta:g}")
            break
        y = cols @ g
        val = weighted_norm(y, w, p)
        evals += 1
        while evals < budget:
            res = float(g @ wA)
            # pair moves flip two opposite signs; single flips change the residual by 2 w_i
            pi, pj = ii[g[ii] != g[jj]], jj[g[ii] != g[jj]]
            pres = res - 2.0 * g[pi] * wA[pi] - 2.0 * g[pj] * wA[pj]
            keep = np.abs(pres) <= eta
            pi, pj = pi[keep], pj[keep]
            sres = res - 2.0 * g * wA
            si = np.flatnonzero(np.abs(sres) <= eta)
            n_moves = pi.size + si.size
            if n_moves == 0:
                break
            limit = min(n_moves, 4096, budget - evals)
            pick = np.sort(rng.choice(n_moves, size=limit, replace=False)) if limit < n_moves \
                else np.arange(n_moves)
            pair = pick[pick < pi.size]
            single = si[pick[pick >= pi.size] - pi.size]
            Y = np.concatenate([
                y[:, None] - 2.0 * cols[:, pi[pair]] * g[pi[pair]] - 2.0 * cols[:, pj[pair]] * g[pj[pair]],
                y[:, None] - 2.0 * cols[:, single] * g[single],
            ], axis=1)
            vals = _col_norms(Y, w, p)
            evals += vals.size
            b = int(np.argmin(vals))
            if vals[b] >= val - 1e-15:
                if limit == n_moves:
                    break
                continue
            if b < pair.size:
                g[pi[pair[b]]] *= -1.0
                g[pj[pair[b]]] *= -1.0
            else:
                g[single[b - pair.size]] *= -1.0
            y = Y[:, b]
            val = vals[b]
        if g[0] > 0:
            g = -g
        if val < best_val - TIE_TOL or (val <= best_val + TIE_TOL and
                                         tuple(g) < tuple(best_g)):
            best_val, best_g = min(val, best_val), g.copy()
    return best_g.astype(np.int8), best_val, evals


def combine_signs(parts: Sequence[SignVector], grid: Optional[Grid] = None) -> SignVector:
    """Sum of signs with pairwise disjoint supports."""
    if not parts:
        if grid is None:
            raise ValueError("an empty combination needs an explicit grid")
        return SignVector(grid, np.zeros(grid.n, dtype=np.int8))
    grid = parts[0].grid
    total = np.zeros(grid.n, dtype=np.int8)
    for s in parts:
        _same_grid(grid, s.grid)
        if np.any((total != 0) & (s.values != 0)):
            raise ValueError("sign supports overlap")
        total = total + s.values
    return SignVector(grid, total)


def _upper_op_norm(T: OperatorMatrix, p: float) -> float:
    """Certified upper bound for ||T||_p: exact at p in {1, 2}, Riesz-Thorin otherwise."""
    from .norm_engine import op_norm_p

    if p in (1.0, 2.0):
        return op_norm_p(T, p).value
    w = T.grid.weights
    d = w ** (1.0 / p)
    A = np.abs((d[:, None] * T.entries) / d[None, :])
    n1 = A.sum(axis=0).max()
    ninf = A.sum(axis=1).max()
    return float(n1 ** (1.0 / p) * ninf ** (1.0 - 1.0 / p))


def lemma1_witness(T: OperatorMatrix, g_mult: LpVector, part: PartitionMap, A: Iterable[int],
                   p, eps: float = 1e-2, budget: int = DEFAULT_BUDGET, seed: int = 0,
                   eta: Optional[float] = None) -> Lemma1Witness:
    """Mean-zero sign h on A with ||T (g h)||_p small, built piece by piece.

    ``g_mult`` is replaced by its block means ``a_k`` over ``part``; on every
    piece A ∩ B_k a separate sign h_k is searched for T, and the pieces are
    summed. Alongside the measured ``||T(g h)||_p`` this returns the bound

        sum_k |a_k| ||T h_k||_p + ||T||_p ||g - g0||_inf ||h||_p

    with a certified upper bound for ||T||_p, and the per-piece target
    eps / (2 sum_k |a_k|).
    """
    p = as_exponent(p).p
    _same_grid(T.grid, g_mult.grid)
    _same_grid(T.grid, part.grid)
    cells = _support_array(T.grid, A)
    g0 = simple_approximation(g_mult, part)
    a = part.block_means(g_mult.coeffs)
    sum_a = float(np.abs(a).sum())
    target = eps / (2.0 * sum_a) if sum_a > 0 else np.inf

    pieces = []
    partial = 0.0
    in_A = np.zeros(T.n, dtype=bool)
    in_A[cells] = True
    for k in range(part.m):
        piece = np.flatnonzero(in_A & (part.block_of == k))
        if piece.size == 0:
            continue
        found = find_mean_zero_sign(T, piece, p, budget=budget, seed=seed + k, eta=eta)
        pieces.append((k, found))
        partial += abs(a[k]) * found.value
    h = combine_signs([f.sign for _, f in pieces], T.grid)

    w = T.grid.weights
    measured = weighted_norm(multiply(T, g_mult).entries @ h.values, w, p)
    sup_err = float(np.abs(g_mult.coeffs - g0.coeffs).max())
    bound = partial + _upper_op_norm(T, p) * sup_err * weighted_norm(h.values, w, p)
    return Lemma1Witness(h, float(measured), float(bound), float(target), pieces)


def support_rule(grid: Grid, rule: str) -> np.ndarray:
    """Cells selected by a support rule.

    ``all`` is every cell, ``left-half`` the cells in [0, 1/2), and
    ``dyadic:J:K`` the cells in [K/2^J, (K+1)/2^J) (by midpoint).
    """
    mid = grid.midpoints
    if rule == "all":
        return np.arange(grid.n)
    if rule == "left-half":
        lo, hi = 0.0, 0.5
    elif rule.startswith("dyadic:"):
        try:
            _, j, k = rule.split(":")
            j, k = int(j), int(k)
        except ValueError:
            raise ValueError(f"bad support rule {rule!r}; expected dyadic:J:K") from None
        if not 0 <= k < 2 ** j:
            raise ValueError(f"dyadic index {k} outside 0..{2 ** j - 1}")
        lo, hi = k / 2 ** j, (k + 1) / 2 ** j
    else:
        raise ValueError(f"unknown support rule {rule!r}")
    cells = np.flatnonzero((mid >= lo) & (mid < hi))
    if cells.size == 0:
        raise ValueError(f"support rule {rule!r} selects no cells at n={grid.n}")
    return cells


class ProfileRow(NamedTuple):
    n: int
    best_value: float
    sign_hash: str
    evaluations: int


def narrowness_profile(family: Callable[[int], OperatorMatrix], levels: Sequence[int], p,
                       rule: str = "all", budget: int = DEFAULT_BUDGET, seed: int = 0,
                       eta: Optional[float] = None) -> list[ProfileRow]:
    """Best mean-zero sign value on the rule's support at each grid size."""
    rows = []
    for idx, n in enumerate(levels):
        T = family(int(n))
        cells = support_rule(T.grid, rule)
        found = find_mean_zero_sign(T, cells, p, budget=budget, seed=seed + idx, eta=eta)
        rows.append(ProfileRow(int(n), found.value, found.sign.hash(), found.evaluations))
    return rows
