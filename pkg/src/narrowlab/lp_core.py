"""Discretized L^p([0, 1]): grids, coefficient vectors, weighted norms.

A function is represented by its piecewise-constant coefficients over a
partition of [0, 1] into cells; cell weights play the role of Lebesgue
measure, so every norm identity is exact for piecewise-constant functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

WEIGHT_SUM_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Exponent:
    """Finite Lebesgue exponent 1 <= p < inf."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p < 1.0:
            raise ValueError(f"exponent must satisfy 1 <= p < inf, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def dual(self) -> float:
        """Conjugate exponent p/(p-1); ``math.inf`` when p == 1."""
        if self.p == 1.0:
            return math.inf
        return self.p / (self.p - 1.0)

    def __float__(self) -> float:
        return self.p


def as_exponent(p) -> Exponent:
    return p if isinstance(p, Exponent) else Exponent(p)


class Grid:
    """Partition of [0, 1] into ``n`` cells with positive weights summing to 1.

    Cells are laid out left to right, so cell ``i`` occupies
    ``[edges[i], edges[i+1])``.
    """

    __slots__ = ("weights", "edges")

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("grid needs at least one cell")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("grid weights must be finite and strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"grid weights must sum to 1, got {w.sum()!r}")
        self.weights = _frozen(w)
        edges = np.concatenate([[0.0], np.cumsum(w)])
        edges[-1] = 1.0
        self.edges = _frozen(edges)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def is_equal(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __repr__(self):
        if self.is_equal:
            return f"Grid(equal, n={self.n})"
        return f"Grid(n={self.n})"


def make_equal_grid(n: int) -> Grid:
    n = int(n)
    if n < 1:
        raise ValueError(f"cell count must be positive, got {n}")
    return Grid(np.full(n, 1.0 / n))


class LpVector:
    """Coefficients of a piecewise-constant function over a grid."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if c.size != grid.n:
            raise ValueError(f"expected {grid.n} coefficients, got {c.size}")
        self.grid = grid
        self.coeffs = _frozen(c)

    @classmethod
    def ones(cls, grid: Grid) -> "LpVector":
        return cls(grid, np.ones(grid.n))

    @classmethod
    def indicator(cls, grid: Grid, cells) -> "LpVector":
        c = np.zeros(grid.n)
        c[np.asarray(list(cells), dtype=int)] = 1.0
        return cls(grid, c)

    @classmethod
    def ramp(cls, grid: Grid) -> "LpVector":
        """c_i = i / n, the left endpoints of an equal grid."""
        return cls(grid, np.arange(grid.n) / grid.n)

    def __add__(self, other: "LpVector") -> "LpVector":
        _same_grid(self.grid, other.grid)
        return LpVector(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "LpVector") -> "LpVector":
        _same_grid(self.grid, other.grid)
        return LpVector(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c) -> "LpVector":
        return LpVector(self.grid, complex(c) * self.coeffs)

    __rmul__ = __mul__

    def __repr__(self):
        return f"LpVector(n={self.grid.n})"


def _same_grid(a: Grid, b: Grid):
    if a is not b and a != b:
        raise ValueError("vectors live on different grids")


def weighted_norm(coeffs: np.ndarray, weights: np.ndarray, p: float) -> float:
    """(sum_i w_i |c_i|^p)^(1/p) on raw arrays; the workhorse behind lp_norm."""
    a = np.abs(coeffs)
    if p == 1.0:
        return float(np.dot(weights, a))
    if p == 2.0:
        return float(math.sqrt(np.dot(weights, a * a)))
    # rescale by the max entry so large p cannot overflow
    top = a.max(initial=0.0)
    if top == 0.0:
        return 0.0
    return float(top * np.dot(weights, (a / top) ** p) ** (1.0 / p))


def lp_norm(v: LpVector, p) -> float:
    return weighted_norm(v.coeffs, v.grid.weights, as_exponent(p).p)


class PartitionMap:
    """Assignment of grid cells to ``m`` nonempty blocks (a finite sigma-algebra)."""

    __slots__ = ("grid", "block_of", "m")

    def __init__(self, grid: Grid, block_of: Sequence[int]):
        b = np.asarray(block_of, dtype=int).ravel()
        if b.size != grid.n:
            raise ValueError(f"expected {grid.n} block labels, got {b.size}")
        if b.size and b.min() < 0:
            raise ValueError("block labels must be nonnegative")
        m = int(b.max()) + 1
        counts = np.bincount(b, minlength=m)
        if np.any(counts == 0):
            missing = np.flatnonzero(counts == 0).tolist()
            raise ValueError(f"empty blocks {missing}")
        self.grid = grid
        self.block_of = _frozen(b)
        self.m = m

    @classmethod
    def contiguous(cls, grid: Grid, m: int) -> "PartitionMap":
        """Split the cells into ``m`` consecutive runs of (near) equal length."""
        if not 1 <= m <= grid.n:
            raise ValueError(f"need 1 <= m <= n, got m={m}, n={grid.n}")
        return cls(grid, (np.arange(grid.n) * m) // grid.n)

    @classmethod
    def trivial(cls, grid: Grid) -> "PartitionMap":
        return cls(grid, np.zeros(grid.n, dtype=int))

    @classmethod
    def singletons(cls, grid: Grid) -> "PartitionMap":
        return cls(grid, np.arange(grid.n))

    @property
    def block_weights(self) -> np.ndarray:
        return np.bincount(self.block_of, weights=self.grid.weights, minlength=self.m)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.block_of == k)

    def block_means(self, coeffs: np.ndarray) -> np.ndarray:
        w = self.grid.weights
        re = np.bincount(self.block_of, weights=w * np.real(coeffs), minlength=self.m)
        im = np.bincount(self.block_of, weights=w * np.imag(coeffs), minlength=self.m)
        return (re + 1j * im) / self.block_weights


def simple_approximation(v: LpVector, part: PartitionMap) -> LpVector:
    """Replace ``v`` on each block by its weighted block mean.

    The result is the block-constant function ``sum_k a_k 1_{B_k}`` used as
    the simple-function approximation; it is idempotent and contracts
    every p-norm.
    """
    _same_grid(v.grid, part.grid)
    means = part.block_means(v.coeffs)
    return LpVector(v.grid, means[part.block_of])


def refinement_map_for(coarse: Grid, fine: Grid) -> np.ndarray:
    """Map each fine cell to the coarse cell containing its midpoint."""
    idx = np.searchsorted(coarse.edges, fine.midpoints, side="right") - 1
    return np.clip(idx, 0, coarse.n - 1)


def embed(v: LpVector, coarse: Grid, fine: Grid, refinement_map=None) -> LpVector:
    """Copy a coarse vector onto a finer grid as a block-constant vector.

    ``refinement_map[j]`` is the coarse cell containing fine cell ``j``; when
    omitted it is inferred from cell positions. Fine weights must aggregate
    to coarse weights, which makes the embedding an isometry for every p.
    """
    _same_grid(v.grid, coarse)
    if refinement_map is None:
        refinement_map = refinement_map_for(coarse, fine)
    r = np.asarray(refinement_map, dtype=int).ravel()
    if r.size != fine.n or r.min() < 0 or r.max() >= coarse.n:
        raise ValueError("refinement map must send every fine cell to a coarse cell")
    agg = np.bincount(r, weights=fine.weights, minlength=coarse.n)
    if np.max(np.abs(agg - coarse.weights)) > WEIGHT_SUM_TOL:
        raise ValueError("fine weights do not aggregate to coarse weights")
    return LpVector(fine, v.coeffs[r])
