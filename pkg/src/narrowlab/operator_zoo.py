"""Operators on the discretized L^p space and their constructors.

Entries are stored so that ``entries[i, j]`` is the coefficient produced in
cell ``i`` by a unit coefficient in cell ``j``.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .lp_core import Grid, LpVector, PartitionMap, _frozen, _same_grid


class OperatorMatrix:
    """Dense square operator over a grid, with a mandatory label.

    ``coarse_scale`` is the number of blocks an operator is built on (1 for
    operators without block structure) and feeds the harness tolerance.
    ``certified_norm`` is set only when the operator norm is known for every p.
    """

    __slots__ = ("grid", "entries", "label", "coarse_scale", "certified_norm")

    def __init__(self, grid: Grid, entries, label: str, coarse_scale: int = 1,
                 certified_norm: Optional[float] = None):
        a = np.asarray(entries, dtype=complex)
        if a.shape != (grid.n, grid.n):
            raise ValueError(f"expected a {grid.n}x{grid.n} matrix, got {a.shape}")
        if not label:
            raise ValueError("operators need a label")
        self.grid = grid
        self.entries = _frozen(a)
        self.label = str(label)
        self.coarse_scale = int(coarse_scale)
        self.certified_norm = certified_norm

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def is_real(self) -> bool:
        return not np.any(np.imag(self.entries))

    def apply(self, v: LpVector) -> LpVector:
        _same_grid(self.grid, v.grid)
        return LpVector(self.grid, self.entries @ v.coeffs)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_grid(self.grid, other.grid)
        return OperatorMatrix(self.grid, self.entries @ other.entries,
                              f"({self.label})*({other.label})",
                              max(self.coarse_scale, other.coarse_scale))

    def scaled(self, c, label: Optional[str] = None) -> "OperatorMatrix":
        return OperatorMatrix(self.grid, complex(c) * self.entries,
                              label or f"{_fmt(c)}*({self.label})", self.coarse_scale)

    def __repr__(self):
        return f"OperatorMatrix({self.label!r}, n={self.n})"


def _fmt(c) -> str:
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:g}"
    return f"({c.real:g}{c.imag:+g}i)"


def identity(grid: Grid) -> OperatorMatrix:
    return OperatorMatrix(grid, np.eye(grid.n), "I", certified_norm=1.0)


def zero(grid: Grid) -> OperatorMatrix:
    return OperatorMatrix(grid, np.zeros((grid.n, grid.n)), "0", certified_norm=0.0)


def mean_operator(grid: Grid) -> OperatorMatrix:
    """E v = (sum_j w_j v_j) * 1."""
    w = grid.weights
    return OperatorMatrix(grid, np.tile(w, (grid.n, 1)), "E", certified_norm=1.0)


def conditional_expectation(part: PartitionMap, label: Optional[str] = None) -> OperatorMatrix:
    """Block-averaging matrix: cell i receives the weighted mean of its block."""
    grid = part.grid
    b = part.block_of
    same = b[:, None] == b[None, :]
    a = np.where(same, grid.weights[None, :] / part.block_weights[b][:, None], 0.0)
    return OperatorMatrix(grid, a, label or f"E^G(m={part.m})", coarse_scale=part.m,
                          certified_norm=1.0)


def coarsening_projection(part: PartitionMap) -> OperatorMatrix:
    """Norm-one projection onto block-constant vectors.

    Same matrix as :func:`conditional_expectation`; averaging contracts every
    p-norm and fixes constants, so ``certified_norm`` is exactly 1 and the
    constant vector lies in the range.
    """
    return conditional_expectation(part, label=f"P(m={part.m})")


def kernel_operator(grid: Grid, kernel: Callable, label: str = "kernel") -> OperatorMatrix:
    """Midpoint-rule discretization of f -> int K(s, t) f(t) dt."""
    s = grid.midpoints
    vals = np.asarray(kernel(s[:, None], s[None, :]), dtype=complex)
    vals = np.broadcast_to(vals, (grid.n, grid.n))
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"kernel {label!r} is not finite at cell midpoints")
    return OperatorMatrix(grid, vals * grid.weights[None, :], label)


def rank_one(u: LpVector, phi: LpVector, label: Optional[str] = None) -> OperatorMatrix:
    """v -> (sum_j w_j conj(phi_j) v_j) u."""
    _same_grid(u.grid, phi.grid)
    w = u.grid.weights
    a = np.outer(u.coeffs, np.conj(phi.coeffs) * w)
    return OperatorMatrix(u.grid, a, label or "rank1")


def gamma_shift(T: OperatorMatrix, gamma) -> OperatorMatrix:
    """gamma*I - T."""
    g = complex(gamma)
    a = -np.array(T.entries)
    a[np.diag_indices(T.n)] += g
    return OperatorMatrix(T.grid, a, f"{_fmt(g)}I-({T.label})", T.coarse_scale)


def multiply(T: OperatorMatrix, g: LpVector, label: Optional[str] = None) -> OperatorMatrix:
    """T composed with multiplication by ``g`` (column j scaled by g_j)."""
    _same_grid(T.grid, g.grid)
    return OperatorMatrix(T.grid, T.entries * g.coeffs[None, :],
                          label or f"({T.label})g", T.coarse_scale)


def multiply_by_sign(T: OperatorMatrix, g) -> OperatorMatrix:
    """T composed with multiplication by a sign vector."""
    _same_grid(T.grid, g.grid)
    vals = np.asarray(g.values, dtype=float)
    return OperatorMatrix(T.grid, T.entries * vals[None, :], f"({T.label})gI",
                          T.coarse_scale)


# Named kernels available to the zoo grammar.
KERNELS: dict[str, Callable] = {
    "st": lambda s, t: s * t,
    "exp": lambda s, t: np.exp(-np.abs(s - t)),
    "one": lambda s, t: np.ones_like(s * t),
    "zero": lambda s, t: np.zeros_like(s * t),
    "min": lambda s, t: np.minimum(s, t),
}


def _rank_one_vectors(grid: Grid, name: str) -> tuple[LpVector, LpVector]:
    if name == "ones":
        one = LpVector.ones(grid)
        return one, one
    if name == "ramp":
        r = LpVector(grid, grid.midpoints)
        return r, r
    raise ValueError(f"unknown rank-one family {name!r}")


ZOO_GRAMMAR = """\
Zoo entries (comma separated):
  mean              the mean operator E
  identity          identity I (non-narrow control, never pass/fail)
  zero              zero operator
  condexp:m=M       conditional expectation on M contiguous equal blocks
  kernel:NAME       midpoint-rule integral operator, NAME in {%s}
  rankone:NAME      v -> <v, u> u with u in {ones, ramp}
  scale:C:ENTRY     C times another entry (C real), e.g. scale:0.5:condexp:m=4
""" % ", ".join(sorted(KERNELS))


def parse_zoo_entry(spec: str, grid: Grid) -> OperatorMatrix:
    """Build one operator from a zoo specification string."""
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if head == "mean" and not rest:
        return mean_operator(grid)
    if head == "identity" and not rest:
        return identity(grid)
    if head == "zero" and not rest:
        return zero(grid)
    if head == "condexp":
        key, _, val = rest.partition("=")
        if key != "m" or not val.isdigit():
            raise ValueError(f"bad condexp entry {spec!r}; expected condexp:m=<int>")
        m = int(val)
        if not 1 <= m <= grid.n:
            raise ValueError(f"condexp block count {m} outside 1..{grid.n}")
        return conditional_expectation(PartitionMap.contiguous(grid, m),
                                       label=f"condexp:m={m}")
    if head == "kernel":
        if rest not in KERNELS:
            raise ValueError(f"unknown kernel {rest!r}")
        return kernel_operator(grid, KERNELS[rest], label=spec)
    if head == "rankone":
        u, phi = _rank_one_vectors(grid, rest)
        return rank_one(u, phi, label=spec)
    if head == "scale":
        c, _, inner = rest.partition(":")
        try:
            cval = float(c)
        except ValueError:
            raise ValueError(f"bad scale factor in {spec!r}") from None
        base = parse_zoo_entry(inner, grid)
        return base.scaled(cval, label=spec)
    raise ValueError(f"unknown zoo entry {spec!r}")


def split_zoo(zoo: str) -> list[str]:
    return [s.strip() for s in zoo.split(",") if s.strip()]


def validate_zoo(zoo: str, grid: Grid) -> list[str]:
    """Parse every entry up front so bad input fails before any computation."""
    entries = split_zoo(zoo)
    if not entries:
        raise ValueError("empty zoo")
    for e in entries:
        parse_zoo_entry(e, grid)
    return entries
