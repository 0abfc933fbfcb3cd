"""Theorem-level checks assembled from the solver modules.

Every function returns plain rows (lists of dicts with a fixed key order)
so the CLI can serialize them to CSV or JSON without further formatting.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .franchetti import RhsEstimate, cp_constant, rhs_norm
from .lp_core import PartitionMap, as_exponent, make_equal_grid
from .norm_engine import NormEstimate, min_modulus, op_norm_p
from .operator_zoo import conditional_expectation, gamma_shift, parse_zoo_entry, validate_zoo
from .sign_lab import narrowness_profile

DEFAULT_TOLERANCE_RULE = (0.05, 16.0)
CONTROL_LABELS = ("identity",)


def format_complex(z) -> str:
    z = complex(z)
    re, im = repr(z.real + 0.0), repr(abs(z.imag))
    if z.imag == 0:
        return re
    return f"{re}{'-' if z.imag < 0 else '+'}{im}i"


def parse_complex(text: str) -> complex:
    """Parse "a+bi" style numbers (also accepts a Python ``j`` suffix)."""
    t = text.strip().replace(" ", "").replace("i", "j")
    if t.endswith("j") and t[:-1] in ("", "+", "-"):
        t = t[:-1] + "1j"
    try:
        return complex(t)
    except ValueError:
        raise ValueError(f"cannot parse complex number {text!r}") from None


def parse_tolerance_rule(text: str) -> tuple[float, float]:
    """``A:C`` means tolerance = A + C * m_eff / n."""
    try:
        a, c = text.split(":")
        return float(a), float(c)
    except ValueError:
        raise ValueError(f"bad tolerance rule {text!r}; expected A:C") from None


def row_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


@dataclass(frozen=True)
class TheoremCheck:
    operator_label: str
    p: float
    gamma: complex
    n: int
    lhs_norm: NormEstimate
    delta: NormEstimate
    rhs: RhsEstimate
    tolerance: float
    control: bool = False

    @property
    def margin(self) -> float:
        return self.lhs_norm.value + self.delta.value - self.rhs.value.value

    @property
    def passed(self) -> Optional[bool]:
        if self.control:
            return None
        return self.margin >= -self.tolerance

    def as_row(self) -> dict:
        return {
            "operator": self.operator_label,
            "control": self.control,
            "p": self.p,
            "gamma": format_complex(self.gamma),
            "n": self.n,
            "lhs": self.lhs_norm.value,
            "lhs_kind": self.lhs_norm.kind,
            "lhs_solver": self.lhs_norm.solver,
            "lhs_witness": self.lhs_norm.witness_hash(),
            "delta": self.delta.value,
            "delta_kind": self.delta.kind,
            "delta_solver": self.delta.solver,
            "delta_witness": self.delta.witness_hash(),
            "rhs": self.rhs.value.value,
            "rhs_kind": self.rhs.value.kind,
            "rhs_witness": self.rhs.value.witness_hash(),
            "margin": self.margin,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _rhs_job(args):
    gamma, p, n, seed, restarts = args
    return rhs_norm(gamma, p, make_equal_grid(n), seed=seed, restarts=restarts)


def _row_job(args):
    entry, p, gamma, n, seed, restarts = args
    grid = make_equal_grid(n)
    T = parse_zoo_entry(entry, grid)
    lhs = op_norm_p(gamma_shift(T, 1.0), p, seed=seed, restarts=restarts)
    delta = min_modulus(gamma_shift(T, gamma), p, seed=seed, restarts=restarts)
    return T.coarse_scale, lhs, delta


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def theorem_check(zoo: str, p_list: Sequence[float], gamma_list: Sequence[complex], n: int,
                  seed: int = 0, tolerance_rule=DEFAULT_TOLERANCE_RULE, restarts: int = 32,
                  jobs: int = 1) -> list[TheoremCheck]:
    """Check ||I - T|| + inf ||(gamma I - T)u|| >= ||I - gamma E|| over a zoo.

    One row per (operator, p, gamma). The identity is kept as a non-narrow
    control and never decides pass/fail.
    """
    grid = make_equal_grid(n)
    entries = validate_zoo(zoo, grid)
    ps = [as_exponent(p).p for p in p_list]
    gammas = [complex(g) for g in gamma_list]
    a, c = tolerance_rule

    rhs_keys = [(g, p) for p in ps for g in gammas]
    rhs_jobs = [(g, p, n, row_seed(seed, 10_000 + i), restarts) for i, (g, p) in enumerate(rhs_keys)]
    rhs = dict(zip(rhs_keys, _map(_rhs_job, rhs_jobs, jobs)))

    keys = [(e, p, g) for e in entries for p in ps for g in gammas]
    row_jobs = [(e, p, g, n, row_seed(seed, i), restarts) for i, (e, p, g) in enumerate(keys)]
    out = []
    for (e, p, g), (m_eff, lhs, delta) in zip(keys, _map(_row_job, row_jobs, jobs)):
        out.append(TheoremCheck(e, p, g, n, lhs, delta, rhs[(g, p)],
                                tolerance=a + c * m_eff / n,
                                control=e in CONTROL_LABELS))
    return out


def daugavet_check(blocks: Sequence[int], scales: Sequence[float],
                   sizes: Sequence[int]) -> list[dict]:
    """Exact p = 1 comparison of ||I - cE^G|| with 1 + ||cE^G||."""
    rows = []
    for n in sizes:
        grid = make_equal_grid(n)
        for m in blocks:
            P = conditional_expectation(PartitionMap.contiguous(grid, m))
            for c in scales:
                T = P.scaled(c)
                lhs = op_norm_p(gamma_shift(T, 1.0), 1.0).value
                tn = op_norm_p(T, 1.0).value
                disc = abs(lhs - (1.0 + tn))
                budget = 2.0 * abs(c) * m / n
                rows.append({
                    "m": m, "c": c, "n": n,
                    "norm_I_minus_T": lhs, "one_plus_norm_T": 1.0 + tn,
                    "discrepancy": disc, "budget": budget,
                    "pass": disc <= budget + 1e-12,
                })
    return rows


def cp_table(p_list: Sequence[float], include_duals: bool = True) -> list[dict]:
    ps = {as_exponent(p).p for p in p_list}
    if include_duals:
        ps |= {as_exponent(p).dual for p in list(ps) if p > 1.0}
    rows = []
    for p in sorted(ps):
        r = cp_constant(p)
        rows.append({"p": p, "C_p": r.value, "alpha_star": r.alpha_star})
    return rows


def convergence_run(p_list: Sequence[float], levels: Sequence[int], seed: int = 0,
                    threshold: float = 1e-2, restarts: int = 32) -> list[dict]:
    """||I - E|| on nested dyadic grids n = 2^k, warm-started level to level."""
    rows = []
    for p in p_list:
        cp = cp_constant(p).value
        prev_val, prev_w = -math.inf, None
        for i, k in enumerate(levels):
            n = 2 ** int(k)
            est = rhs_norm(1.0, p, make_equal_grid(n), seed=row_seed(seed, i),
                           warm_start=prev_w, restarts=restarts).value
            rows.append({
                "p": float(p), "n": n, "value": est.value, "kind": est.kind,
                "gap": cp - est.value,
                "nondecreasing": est.value >= prev_val - 1e-12,
                "witness": est.witness_hash(),
            })
            prev_val, prev_w = est.value, est.witness
        rows[-1]["final_gap_ok"] = rows[-1]["gap"] <= threshold
    return rows


def convergence_passed(rows: list[dict]) -> bool:
    return all(r["nondecreasing"] for r in rows) and all(
        r.get("final_gap_ok", True) for r in rows)


def narrowness_rows(zoo: str, levels: Sequence[int], p: float, rule: str = "all",
                    budget: int = 50_000, seed: int = 0) -> list[dict]:
    entries = validate_zoo(zoo, make_equal_grid(2 ** int(max(levels))))
    rows = []
    for e in entries:
        fam = lambda n, e=e: parse_zoo_entry(e, make_equal_grid(n))
        for r in narrowness_profile(fam, [2 ** int(k) for k in levels], p, rule, budget, seed):
            rows.append({"operator": e, "n": r.n, "best_value": r.best_value,
                         "sign_hash": r.sign_hash, "evaluations": r.evaluations})
    return rows


def single_norm_rows(zoo: str, p_list: Sequence[float], n: int, mode: str,
                     strategy: str = "auto", seed: int = 0, restarts: int = 32) -> list[dict]:
    grid = make_equal_grid(n)
    entries = validate_zoo(zoo, grid)
    rows = []
    for e in entries:
        T = parse_zoo_entry(e, grid)
        for p in p_list:
            if mode == "max":
                est = op_norm_p(T, p, strategy=strategy, seed=seed, restarts=restarts)
            else:
                est = min_modulus(T, p, strategy=strategy, seed=seed, restarts=restarts)
            rows.append({"operator": e, "p": float(p), "n": n, **est.as_dict()})
    return rows


__all__ = [
    "TheoremCheck", "theorem_check", "daugavet_check", "cp_table", "convergence_run",
    "convergence_passed", "narrowness_rows", "single_norm_rows", "parse_complex",
    "format_complex", "parse_tolerance_rule", "row_seed",
]
