"""End-to-end acceptance checks, one per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (visible in
``pytest -v`` output) before asserting.
"""
import hashlib
import subprocess
import sys

import numpy as np
import pytest

from narrowlab.franchetti import cp_constant
from narrowlab.lp_core import LpVector, PartitionMap, make_equal_grid, weighted_norm
from narrowlab.norm_engine import brute_force_norm, min_modulus, op_norm_p
from narrowlab.operator_zoo import (KERNELS, OperatorMatrix, conditional_expectation, identity,
                                    kernel_operator, mean_operator)
from narrowlab.sign_lab import find_mean_zero_sign, lemma1_witness, narrowness_profile
from narrowlab.verify import convergence_passed, convergence_run, daugavet_check, theorem_check

ZOO = "mean,condexp:m=2,condexp:m=4,condexp:m=8,kernel:st,kernel:exp,rankone:ones"


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {num} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def dense_scan(p, step=1e-6):
    a = np.linspace(0.0, 0.5, int(round(0.5 / step)) + 1)
    b = 1.0 - a
    f = (a ** (p - 1) + b ** (p - 1)) ** (1 / p) * (a ** (1 / (p - 1)) + b ** (1 / (p - 1))) ** (1 - 1 / p)
    return f.max()


def test_criterion_1_cp_values(report):
    errs = {}
    ok = cp_constant(1).value == 2.0 and abs(cp_constant(2).value - 1.0) <= 1e-12
    for p in (1.2, 1.5, 3, 6):
        errs[p] = abs(cp_constant(p).value - dense_scan(p))
        ok &= errs[p] <= 1e-9
    dual = max(abs(cp_constant(p).value - cp_constant(p / (p - 1)).value) for p in (1.2, 1.5, 3, 6))
    ok &= dual <= 1e-10
    report(1, ok, f"max scan error {max(errs.values()):.2e}, max duality error {dual:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_2_convergence(report):
    rows = convergence_run([1.5, 2, 3], range(1, 11), seed=0, threshold=1e-2)
    final = {r["p"]: r["gap"] for r in rows if r["n"] == 1024}
    ok = convergence_passed(rows) and all(abs(g) <= 1e-2 for g in final.values())
    report(2, ok, "gap at n=1024: " + ", ".join(f"p={p:g} {g:.2e}" for p, g in final.items()))
    assert ok


@pytest.mark.slow
def test_criterion_3_theorem_sweep(report):
    rows = theorem_check(ZOO, [1, 1.5, 2, 3], [0, 0.5, 1, 1 + 0.5j], 256, seed=0)
    failing = [r for r in rows if not r.passed]
    eq = [r for r in rows if r.operator_label == "mean" and r.gamma == 1]
    eq_err = max(abs(r.margin) for r in eq)
    ok = len(rows) == 112 and not failing and eq_err <= 0.02
    worst = min(r.margin + r.tolerance for r in rows)
    report(3, ok, f"{len(rows)} rows, {len(failing)} failing, min slack {worst:.4f}, "
                  f"equality |margin| {eq_err:.2e}")
    assert ok


def test_criterion_4_daugavet(report):
    rows = daugavet_check([4], [0.5, 1.0], [16, 256, 1024])
    err = max(abs(r["discrepancy"] - 2 * r["c"] * 4 / r["n"]) for r in rows)
    ok = err <= 1e-12 and all(r["pass"] for r in rows)
    report(4, ok, f"max |discrepancy - 2cm/n| = {err:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_5_solver_oracles(report):
    rng = np.random.default_rng(2024)
    g = make_equal_grid(4)
    exact_err, heur_err = 0.0, 0.0
    for i in range(50):
        M = rng.standard_normal((4, 4))
        T = OperatorMatrix(g, M, f"rand{i}")
        # equal weights: the weighted norms reduce to plain matrix norms
        Minv = np.linalg.inv(M)
        sv = np.linalg.svd(M, compute_uv=False)
        oracles = {
            (1, "max"): np.abs(M).sum(axis=0).max(),
            (1, "min"): 1.0 / np.abs(Minv).sum(axis=0).max(),
            (2, "max"): sv[0],
            (2, "min"): sv[-1],
        }
        for (p, mode), ref in oracles.items():
            f = op_norm_p if mode == "max" else min_modulus
            exact_err = max(exact_err, abs(f(T, p, seed=i).value - ref))
        for p in (1.5, 3):
            heur_err = max(heur_err,
                           abs(op_norm_p(T, p, seed=i).value - brute_force_norm(T, p, "max").value),
                           abs(min_modulus(T, p, seed=i).value - brute_force_norm(T, p, "min").value))
    ok = exact_err <= 1e-8 and heur_err <= 1e-3
    report(5, ok, f"exact-route error {exact_err:.2e}, heuristic vs brute force {heur_err:.2e}")
    assert ok


def test_criterion_6_sign_machinery(report):
    g16 = make_equal_grid(16)
    ex = [
        find_mean_zero_sign(mean_operator(g16), range(16), 2).value == 0.0,
        find_mean_zero_sign(identity(g16), range(4), 3).value == (4 / 16) ** (1 / 3),
        find_mean_zero_sign(conditional_expectation(PartitionMap.contiguous(g16, 4)),
                            range(4, 8), 2).value == 0.0,
    ]
    slack = -np.inf
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.choice([8, 12, 16]))
        m = int(rng.choice([1, 2, 4]))
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        grid = make_equal_grid(n)
        T = OperatorMatrix(grid, rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), "r")
        mult = LpVector(grid, rng.uniform(-2, 2, n))
        wit = lemma1_witness(T, mult, PartitionMap.contiguous(grid, m), range(n), p, seed=seed,
                             eta=1 / n)
        h = wit.sign.values.astype(float)
        measured = weighted_norm(T.entries @ (mult.coeffs * h), grid.weights, p)
        slack = max(slack, measured - wit.bound, wit.value - wit.bound)
    st = narrowness_profile(lambda n: kernel_operator(make_equal_grid(n), KERNELS["st"]),
                            [4, 16], 2, rule="left-half")
    ident = narrowness_profile(lambda n: identity(make_equal_grid(n)), [4, 8, 16], 2)
    ok = (all(ex) and slack <= 1e-12 and st[1].best_value < st[0].best_value
          and all(abs(r.best_value - 1.0) <= 1e-15 for r in ident))
    report(6, ok, f"examples {sum(ex)}/3, worst value - bound {slack:.2e}, "
                  f"st profile {st[0].best_value:.4f} -> {st[1].best_value:.4f}")
    assert ok


COMMANDS = [
    ["cp-table", "--p", "1,1.2,1.5,2,3,6"],
    ["norm", "--n", "32", "--p", "1,1.5,2,3", "--restarts", "8"],
    ["minmod", "--n", "32", "--p", "1,1.5,2,3", "--restarts", "8"],
    ["verify-theorem", "--n", "32", "--restarts", "8", "--format", "json"],
    ["daugavet", "--n", "16,256,1024", "--scales", "0.5,1"],
    ["narrowness", "--zoo", "identity,kernel:st,kernel:exp", "--levels", "2,3,4,5", "--p", "3",
     "--budget", "5000"],
    ["convergence", "--p", "1.5,3", "--levels", "1,2,3,4,5,6", "--restarts", "8"],
]


def _digest(argv):
    res = subprocess.run([sys.executable, "-m", "narrowlab", *argv, "--seed", "11"],
                         capture_output=True, check=False)
    return res.returncode, hashlib.sha256(res.stdout).hexdigest()


def test_criterion_7_determinism(report):
    mismatched = []
    for argv in COMMANDS:
        a, b = _digest(argv), _digest(argv)
        if a != b or a[0] == 2:
            mismatched.append(argv[0])
    ok = not mismatched
    report(7, ok, f"{len(COMMANDS)} commands rerun, mismatches: {mismatched or 'none'}")
    assert ok
