import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from narrowlab.lp_core import (Exponent, Grid, LpVector, PartitionMap, embed, lp_norm,
                               make_equal_grid, refinement_map_for, simple_approximation)


def random_vector(grid, rng):
    return LpVector(grid, rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n))


def random_grid(n, rng):
    w = rng.uniform(0.1, 1.0, n)
    w[-1] = 0.0
    w[:-1] /= w[:-1].sum() / 0.9
    w[-1] = 1.0 - w[:-1].sum()
    return Grid(w)


@pytest.mark.parametrize("p", [0.5, 0.999, math.inf, math.nan])
def test_exponent_rejects_out_of_range(p):
    with pytest.raises(ValueError):
        Exponent(p)


def test_exponent_dual():
    assert Exponent(2).dual == 2.0
    assert Exponent(3).dual == pytest.approx(1.5)
    assert math.isinf(Exponent(1).dual)


def test_make_equal_grid():
    assert make_equal_grid(1).weights.tolist() == [1.0]
    assert make_equal_grid(4).weights.tolist() == [0.25] * 4
    assert abs(make_equal_grid(3).weights.sum() - 1.0) <= 1e-12
    with pytest.raises(ValueError):
        make_equal_grid(0)


def test_grid_rejects_bad_weights():
    with pytest.raises(ValueError):
        Grid([0.5, 0.6])
    with pytest.raises(ValueError):
        Grid([1.0, 0.0])
    with pytest.raises(ValueError):
        Grid([])


def test_grid_is_immutable():
    g = make_equal_grid(4)
    with pytest.raises(ValueError):
        g.weights[0] = 1.0


def test_vector_length_checked():
    with pytest.raises(ValueError):
        LpVector(make_equal_grid(3), [1, 2])


@pytest.mark.parametrize("p", [1, 1.5, 2, 3, 7])
@pytest.mark.parametrize("n", [1, 5, 16])
def test_norm_of_ones(p, n):
    assert lp_norm(LpVector.ones(make_equal_grid(n)), p) == pytest.approx(1.0, abs=1e-14)


def test_norm_of_constant_and_indicator():
    g = make_equal_grid(8)
    assert lp_norm((2 - 3j) * LpVector.ones(g), 2) == pytest.approx(abs(2 - 3j))
    assert lp_norm(LpVector.indicator(g, [0, 5]), 2) == pytest.approx(0.5)


def test_norm_zero_iff_zero():
    g = make_equal_grid(6)
    assert lp_norm(LpVector(g, np.zeros(6)), 3) == 0.0
    assert lp_norm(LpVector.indicator(g, [2]), 3) > 0


def test_norm_large_p_does_not_overflow():
    g = make_equal_grid(4)
    v = LpVector(g, [1e200, 1, 0, 0])
    assert lp_norm(v, 50) == pytest.approx(1e200 * 0.25 ** (1 / 50), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.0, 1.3, 2.0, 3.0, 6.0]),
       n=st.integers(1, 12))
def test_norm_properties(seed, p, n):
    rng = np.random.default_rng(seed)
    g = random_grid(n, rng)
    v, w = random_vector(g, rng), random_vector(g, rng)
    c = complex(*rng.standard_normal(2))
    assert abs(lp_norm(c * v, p) - abs(c) * lp_norm(v, p)) <= 1e-12 * max(1, lp_norm(v, p))
    assert lp_norm(v + w, p) <= lp_norm(v, p) + lp_norm(w, p) + 1e-12
    # probability grids: the norm grows with p
    assert lp_norm(v, p) <= lp_norm(v, p + 0.7) + 1e-12


def test_partition_validation():
    g = make_equal_grid(4)
    with pytest.raises(ValueError):
        PartitionMap(g, [0, 0, 2, 2])  # block 1 empty
    with pytest.raises(ValueError):
        PartitionMap(g, [0, 1])
    P = PartitionMap.contiguous(g, 2)
    assert P.block_of.tolist() == [0, 0, 1, 1]
    assert P.block_weights.tolist() == [0.5, 0.5]


def test_simple_approximation_examples():
    g = make_equal_grid(8)
    c = LpVector(g, np.full(8, 3 - 1j))
    assert np.array_equal(simple_approximation(c, PartitionMap.contiguous(g, 2)).coeffs, c.coeffs)
    rng = np.random.default_rng(1)
    v = random_vector(g, rng)
    assert np.allclose(simple_approximation(v, PartitionMap.singletons(g)).coeffs, v.coeffs,
                       atol=1e-15)


def test_simple_approximation_ramp():
    # oracle: explicit loop over blocks, mean and residual evaluated directly
    n, m = 16, 4
    g = make_equal_grid(n)
    ramp = [i / n for i in range(n)]
    expected = []
    for k in range(m):
        block = ramp[4 * k:4 * k + 4]
        expected += [sum(block) / 4] * 4
    h = simple_approximation(LpVector.ramp(g), PartitionMap.contiguous(g, m))
    assert np.allclose(h.coeffs, expected, atol=1e-15)
    for p in (1.0, 2.0, 3.0):
        resid = sum((1 / n) * abs(ramp[i] - expected[i]) ** p for i in range(n)) ** (1 / p)
        assert lp_norm(LpVector.ramp(g) - h, p) == pytest.approx(resid, abs=1e-15)
    # block means (4k + 1.5)/16 leave offsets +-0.5/16 and +-1.5/16
    assert lp_norm(LpVector.ramp(g) - h, 2) == pytest.approx(math.sqrt(1.25 / 256), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.0, 1.5, 2.0, 4.0]))
def test_simple_approximation_idempotent_and_contractive(seed, p):
    rng = np.random.default_rng(seed)
    g = random_grid(10, rng)
    part = PartitionMap(g, rng.permutation(np.arange(10) % 3))
    v = random_vector(g, rng)
    once = simple_approximation(v, part)
    twice = simple_approximation(once, part)
    assert np.max(np.abs(once.coeffs - twice.coeffs)) <= 1e-14
    assert lp_norm(once, p) <= lp_norm(v, p) + 1e-12


def test_embed_identity_and_constants():
    g4, g8 = make_equal_grid(4), make_equal_grid(8)
    rng = np.random.default_rng(2)
    v = random_vector(g4, rng)
    assert np.array_equal(embed(v, g4, g4).coeffs, v.coeffs)
    ones = embed(LpVector.ones(g4), g4, g8)
    assert np.array_equal(ones.coeffs, np.ones(8))
    assert refinement_map_for(g4, g8).tolist() == [0, 0, 1, 1, 2, 2, 3, 3]


@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
def test_embed_preserves_norm(p):
    rng = np.random.default_rng(3)
    for _ in range(10):
        v = random_vector(make_equal_grid(8), rng)
        e = embed(v, v.grid, make_equal_grid(64))
        assert abs(lp_norm(e, p) - lp_norm(v, p)) <= 1e-12


def test_embed_rejects_inconsistent_weights():
    g4, g8 = make_equal_grid(4), make_equal_grid(8)
    v = LpVector.ones(g4)
    with pytest.raises(ValueError):
        embed(v, g4, g8, [0, 0, 0, 1, 2, 2, 3, 3])
