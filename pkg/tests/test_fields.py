import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pinncert.fields import GridMismatchError, NormKind, SampledField, SpatialGrid, kg_energy_norm, l2_norm, reference_error, state_norm

UNIT = SpatialGrid((0.0,), (1.0,), (201,))


def field(grid, fn):
    return SampledField(grid, np.atleast_2d(fn(grid.nodes())).reshape(grid.size, -1))


def test_grid_spacing_consistent():
    g = SpatialGrid((-2.0, 0.0), (2.0, math.pi), (101, 51))
    for h, n, a, b in zip(g.spacing, g.counts, g.lower, g.upper):
        assert h * (n - 1) == pytest.approx(b - a, rel=1e-12)
    assert g.nodes().shape == (101 * 51, 2)
    assert g.weights().sum() == pytest.approx(g.volume, rel=1e-12)


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        SpatialGrid((0.0,), (1.0,), (1,))
    with pytest.raises(ValueError):
        SpatialGrid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (3, 3, 3))


def test_field_length_checked():
    with pytest.raises(ValueError):
        SampledField(UNIT, np.zeros((10, 1)))


def test_l2_examples():
    assert l2_norm(field(UNIT, lambda x: 0 * x)) == 0.0
    for n in (2, 7, 201):
        g = SpatialGrid((0.0,), (1.0,), (n,))
        assert l2_norm(field(g, lambda x: 1 + 0 * x)) == pytest.approx(1.0, rel=1e-14)
    assert l2_norm(field(UNIT, lambda x: np.sin(math.pi * x))) == pytest.approx(1 / math.sqrt(2), abs=1e-4)


def test_energy_examples():
    zero = field(UNIT, lambda x: 0 * x)
    const2 = field(UNIT, lambda x: 2 + 0 * x)
    one = field(UNIT, lambda x: 1 + 0 * x)
    assert kg_energy_norm(zero, zero, zero) == 0.0
    assert kg_energy_norm(const2, zero, zero) == pytest.approx(1.0, rel=1e-14)
    assert kg_energy_norm(zero, zero, one) == pytest.approx(1.0, rel=1e-14)


def test_energy_requires_gradients():
    f = SampledField(UNIT, np.ones((UNIT.size, 2)))
    with pytest.raises(ValueError):
        state_norm(f, NormKind.KG_ENERGY)
    with pytest.raises(ValueError):
        state_norm(SampledField(UNIT, np.ones((UNIT.size, 1)), np.zeros((UNIT.size, 1, 1))), NormKind.KG_ENERGY)


def test_reference_error_examples():
    u = field(UNIT, lambda x: np.cos(3 * x))
    assert reference_error(u, u) == 0.0
    pert = field(UNIT, lambda x: np.cos(3 * x) + 0.01 * np.sin(math.pi * x))
    assert reference_error(pert, u) == pytest.approx(7.071e-3, abs=1e-5)
    shifted = field(UNIT, lambda x: np.cos(3 * x) - 0.3)
    assert reference_error(shifted, u) == pytest.approx(0.3, rel=1e-12)


def test_reference_error_grid_mismatch():
    other = SpatialGrid((0.0,), (1.0,), (101,))
    with pytest.raises(GridMismatchError):
        reference_error(field(UNIT, np.sin), field(other, np.sin))


def test_refinement_convergence():
    errs = []
    for n in (11, 21, 41, 81, 161):
        g = SpatialGrid((0.0,), (1.0,), (n,))
        errs.append(abs(l2_norm(field(g, lambda x: x)) - 1 / math.sqrt(3)))
    for a, b in zip(errs, errs[1:]):
        assert a / b >= 3.5


values = arrays(np.float64, (21, 2), elements=st.floats(-1e3, 1e3))
SMALL = SpatialGrid((0.0, -1.0), (2.0, 1.0), (7, 3))


@settings(max_examples=100, deadline=None)
@given(values, st.floats(-1e3, 1e3))
def test_scaling(v, c):
    f = SampledField(SMALL, v)
    assert l2_norm(SampledField(SMALL, c * v)) == pytest.approx(abs(c) * l2_norm(f), rel=1e-13, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(values, values)
def test_triangle(a, b):
    fa, fb = SampledField(SMALL, a), SampledField(SMALL, b)
    assert l2_norm(SampledField(SMALL, a + b)) <= l2_norm(fa) + l2_norm(fb) + 1e-12
