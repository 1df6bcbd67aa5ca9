import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbath.bath import (
    MAX_ENUMERATED_SPINS,
    CapacityError,
    DiagonalDistribution,
    check_capacity,
    configurations,
)


def test_configurations_first_spin_is_most_significant():
    bits = configurations(3)
    assert bits.shape == (8, 3)
    np.testing.assert_array_equal(bits[1], [0, 0, 1])
    np.testing.assert_array_equal(bits[4], [1, 0, 0])


def test_configuration_blocks_concatenate():
    full = configurations(6)
    np.testing.assert_array_equal(np.concatenate([configurations(6, 0, 20), configurations(6, 20)]), full)


def test_capacity():
    check_capacity(MAX_ENUMERATED_SPINS)
    with pytest.raises(CapacityError):
        check_capacity(MAX_ENUMERATED_SPINS + 1)


def test_uniform():
    d = DiagonalDistribution.uniform(4)
    assert d.is_uniform and d.is_product
    np.testing.assert_allclose(d.probabilities(), np.full(16, 1 / 16))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=8))
def test_product_matches_explicit_enumeration(marginals):
    d = DiagonalDistribution.product(marginals)
    bits = configurations(len(marginals)).astype(float)
    f = np.array(marginals)
    expected = np.prod(np.where(bits == 1, f, 1 - f), axis=1)
    np.testing.assert_allclose(d.probabilities(), expected, atol=1e-15)
    np.testing.assert_allclose(d.probabilities(1, len(expected)), expected[1:], atol=1e-15)


def test_explicit_validation():
    with pytest.raises(ValueError):
        DiagonalDistribution.explicit([0.5, 0.6])
    with pytest.raises(ValueError):
        DiagonalDistribution.explicit([1.5, -0.5])
    with pytest.raises(ValueError):
        DiagonalDistribution(2, table=np.ones(3) / 3)


def test_point():
    d = DiagonalDistribution.point(3, 5)
    assert d.probabilities()[5] == 1.0
    assert not d.is_product
    with pytest.raises(ValueError):
        d.excitation_probabilities()
