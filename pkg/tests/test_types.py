import numpy as np
import pytest

from igamg.errors import ArgumentError
from igamg.types import SequenceWindow


def test_window():
    window = SequenceWindow.create_empty()
    assert len(window) == 0
    for j in range(4):
        window.append(np.array([2.0**-j, 0.0]))
    window.validate()

    assert len(window) == 4
    assert window.q == 2
    assert window.dim == 2
    np.testing.assert_equal(window.first, [1.0, 0.0])
    np.testing.assert_equal(window.last, [0.125, 0.0])

    diffs = window.differences()
    assert diffs.shape == (2, 3)
    np.testing.assert_almost_equal(diffs[0], [-0.5, -0.25, -0.125])
    np.testing.assert_almost_equal(diffs[1], [0.0, 0.0, 0.0])

    second = window.second_differences()
    assert second.shape == (2, 2)
    np.testing.assert_almost_equal(second[0], [0.25, 0.125])

    shifted = window.translated(np.array([1.0, -1.0]))
    np.testing.assert_almost_equal(shifted.differences(), diffs)
    np.testing.assert_equal(shifted.first, [2.0, -1.0])
    assert "q=2" in str(window)


def test_window_rejects_bad_iterates():
    with pytest.raises(ArgumentError):
        SequenceWindow.from_iterates([np.zeros((2, 2))] * 3)
    with pytest.raises(ArgumentError):
        SequenceWindow.from_iterates([np.zeros(2), np.array([np.nan, 0.0]), np.zeros(2)])
