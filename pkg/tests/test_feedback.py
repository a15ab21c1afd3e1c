"""Threshold design and feedback quantization.

The reference threshold triple set for the SISO scenario (B=2, 16-QAM,
R=3.5, K=4, L=2) is frozen here; all values are exactly representable
binary floats, so equality is exact.
"""

from fractions import Fraction

import pytest

from mimoarq import ChannelConfig
from mimoarq.errors import DesignInfeasibleError, ProtocolViolationError
from mimoarq.feedback import (ThresholdTree, canonical_grid_tree,
                              design_thresholds, quantize)

REFERENCE_ROWS = {
    (0,): (0.0, 2.0, 2.75),
    (1,): (2.0, 2.5, 3.0),
    (2,): (2.75, 3.0, 3.25),
}


@pytest.fixture(scope="module")
def siso_tree():
    ch = ChannelConfig(n_t=1, n_r=1, b=2, constellation="qam16",
                       rate=Fraction(7, 2), delay=2, feedback_levels=4)
    return design_thresholds(ch)


def test_reference_threshold_rows(siso_tree):
    assert siso_tree.branches[()] == (0.0, 2.0, 2.75)
    for key, rows in REFERENCE_ROWS.items():
        assert siso_tree.branches[key] == rows


def test_tree_shape(siso_tree):
    # depth-2 tree: root plus one branch per non-ACK level
    assert set(siso_tree.branches) == {(), (0,), (1,), (2,)}
    assert siso_tree.vectors() == [(), (0,), (1,), (2,)]
    assert siso_tree.feedback_levels == 4
    assert siso_tree.rate == 3.5


def test_entry_thresholds(siso_tree):
    assert siso_tree.entry(()) == 0.0
    assert siso_tree.entry((0,)) == 0.0
    assert siso_tree.entry((1,)) == 2.0
    assert siso_tree.entry((2,)) == 2.75


def test_branch_floor_equals_entry(siso_tree):
    for key in ((0,), (1,), (2,)):
        assert siso_tree.branches[key][0] == siso_tree.entry(key)


def test_jsonable_roundtrip(siso_tree):
    clone = ThresholdTree.from_jsonable(siso_tree.to_jsonable())
    assert clone == siso_tree


def test_from_jsonable_validates_order(siso_tree):
    obj = siso_tree.to_jsonable()
    obj["branches"][""] = [0.0, 2.75, 2.0]
    with pytest.raises(DesignInfeasibleError):
        ThresholdTree.from_jsonable(obj)


def test_canonical_grid_tree_shared_anchors():
    ch = ChannelConfig(n_t=1, n_r=1, b=2, constellation="qam16",
                       rate=Fraction(7, 2), delay=2, feedback_levels=4)
    tree = canonical_grid_tree(ch)
    # grid anchors below R=3.5 with spacing M/B=2: {0, 2}; K follows
    assert tree.feedback_levels == 3
    assert all(ths == (0.0, 2.0) for ths in tree.branches.values())
    assert not tree.nested


def test_quantize_cells(siso_tree):
    assert quantize(siso_tree, (), 1.0) == 0
    assert quantize(siso_tree, (), 2.0) == 1
    assert quantize(siso_tree, (), 2.74) == 1
    assert quantize(siso_tree, (), 2.75) == 2
    assert quantize(siso_tree, (), 3.49) == 2
    assert quantize(siso_tree, (), 3.5) == 3  # ACK index = K-1
    assert quantize(siso_tree, (), 5.0) == 3


def test_quantize_strict_mode(siso_tree):
    assert quantize(siso_tree, (), 3.5, mode="strict") == 2
    assert quantize(siso_tree, (), 3.5 + 1e-9, mode="strict") == 3
    with pytest.raises(ValueError):
        quantize(siso_tree, (), 3.5, mode="maybe")


def test_quantize_on_child_branch(siso_tree):
    assert quantize(siso_tree, (1,), 2.2) == 0
    assert quantize(siso_tree, (1,), 2.6) == 1
    assert quantize(siso_tree, (1,), 3.1) == 2


def test_quantize_floor_tolerance(siso_tree):
    # tiny negative drift below the branch floor snaps up; gross violation
    # is a protocol error
    assert quantize(siso_tree, (1,), 2.0 - 1e-13) == 0
    with pytest.raises(ProtocolViolationError):
        quantize(siso_tree, (1,), 1.5)


def test_design_rejects_bad_level_count():
    ch = ChannelConfig(n_t=1, n_r=1, b=2, constellation="qam16",
                       rate=Fraction(7, 2), delay=2, feedback_levels=4)
    bad = ThresholdTree(rate=3.5, feedback_levels=4, delay=1,
                        branches={(): (0.0, 2.0)})
    with pytest.raises(DesignInfeasibleError):
        ThresholdTree.from_jsonable(bad.to_jsonable())


def test_design_properties_hold_elsewhere():
    # no frozen rows for the 2x1 scenario; check the structural contract
    ch = ChannelConfig(n_t=2, n_r=1, b=1, constellation="qam16",
                       rate=Fraction(15, 2), delay=2, feedback_levels=3)
    tree = design_thresholds(ch)
    for key, ths in tree.branches.items():
        assert len(ths) == 2
        assert all(0.0 <= t < 7.5 for t in ths)
        assert ths[0] < ths[1]
        if key:
            assert ths[0] == tree.entry(key)
