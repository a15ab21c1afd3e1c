import numpy as np
import pytest

from mimoarq.constellation import (Constellation, from_name, joint_alphabet,
                                   load_points_csv, make_psk, make_qam)
from mimoarq.errors import CapacityExceededError


def test_named_sets_have_unit_energy():
    for name in ("bpsk", "qpsk", "psk8", "qam4", "qam16", "qam64", "qam256"):
        c = from_name(name)
        assert c.points.size == 2 ** c.bits_per_symbol
        assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12


def test_bpsk_is_antipodal():
    c = from_name("bpsk")
    assert np.allclose(sorted(c.points.tolist(), key=lambda z: z.real),
                       [-1.0, 1.0])


def test_psk_points_on_unit_circle():
    c = make_psk(3)
    assert np.allclose(np.abs(c.points), 1.0)
    assert len(set(np.round(c.points, 12).tolist())) == 8


def test_qam16_matches_factory():
    assert np.array_equal(from_name("qam16").points, make_qam(4).points)


def test_make_qam_rejects_odd_bit_counts():
    with pytest.raises(ValueError):
        make_qam(3)


def test_from_name_unknown():
    with pytest.raises(ValueError, match="qam13"):
        from_name("qam13")


def test_joint_alphabet_order_and_size():
    c = from_name("qpsk")
    x = joint_alphabet(c, 2)
    assert x.shape == (16, 2)
    # antenna 0 is the slow axis: row q0*4 + q1 pairs (points[q0], points[q1])
    for q0 in range(4):
        for q1 in range(4):
            row = x[q0 * 4 + q1]
            assert row[0] == c.points[q0] and row[1] == c.points[q1]


def test_joint_alphabet_size_cap():
    with pytest.raises(CapacityExceededError):
        joint_alphabet(from_name("qam256"), 3)


def test_constellation_validation():
    with pytest.raises(ValueError):
        Constellation("bad", np.array([1.0, -1.0, 1j]), 2)
    with pytest.raises(ValueError):
        Constellation("dup", np.array([1.0, 1.0]), 1)
    with pytest.raises(ValueError):
        Constellation("hot", np.array([2.0, -2.0]), 1)  # energy 4


def test_load_points_csv_roundtrip(tmp_path):
    c = from_name("qpsk")
    p = tmp_path / "pts.csv"
    p.write_text("\n".join(f"{float(z.real)!r},{float(z.imag)!r}"
                           for z in c.points))
    loaded = load_points_csv(str(p))
    assert np.allclose(loaded.points, c.points)
    assert loaded.bits_per_symbol == 2


def test_load_points_csv_normalizes_energy(tmp_path):
    p = tmp_path / "scaled.csv"
    p.write_text("3.0,0.0\n-3.0,0.0")
    loaded = load_points_csv(str(p))
    assert np.allclose(sorted(loaded.points.real), [-1.0, 1.0])


def test_load_points_csv_rejects_non_power_of_two(tmp_path):
    p = tmp_path / "three.csv"
    p.write_text("1.0,0.0\n-1.0,0.0\n0.0,1.0")
    with pytest.raises(ValueError):
        load_points_csv(str(p))
