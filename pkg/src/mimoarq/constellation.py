"""Discrete input constellations and joint transmit-vector alphabets.

All generated constellations have unit average symbol energy, so the
per-receive-antenna SNR equals the transmit power parameter directly.
Point ordering is fixed and deterministic: diversity and outage results
depend only on the point set, but reproducible enumeration keeps tables
and seeds stable across runs.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityExceededError

ENERGY_TOL = 1e-12
JOINT_ALPHABET_LIMIT = 2 ** 16


@dataclass(frozen=True)
class Constellation:
    """An ordered complex signal set of size ``2**bits_per_symbol``."""

    name: str
    points: np.ndarray  # complex128, unit average energy
    bits_per_symbol: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size != 2 ** self.bits_per_symbol:
            raise ValueError(
                f"expected {2 ** self.bits_per_symbol} points, got {pts.size}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("constellation points must be finite")
        if len(set(pts.tolist())) != pts.size:
            raise ValueError("constellation points must be distinct")
        energy = float(np.mean(np.abs(pts) ** 2))
        if abs(energy - 1.0) > ENERGY_TOL:
            raise ValueError(f"unit-energy violation: mean |x|^2 = {energy!r}")

    @property
    def size(self) -> int:
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, Constellation):
            return NotImplemented
        return (
            self.name == other.name
            and self.bits_per_symbol == other.bits_per_symbol
            and np.array_equal(self.points, other.points)
        )

    def __hash__(self):
        return hash((self.name, self.bits_per_symbol, self.points.tobytes()))


def make_qam(m: int) -> Constellation:
    """Square 2^m-QAM on the odd-integer grid, scaled to unit energy.

    Points are ordered row-major by grid coordinate (imaginary part
    descending, then real ascending), so the scale factor is the only
    non-integer arithmetic involved.
    """
    if m not in (2, 4, 6, 8):
        raise ValueError(f"QAM requires even m in {{2,4,6,8}}, got {m}")
    side = 2 ** (m // 2)
    coords = np.arange(-(side - 1), side, 2, dtype=np.float64)
    re, im = np.meshgrid(coords, coords[::-1])
    raw = (re + 1j * im).ravel()
    scale = np.sqrt(np.mean(np.abs(raw) ** 2))
    return Constellation(name=f"qam{2 ** m}", points=raw / scale, bits_per_symbol=m)


def make_psk(m: int) -> Constellation:
    """2^m-PSK: equally spaced unit-circle points, first at angle 0."""
    if m not in (1, 2, 3):
        raise ValueError(f"PSK supports m in {{1,2,3}}, got {m}")
    n = 2 ** m
    pts = np.exp(2j * np.pi * np.arange(n) / n)
    name = {1: "bpsk", 2: "qpsk", 3: "psk8"}[m]
    return Constellation(name=name, points=pts, bits_per_symbol=m)


def joint_alphabet(c: Constellation, n_t: int) -> np.ndarray:
    """All 2^(M*n_t) transmit vectors, lexicographic in per-antenna index.

    Returns an array of shape (2^(M*n_t), n_t); antenna 0 is the slowest
    varying index.  Sizes above 2^16 are refused rather than truncated:
    the MI kernel enumerates this alphabet in full.
    """
    if n_t < 1:
        raise ValueError(f"n_t must be >= 1, got {n_t}")
    total_bits = c.bits_per_symbol * n_t
    if 2 ** total_bits > JOINT_ALPHABET_LIMIT:
        raise CapacityExceededError(
            f"joint alphabet 2^{total_bits} exceeds limit 2^16 "
            f"(constellation {c.name}, n_t={n_t})"
        )
    q = c.size
    idx = np.indices((q,) * n_t).reshape(n_t, -1).T  # lexicographic
    return c.points[idx]


_NAMED = {
    "bpsk": lambda: make_psk(1),
    "qpsk": lambda: make_psk(2),
    "psk4": lambda: make_psk(2),
    "psk8": lambda: make_psk(3),
    "qam4": lambda: make_qam(2),
    "qam16": lambda: make_qam(4),
    "qam64": lambda: make_qam(6),
    "qam256": lambda: make_qam(8),
}


def from_name(name: str) -> Constellation:
    """Look up a constellation by config-file name (e.g. ``"qam16"``)."""
    key = name.strip().lower()
    if key not in _NAMED:
        raise ValueError(
            f"unknown constellation {name!r}; known: {sorted(_NAMED)}"
        )
    return _NAMED[key]()


def load_points_csv(path) -> Constellation:
    """Load a custom constellation from a CSV of (re, im) rows.

    The point set is normalized to unit average energy on load.  The
    size must be a power of two; the name embeds a content hash so MI
    tables built from different point sets never collide in the cache.
    """
    raw = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: expected 2 columns, got {len(row)}")
            raw.append(complex(float(row[0]), float(row[1])))
    n = len(raw)
    if n < 2 or n & (n - 1):
        raise ValueError(f"{path}: point count {n} is not a power of two >= 2")
    pts = np.asarray(raw, dtype=np.complex128)
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    digest = hashlib.sha256(pts.tobytes()).hexdigest()[:8]
    return Constellation(
        name=f"custom-{digest}", points=pts, bits_per_symbol=n.bit_length() - 1
    )
