"""Mutual information of discrete-input MIMO AWGN blocks.

block_mi/round_mi are Monte-Carlo estimators over the noise (the input
alphabet is enumerated exactly); scalar_mi_quadrature is a deterministic
Gauss-Hermite oracle for single-antenna channels.  build_mi_table samples
the per-round MI distribution over an SNR grid and persists it as an
empirical CDF table used by the power-allocation bounds.

All SNRs are linear per-receive-antenna values; MI is in bits per channel
use.  Noise is unit-variance circular complex Gaussian, fading entries
likewise, matching y = sqrt(snr/N_t) H x + w.
"""

from __future__ import annotations

import functools
import math
import os
from bisect import bisect_left
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from hashlib import sha256

import numpy as np

from . import kernels
from .constellation import Constellation, from_name, joint_alphabet
from .errors import SnrOutOfRangeError

_LN2 = math.log(2.0)
_CAP_TOL = 1e-9
CHUNK_SAMPLES = 512  # table-build work unit; fixed so worker count cannot matter

# A fading block is a plain (n_r, n_t) complex ndarray of unit-variance
# Rayleigh entries; no wrapper type.
FadingBlock = np.ndarray


class MiSample(float):
    """MI value in bpcu carrying the estimator's standard error."""

    __slots__ = ("std_err",)

    def __new__(cls, value, std_err=0.0):
        obj = super().__new__(cls, value)
        obj.std_err = float(std_err)
        return obj

    def __reduce__(self):
        return (MiSample, (float(self), self.std_err))


def draw_fading(rng, n_r: int, n_t: int, count: int = 1):
    """count iid fading blocks, stacked (count, n_r, n_t)."""
    shape = (count, n_r, n_t)
    return math.sqrt(0.5) * (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )


@functools.lru_cache(maxsize=32)
def _joint(c: Constellation, n_t: int):
    x = joint_alphabet(c, n_t)
    x.setflags(write=False)
    return x


def _finish(per_draw, cap: float) -> MiSample:
    value = float(per_draw.mean())
    if value > cap * (1.0 + _CAP_TOL):
        raise AssertionError(f"MI estimate {value} above entropy cap {cap}")
    n = per_draw.size
    se = float(per_draw.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    # negative excursions at low SNR are estimator noise; clamp into range
    return MiSample(min(max(value, 0.0), cap), se)


def _validate_blocks(blocks, snr, noise_draws):
    blocks = np.ascontiguousarray(blocks, dtype=np.complex128)
    if blocks.ndim != 3:
        raise ValueError("blocks must be (B, n_r, n_t)")
    if not np.isfinite(blocks).all():
        raise ValueError("non-finite channel gains")
    if snr < 0:
        raise ValueError("snr must be >= 0")
    if noise_draws < 1:
        raise ValueError("noise_draws must be >= 1")
    return blocks


def round_mi(c: Constellation, blocks, snr, noise_draws=32, rng=None) -> MiSample:
    """Average MI of B fading blocks at the given power, one estimate.

    The per-noise-draw gap terms of all blocks share draw indices, so the
    standard error is computed from the D per-draw round values.
    """
    blocks = _validate_blocks(blocks, snr, noise_draws)
    rng = np.random.default_rng() if rng is None else rng
    n_blocks, n_r, n_t = blocks.shape
    cap = float(c.bits_per_symbol * n_t)
    if snr == 0:
        return MiSample(0.0, 0.0)
    x = _joint(c, n_t)
    a = math.sqrt(snr / n_t) * blocks
    u = np.ascontiguousarray(np.einsum("qt,brt->bqr", x, a))
    w = math.sqrt(0.5) * (
        rng.standard_normal((n_blocks, noise_draws, n_r))
        + 1j * rng.standard_normal((n_blocks, noise_draws, n_r))
    )
    out = np.empty((n_blocks, noise_draws))
    kernels.round_gap_terms(u, w, out)
    return _finish(cap - out.mean(axis=0), cap)


def block_mi(c: Constellation, h, snr, noise_draws=32, rng=None) -> MiSample:
    """MI of a single fading block; see round_mi."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError("fading block must be a (n_r, n_t) matrix")
    return round_mi(c, h[None, :, :], snr, noise_draws, rng)


def scalar_mi_quadrature(c: Constellation, gain, snr, nodes: int = 64) -> MiSample:
    """Deterministic single-antenna MI via 2-D tensor Gauss-Hermite.

    Oracle role: no sampling, so agreement with block_mi within its MC
    error bars validates the Monte-Carlo kernel.  Weights are normalized
    to sum to one, which makes snr=0 return exactly 0.
    """
    if nodes < 16:
        raise ValueError("nodes must be >= 16")
    if snr < 0:
        raise ValueError("snr must be >= 0")
    gain = complex(gain)
    if not (math.isfinite(gain.real) and math.isfinite(gain.imag)):
        raise ValueError("non-finite gain")
    if snr == 0:
        return MiSample(0.0, 0.0)
    t, wt = np.polynomial.hermite.hermgauss(nodes)
    w2 = np.outer(wt, wt)
    weights = (w2 / w2.sum()).ravel()
    # nodes map 1:1 to noise values: per-dim variance 1/2 and the
    # Gauss-Hermite change of variables sqrt(2 sigma^2) cancel exactly
    wgrid = (t[:, None] + 1j * t[None, :]).ravel()
    wconj = np.conj(wgrid)
    a = math.sqrt(snr) * gain
    x = c.points
    q = x.size
    acc = 0.0
    for i in range(q):
        dv = a * (x[i] - x)
        e = -(np.abs(dv) ** 2)[:, None] - 2.0 * np.real(dv[:, None] * wconj)
        mx = e.max(axis=0)
        lse = mx + np.log(np.exp(e - mx).sum(axis=0))
        acc += float(weights @ lse)
    cap = float(c.bits_per_symbol)
    value = cap - acc / (q * _LN2)
    if value > cap * (1.0 + _CAP_TOL):
        raise AssertionError(f"quadrature MI {value} above entropy cap {cap}")
    return MiSample(min(max(value, 0.0), cap), 0.0)


def table_header(constellation, m, n_t, n_r, b, n, seed, noise_draws,
                 snr_grid):
    """Header lines identifying a table; computable before building it."""
    grid = ",".join(format(float(s), ".17g") for s in snr_grid)
    return [
        "mimoarq-mi-table v1",
        f"constellation={constellation}",
        f"m={m}",
        f"nt={n_t}",
        f"nr={n_r}",
        f"b={b}",
        f"n={n}",
        f"seed={seed}",
        f"noise_draws={noise_draws}",
        f"grid={grid}",
    ]


def header_fingerprint(lines) -> str:
    return sha256("\n".join(lines).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MiCdfTable:
    """Sorted per-round MI samples over an ascending linear SNR grid."""

    constellation: str
    m: int
    n_t: int
    n_r: int
    b: int
    snr_grid: tuple
    samples: tuple  # one sorted float64 array per grid point
    n: int
    seed: int
    noise_draws: int

    def validate(self):
        g = self.snr_grid
        if len(g) == 0 or any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("snr_grid must be nonempty strictly ascending")
        if len(self.samples) != len(g):
            raise ValueError("one sample array required per grid point")
        cap = self.m * self.n_t
        for i, arr in enumerate(self.samples):
            if arr.shape != (self.n,):
                raise ValueError(f"grid point {i}: expected {self.n} samples")
            if np.any(np.diff(arr) < 0):
                raise ValueError(f"grid point {i}: samples not sorted")
            if arr[0] < 0 or arr[-1] > cap:
                raise ValueError(f"grid point {i}: sample outside [0, {cap}]")
        return self

    def header_lines(self):
        return table_header(self.constellation, self.m, self.n_t, self.n_r,
                            self.b, self.n, self.seed, self.noise_draws,
                            self.snr_grid)

    def fingerprint(self) -> str:
        return header_fingerprint(self.header_lines())

    def save(self, path):
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w") as fh:
            fh.write("\n".join(self.header_lines()) + "\n")
            for arr in self.samples:
                fh.write(",".join(format(v, ".17g") for v in arr) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "MiCdfTable":
        with open(path) as fh:
            magic = fh.readline().strip()
            if magic != "mimoarq-mi-table v1":
                raise ValueError(f"{path}: not a MI table file")
            head = {}
            for _ in range(9):
                key, _, val = fh.readline().strip().partition("=")
                head[key] = val
            rows = [
                np.array([float(v) for v in line.split(",")])
                for line in fh
                if line.strip()
            ]
        grid = tuple(float(v) for v in head["grid"].split(","))
        table = cls(
            constellation=head["constellation"],
            m=int(head["m"]),
            n_t=int(head["nt"]),
            n_r=int(head["nr"]),
            b=int(head["b"]),
            snr_grid=grid,
            samples=tuple(rows),
            n=int(head["n"]),
            seed=int(head["seed"]),
            noise_draws=int(head["noise_draws"]),
        )
        return table.validate()


def _table_chunk(args):
    c, n_t, n_r, b, snr, noise_draws, seed, gi, ci, count = args
    rng = np.random.default_rng(np.random.SeedSequence((seed, gi, ci)))
    vals = np.empty(count)
    for j in range(count):
        blocks = draw_fading(rng, n_r, n_t, b)
        vals[j] = round_mi(c, blocks, snr, noise_draws, rng)
    return vals


def build_mi_table(config, snr_grid, samples_per_point, noise_draws=32,
                   seed=0, workers=1) -> MiCdfTable:
    """Sample the round-MI distribution at each grid SNR.

    Work is split into fixed-size chunks, each seeded by the counter
    triple (seed, grid index, chunk index) and merged in chunk order, so
    the result is byte-identical for any worker count.
    """
    c = from_name(config.constellation) if isinstance(
        config.constellation, str) else config.constellation
    snr_grid = [float(s) for s in snr_grid]
    if not snr_grid or any(b_ <= a for a, b_ in zip(snr_grid, snr_grid[1:])):
        raise ValueError("snr_grid must be nonempty strictly ascending")
    if samples_per_point < 1000:
        raise ValueError("samples_per_point must be >= 1000")
    tasks = []
    for gi, snr in enumerate(snr_grid):
        done = 0
        ci = 0
        while done < samples_per_point:
            count = min(CHUNK_SAMPLES, samples_per_point - done)
            tasks.append((c, config.n_t, config.n_r, config.b, snr,
                          noise_draws, seed, gi, ci, count))
            done += count
            ci += 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_table_chunk, tasks, chunksize=1))
    else:
        chunks = [_table_chunk(t) for t in tasks]
    per_point = [[] for _ in snr_grid]
    for task, vals in zip(tasks, chunks):
        per_point[task[7]].append(vals)
    samples = tuple(np.sort(np.concatenate(parts)) for parts in per_point)
    table = MiCdfTable(
        constellation=c.name,
        m=c.bits_per_symbol,
        n_t=config.n_t,
        n_r=config.n_r,
        b=config.b,
        snr_grid=tuple(snr_grid),
        samples=samples,
        n=samples_per_point,
        seed=seed,
        noise_draws=noise_draws,
    )
    return table.validate()


def cdf_at(table: MiCdfTable, snr, threshold) -> float:
    """Pr[round MI <= threshold] at the given linear SNR.

    Exact at grid points; log-log interpolated between them (outage tails
    are locally power laws in SNR).  Probabilities are floored at
    1/(n+1): an n-sample CDF cannot certify anything smaller.
    """
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    g = table.snr_grid
    if not g[0] <= snr <= g[-1]:
        raise SnrOutOfRangeError(
            f"snr {snr} outside table grid [{g[0]}, {g[-1]}]"
        )
    floor = 1.0 / (table.n + 1)

    def level(i):
        count = int(np.searchsorted(table.samples[i], threshold, side="right"))
        return max(count / table.n, floor)

    pos = bisect_left(g, snr)
    if pos < len(g) and g[pos] == snr:
        return level(pos)
    lo, hi = pos - 1, pos
    if g[lo] <= 0:
        raise SnrOutOfRangeError("log interpolation needs positive grid SNRs")
    frac = (math.log(snr) - math.log(g[lo])) / (math.log(g[hi]) - math.log(g[lo]))
    return math.exp(
        (1.0 - frac) * math.log(level(lo)) + frac * math.log(level(hi))
    )
