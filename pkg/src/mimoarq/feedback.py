"""Multi-level feedback threshold trees for INR-ARQ.

A tree maps each non-ACK feedback history f to the ascending thresholds
that quantize the accumulated mutual information observed after the next
round.  Index K-1 is ACK.  Construction is exact rational arithmetic;
trees expose floats.
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from .diversity import as_rate, _snap
from .errors import DesignInfeasibleError, ProtocolViolationError

ACK_MODES = ("geq", "strict")
REL_TOL = 1e-12


class FeedbackVector:
    """Validated feedback history [k_1, ..., k_l].

    Entries lie in 0..K-1 and ACK (K-1) may only appear last.
    """

    __slots__ = ("indices", "feedback_levels")

    def __init__(self, indices, feedback_levels: int):
        indices = tuple(int(k) for k in indices)
        ack = feedback_levels - 1
        for pos, k in enumerate(indices):
            if not 0 <= k <= ack:
                raise ValueError(f"feedback index {k} outside 0..{ack}")
            if k == ack and pos != len(indices) - 1:
                raise ValueError("ACK terminates a feedback vector")
        self.indices = indices
        self.feedback_levels = feedback_levels

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __repr__(self):
        return f"FeedbackVector({list(self.indices)}, K={self.feedback_levels})"

    @property
    def acked(self) -> bool:
        return bool(self.indices) and self.indices[-1] == self.feedback_levels - 1


def _as_key(f) -> tuple:
    return tuple(f.indices) if isinstance(f, FeedbackVector) else tuple(f)


@dataclass(frozen=True)
class ThresholdTree:
    """Per-branch quantization thresholds, immutable after construction.

    branches maps each non-ACK history (tuple, length 0..L-1) to K-1
    ascending thresholds in [0, rate); the rate itself is the implicit
    top boundary.  nested is True when every branch's first threshold
    equals its entry threshold (the designed trees), False for the fixed
    canonical grid where all branches share one threshold list.
    """

    rate: float
    feedback_levels: int
    delay: int
    branches: dict
    nested: bool = True

    def branch(self, f) -> tuple:
        key = _as_key(f)
        try:
            return self.branches[key]
        except KeyError:
            raise ProtocolViolationError(
                f"no branch for feedback history {key}"
            ) from None

    def entry(self, f) -> float:
        """Entry threshold of a branch: its parent's threshold at its index."""
        key = _as_key(f)
        if not key:
            return 0.0
        return self.branches[key[:-1]][key[-1]]

    def vectors(self):
        """All branch keys, breadth-first then lexicographic."""
        return sorted(self.branches, key=lambda k: (len(k), k))

    def to_rows(self):
        """Flatten to (branch path, level index, threshold) rows."""
        for key in self.vectors():
            path = ".".join(str(k) for k in key)
            for k, th in enumerate(self.branches[key]):
                yield path, k, th

    def to_jsonable(self) -> dict:
        return {
            "rate": self.rate,
            "feedback_levels": self.feedback_levels,
            "delay": self.delay,
            "nested": self.nested,
            "branches": {
                ".".join(str(k) for k in key): list(ths)
                for key, ths in sorted(self.branches.items())
            },
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ThresholdTree":
        branches = {}
        for path, ths in obj["branches"].items():
            key = tuple(int(p) for p in path.split(".")) if path else ()
            branches[key] = tuple(float(t) for t in ths)
        tree = cls(
            rate=float(obj["rate"]),
            feedback_levels=int(obj["feedback_levels"]),
            delay=int(obj["delay"]),
            branches=branches,
            nested=bool(obj.get("nested", True)),
        )
        _check_tree(tree)
        return tree


def _rate_of(config) -> Fraction:
    rate = as_rate(config.rate)
    if isinstance(config.rate, float):
        rate = _snap(rate)
    return rate


def _grid_point(t: int, b: int, m: int) -> Fraction:
    return Fraction(m * t, b)


def _branch_thresholds(lo: Fraction, rate: Fraction, b: int, m: int,
                       levels: int) -> list:
    """Thresholds for one branch entered at accumulated MI lo.

    Places lo itself, then every rate-grid anchor strictly inside
    (lo, rate), then spreads leftover thresholds round-robin over the
    priority regions (top cell, bottom cell, then alternating interior
    grid cells from the top down and the bottom up), each clipped to
    (lo, rate), at uniform interior points.
    """
    tau = math.floor(b * rate / m)
    tprime = math.floor(b * lo / m)
    ths = [lo]
    inside = [
        _grid_point(t, b, m)
        for t in range(tprime + 1, tau + 1)
        if lo < _grid_point(t, b, m) < rate
    ]
    free = levels - 2 - len(inside)
    if free < 0:
        # K too small for all grid anchors; keep the lowest ones
        inside = inside[: levels - 2]
        free = 0
    ths += inside
    if free > 0:
        order = [tau, tprime]
        down = range(tau - 1, tprime, -1)
        up = range(tprime + 1, tau)
        for pair in itertools.zip_longest(down, up):
            order.extend(t for t in pair if t is not None)
        regions = []
        seen = set()
        for t in order:
            if t in seen:
                continue
            seen.add(t)
            a = max(lo, _grid_point(t, b, m))
            z = min(rate, _grid_point(t + 1, b, m))
            if z > a:
                regions.append((a, z))
        if not regions:
            raise DesignInfeasibleError(
                f"no room for {free} thresholds in ({float(lo)}, {float(rate)})"
            )
        counts = [0] * len(regions)
        for i in range(free):
            counts[i % len(regions)] += 1
        for (a, z), n in zip(regions, counts):
            ths += [a + (z - a) * Fraction(j, n + 1) for j in range(1, n + 1)]
    ths.sort()
    return ths


def _check_tree(tree: ThresholdTree):
    for key, ths in tree.branches.items():
        if len(ths) != tree.feedback_levels - 1:
            raise DesignInfeasibleError(
                f"branch {key}: {len(ths)} thresholds for K={tree.feedback_levels}"
            )
        if any(not (0.0 <= t < tree.rate) for t in ths):
            raise DesignInfeasibleError(f"branch {key}: threshold outside [0, R)")
        if any(b <= a for a, b in zip(ths, ths[1:])):
            raise DesignInfeasibleError(
                f"branch {key}: thresholds not strictly ascending at float "
                f"resolution: {ths}"
            )
        if tree.nested and key:
            parent = tree.branches[key[:-1]][key[-1]]
            if ths[0] != parent:
                raise DesignInfeasibleError(
                    f"branch {key}: floor {ths[0]} != entry threshold {parent}"
                )


def _branch_keys(levels: int, delay: int):
    keys = [()]
    frontier = [()]
    for _ in range(delay - 1):
        frontier = [key + (k,) for key in frontier for k in range(levels - 1)]
        keys.extend(frontier)
    return keys


def design_thresholds(config) -> ThresholdTree:
    """Build the designed threshold tree for all histories up to depth L-1."""
    b, m = config.b, config.m
    levels, delay = config.feedback_levels, config.delay
    rate = _rate_of(config)
    if levels < 2:
        raise ValueError("feedback_levels must be >= 2")
    if not 0 < rate < m * config.n_t:
        raise ValueError(f"rate must lie in (0, {m * config.n_t})")
    exact = {(): _branch_thresholds(Fraction(0), rate, b, m, levels)}
    frontier = [()]
    for _ in range(delay - 1):
        nxt = []
        for key in frontier:
            for k in range(levels - 1):
                child = key + (k,)
                exact[child] = _branch_thresholds(exact[key][k], rate, b, m, levels)
                nxt.append(child)
        frontier = nxt
    tree = ThresholdTree(
        rate=float(rate),
        feedback_levels=levels,
        delay=delay,
        branches={k: tuple(float(t) for t in v) for k, v in exact.items()},
    )
    _check_tree(tree)
    return tree


def canonical_grid_tree(config) -> ThresholdTree:
    """Fixed-grid reference tree: every branch uses the anchors below R.

    The level count is dictated by the grid, ceil(B*R/M) + 1, regardless
    of the K in config.
    """
    b, m = config.b, config.m
    rate = _rate_of(config)
    ths = []
    t = 0
    while _grid_point(t, b, m) < rate:
        ths.append(_grid_point(t, b, m))
        t += 1
    levels = len(ths) + 1
    floats = tuple(float(x) for x in ths)
    branches = {k: floats for k in _branch_keys(levels, config.delay)}
    tree = ThresholdTree(
        rate=float(rate),
        feedback_levels=levels,
        delay=config.delay,
        branches=branches,
        nested=False,
    )
    _check_tree(tree)
    return tree


def quantize(tree: ThresholdTree, f_prev, acc_mi: float, mode: str = "geq") -> int:
    """Map accumulated MI to a feedback index on the given branch.

    mode "geq" acknowledges at acc_mi >= rate (outage analysis), "strict"
    at acc_mi > rate (random-coding analysis).  acc_mi below the branch
    floor beyond float drift is a protocol violation.
    """
    if mode not in ACK_MODES:
        raise ValueError(f"mode must be one of {ACK_MODES}")
    ths = tree.branch(f_prev)
    acked = acc_mi >= tree.rate if mode == "geq" else acc_mi > tree.rate
    if acked:
        return tree.feedback_levels - 1
    floor_th = ths[0]
    if acc_mi < floor_th - REL_TOL * max(1.0, abs(floor_th)):
        raise ProtocolViolationError(
            f"accumulated MI {acc_mi} below branch floor {floor_th} "
            f"on branch {_as_key(f_prev)}"
        )
    if acc_mi < floor_th:
        acc_mi = floor_th
    return bisect_right(ths, acc_mi) - 1
