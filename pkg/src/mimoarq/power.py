"""Transmit-power policies for INR-ARQ.

Powers are linear per-receive-antenna SNR values, keyed by feedback
history.  Branch probabilities are approximated by replacing the
accumulated MI of a history with its entry threshold, so that every
probability is a CDF difference read from an MI table.  The sequential
per-round optimizer dualizes the per-round budget and bisects the
multiplier; the reference rule divides power in inverse proportion to
cell probability on the canonical grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, ProtocolViolationError, SnrOutOfRangeError
from .feedback import ThresholdTree, canonical_grid_tree
from .mi import MiCdfTable, cdf_at

SCHEMES = ("constant", "appendix_b", "eq28")
BUDGET_RTOL = 1e-9
DEFAULT_GRID_POINTS = 64
_BISECT_ITERS = 50


@dataclass(frozen=True)
class PowerPolicy:
    """Map from non-ACK feedback history to that round's transmit power.

    default is the fallback power for histories not listed (used by the
    constant scheme); None means lookups must hit an explicit entry.
    ACK-terminated histories implicitly carry zero power.
    """

    scheme: str
    budget: float
    rounds: int
    powers: dict
    default: float = None
    meta: dict = field(default_factory=dict)

    def power(self, f) -> float:
        key = tuple(f)
        try:
            return self.powers[key]
        except KeyError:
            if self.default is not None:
                return self.default
            raise ProtocolViolationError(
                f"policy has no power for feedback history {key}"
            ) from None

    def covers(self, key) -> bool:
        return self.default is not None or tuple(key) in self.powers

    def to_jsonable(self) -> dict:
        return {
            "scheme": self.scheme,
            "budget": self.budget,
            "rounds": self.rounds,
            "default": self.default,
            "powers": {
                ".".join(str(k) for k in key): val
                for key, val in sorted(self.powers.items())
            },
            "meta": self.meta,
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "PowerPolicy":
        powers = {}
        for path, val in obj["powers"].items():
            key = tuple(int(p) for p in path.split(".")) if path else ()
            powers[key] = float(val)
        return cls(
            scheme=obj["scheme"],
            budget=float(obj["budget"]),
            rounds=int(obj["rounds"]),
            powers=powers,
            default=None if obj.get("default") is None else float(obj["default"]),
            meta=dict(obj.get("meta", {})),
        )


@dataclass
class BranchTable:
    """Approximate occupancy and outage curves for one round's branches."""

    round_index: int
    q_hat: dict  # history -> probability
    entry: dict  # history -> entry threshold (bpcu)
    power_grid: tuple = ()
    p_curves: dict = field(default_factory=dict)  # history -> array on grid


def outage_bound(entry: float, power: float, table: MiCdfTable,
                 rate: float) -> float:
    """Upper bound on outage given branch entry MI: Pr[I <= rate - entry]."""
    return cdf_at(table, power, rate - entry)


def approx_branch_probs(tree: ThresholdTree, powers, table: MiCdfTable,
                        round_index: int) -> BranchTable:
    """q_hat over histories of length round_index - 1.

    powers maps histories of length 0..round_index-2 to their round's
    power (a dict or a PowerPolicy).  Each branch's accumulated MI is
    replaced by its entry threshold, making cell masses CDF differences;
    the ACK cell takes the complement, so sibling masses sum to the
    parent's exactly.
    """
    if not 1 <= round_index <= tree.delay:
        raise ValueError(f"round_index {round_index} outside 1..{tree.delay}")
    lookup = powers.power if isinstance(powers, PowerPolicy) else (
        lambda f: powers[tuple(f)])
    level = {(): 1.0}
    for depth in range(round_index - 1):
        nxt = {}
        for f, qf in level.items():
            pw = lookup(f)
            ths = tree.branch(f)
            base = tree.entry(f)
            bounds = list(ths) + [tree.rate]
            try:
                # round MI is nonnegative, so nothing sits below the branch
                # floor; using cdf_at there would leak its 1/(n+1) floor and
                # break sibling-mass conservation
                cum = [0.0] + [cdf_at(table, pw, t - base)
                               for t in bounds[1:]]
            except SnrOutOfRangeError as exc:
                raise SnrOutOfRangeError(f"{exc} (branch {f})") from None
            for k in range(len(ths)):
                nxt[f + (k,)] = qf * max(cum[k + 1] - cum[k], 0.0)
        level = nxt
    return BranchTable(
        round_index=round_index,
        q_hat=level,
        entry={f: tree.entry(f) for f in level},
    )


def default_power_grid(table: MiCdfTable, points: int = DEFAULT_GRID_POINTS):
    """Log-spaced candidate powers spanning the table's SNR grid."""
    lo, hi = table.snr_grid[0], table.snr_grid[-1]
    if lo <= 0:
        raise ValueError("power grid requires positive table SNRs")
    return tuple(np.geomspace(lo, hi, points))


def _isotonic_decreasing(curve):
    # MC noise can make the bound wiggle upward in power; repair with
    # running maxima from the right
    return np.maximum.accumulate(curve[::-1])[::-1]


def allocate_round(q_hat: dict, p_curves: dict, power_grid, budget: float):
    """Pick one grid power per branch minimizing sum q*p under the budget.

    Lagrangian per branch: argmin over the grid of p_curve + lam*power,
    bisecting lam until the weighted spend meets the budget; ties and
    argmin both resolve to the lowest power.  The uniform feasible split
    is always evaluated too, so the result never loses to it.  Returns
    (powers dict, objective, slack).
    """
    grid = np.asarray(power_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("power_grid must be ascending and nonempty")
    keys = sorted(q_hat)
    q = np.array([q_hat[k] for k in keys])
    curves = np.vstack([_isotonic_decreasing(np.asarray(p_curves[k], float))
                        for k in keys])
    if curves.shape[1] != grid.size:
        raise ValueError("p_curves must align with power_grid")
    min_spend = float(q.sum() * grid[0])
    if min_spend > budget * (1.0 + BUDGET_RTOL):
        raise InfeasibleError(
            f"even minimum powers exceed the round budget: "
            f"need {min_spend}, have {budget} "
            f"(per-branch minima {dict(zip(keys, [grid[0]] * len(keys)))})"
        )

    def pick(lam):
        # exhaustive scan per branch; first argmin = lowest power on ties
        idx = np.argmin(curves + lam * grid[None, :], axis=1)
        spend = float(q @ grid[idx])
        obj = float(q @ curves[np.arange(len(keys)), idx])
        return idx, spend, obj

    best = None  # (objective, spend, idx)

    def consider(idx, spend, obj):
        nonlocal best
        if spend <= budget * (1.0 + BUDGET_RTOL):
            if best is None or obj < best[0]:
                best = (obj, spend, idx)

    idx0, spend0, obj0 = pick(0.0)
    consider(idx0, spend0, obj0)
    if spend0 > budget * (1.0 + BUDGET_RTOL):
        drops = np.maximum(curves[:, :-1] - curves[:, 1:], 0.0)
        steps = np.diff(grid)[None, :]
        lam_hi = 2.0 * float((drops / steps).max()) + 1e-30
        lam_lo = 0.0
        for _ in range(_BISECT_ITERS):
            lam = 0.5 * (lam_lo + lam_hi)
            idx, spend, obj = pick(lam)
            consider(idx, spend, obj)
            if spend > budget * (1.0 + BUDGET_RTOL):
                lam_lo = lam
            else:
                lam_hi = lam
    # uniform-split guard: largest single grid power affordable everywhere
    qs = float(q.sum())
    if qs > 0:
        uni = int(np.searchsorted(grid, budget / qs, side="right")) - 1
        if uni >= 0:
            idx = np.full(len(keys), uni)
            consider(idx, float(qs * grid[uni]),
                     float(q @ curves[:, uni]))
    if best is None:
        raise InfeasibleError("no feasible allocation found on the grid")
    obj, spend, idx = best
    powers = {k: float(grid[i]) for k, i in zip(keys, idx)}
    return powers, obj, budget - spend


def solve_eq28(tree: ThresholdTree, table: MiCdfTable, budget: float,
               power_grid=None) -> PowerPolicy:
    """Sequential per-round minimization of the bound sum q_hat * p_hat.

    Round 1 power is forced to budget/L (the root has mass one under the
    per-round constraint); each later round allocates its budget/L over
    the surviving branches given the occupancies implied by the earlier
    rounds.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    rounds = tree.delay
    grid = tuple(power_grid) if power_grid is not None else \
        default_power_grid(table)
    per_round = budget / rounds
    powers = {(): per_round}
    meta = {"power_grid": [float(g) for g in grid],
            "table_fingerprint": table.fingerprint(),
            "objective": {}, "slack": {}}
    for ell in range(2, rounds + 1):
        bt = approx_branch_probs(tree, powers, table, ell)
        bt.power_grid = grid
        bt.p_curves = {
            f: np.array([outage_bound(bt.entry[f], p, table, tree.rate)
                         for p in grid])
            for f in bt.q_hat
        }
        alloc, obj, slack = allocate_round(bt.q_hat, bt.p_curves, grid,
                                           per_round)
        powers.update(alloc)
        meta["objective"][str(ell)] = obj
        meta["slack"][str(ell)] = slack
    return PowerPolicy(scheme="eq28", budget=float(budget), rounds=rounds,
                       powers=powers, meta=meta)


def appendix_b_policy(config, table: MiCdfTable, budget: float) -> PowerPolicy:
    """Reciprocal-cell-probability rule on the canonical grid tree.

    Round 1 spends budget/(K*L) (the zero accumulated MI sits in cell 0
    with certainty); round l+1 gives a history ending in cell k the power
    budget/(K*L*Pr[cell k]), estimated recursively with the same
    threshold-replacement approximation.  A zero estimated cell gets the
    table's maximum SNR instead of infinity, flagged in meta.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    tree = canonical_grid_tree(config)
    k_levels, rounds = tree.feedback_levels, tree.delay
    denom = k_levels * rounds
    grid_max = table.snr_grid[-1]
    warnings = []
    powers = {(): budget / denom}
    level = {(): 1.0}
    for ell in range(2, rounds + 1):
        bt = approx_branch_probs(tree, _ClampedLookup(powers, grid_max,
                                                      warnings, ell),
                                 table, ell)
        level = bt.q_hat
        cell_mass = {}
        for f, qf in level.items():
            cell_mass[f[-1]] = cell_mass.get(f[-1], 0.0) + qf
        for f in level:
            mass = cell_mass[f[-1]]
            if mass <= 0.0:
                powers[f] = grid_max
                warnings.append(
                    f"round {ell} cell {f[-1]}: zero estimated probability, "
                    f"power capped at grid max {grid_max}"
                )
            else:
                powers[f] = budget / (denom * mass)
    # long-term spend is budget * (1 + (L-1)(K-1)) / (KL) <= budget by
    # the reciprocal structure; recorded for audits
    meta = {
        "table_fingerprint": table.fingerprint(),
        "budget_identity": (1.0 + (rounds - 1) * (k_levels - 1)) / denom,
        "warnings": warnings,
    }
    return PowerPolicy(scheme="appendix_b", budget=float(budget),
                       rounds=rounds, powers=powers, meta=meta)


class _ClampedLookup:
    """Power lookup that clamps CDF queries into the table's SNR range.

    The true policy power can exceed the table grid (reciprocal of a tiny
    cell mass); the stored policy keeps the true value while the next
    level's probability estimate uses the clamped one.
    """

    def __init__(self, powers, grid_max, warnings, ell):
        self.powers = powers
        self.grid_max = grid_max
        self.warnings = warnings
        self.ell = ell

    def __getitem__(self, key):
        val = self.powers[key]
        if val > self.grid_max:
            self.warnings.append(
                f"round {self.ell}: lookup for branch {key} clamped from "
                f"{val} to table max {self.grid_max}"
            )
            return self.grid_max
        return val


def constant_policy(budget: float, rounds: int) -> PowerPolicy:
    """Short-term baseline: every round transmits at the SNR parameter."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    return PowerPolicy(scheme="constant", budget=float(budget), rounds=rounds,
                       powers={}, default=float(budget),
                       meta={"note": "per-round power equals budget"})
