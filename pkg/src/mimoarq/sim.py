"""Monte-Carlo simulation of the L-round INR-ARQ protocol.

Outage replaces decoding: a transmission succeeds once the accumulated
MI reaches the rate, so no codewords are simulated.  run_episode is the
single-episode reference; estimate_outage drives a vectorized engine
that advances a whole chunk of episodes round by round, grouping them by
feedback history so each group costs one kernel call.

Episodes are split into fixed-size chunks, each seeded by the counter
triple (seed, stream, chunk index) and merged in chunk order, making
results byte-identical for any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from hashlib import sha256

import numpy as np

from . import kernels
from .constellation import from_name, joint_alphabet
from .errors import ConfigError, ProtocolViolationError
from .feedback import ThresholdTree, quantize
from .mi import draw_fading, round_mi
from .power import PowerPolicy

CHUNK_EPISODES = 1024
_Z95 = 1.959963984540054
_FLOOR_TOL = 1e-12


def json_fingerprint(obj) -> str:
    """Stable short hash of a JSON-serializable structure."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return sha256(blob.encode()).hexdigest()[:16]


def wilson_interval(successes: int, trials: int, z: float = _Z95):
    """Wilson score 95% interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    ph = successes / trials
    z2 = z * z
    den = 1.0 + z2 / trials
    center = (ph + z2 / (2.0 * trials)) / den
    half = (z / den) * math.sqrt(ph * (1.0 - ph) / trials
                                 + z2 / (4.0 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class EpisodeTrace:
    """One protocol run: per-round records plus the terminal status."""

    powers: tuple
    round_mi: tuple
    acc_mi: tuple
    feedback: tuple
    status: str  # "ack@<round>" or "outage"
    ack_round: int = None


@dataclass(frozen=True)
class SimResult:
    """Aggregated outage estimates for one (config, tree, policy) run."""

    trials: int
    rounds: int
    p_out: tuple  # Pr[no ACK within rounds 1..l], l = 1..L
    ci: tuple  # Wilson 95% (lo, hi) per round
    branch_visits: dict  # history -> episodes that ran that round
    ack_counts: dict  # history -> episodes ACKed right after it
    mean_power: float  # realized mean total power per codeword
    power_ci: tuple
    seed: int
    meta: dict = field(default_factory=dict)

    def q_hat(self, f) -> float:
        return self.branch_visits.get(tuple(f), 0) / self.trials


def check_coverage(tree: ThresholdTree, policy: PowerPolicy):
    """Fail fast if the policy misses any reachable branch."""
    if policy.rounds != tree.delay:
        raise ConfigError([
            f"policy covers {policy.rounds} rounds, tree has {tree.delay}"
        ])
    missing = [key for key in tree.branches if not policy.covers(key)]
    if missing:
        raise ConfigError([
            f"policy missing power for branch {k}" for k in sorted(missing)
        ])


def run_episode(config, tree: ThresholdTree, policy: PowerPolicy, rng,
                mode: str = "geq", noise_draws: int = 32) -> EpisodeTrace:
    """Single-episode reference implementation of the protocol."""
    c = from_name(config.constellation) if isinstance(
        config.constellation, str) else config.constellation
    ack = tree.feedback_levels - 1
    f = ()
    acc = 0.0
    powers, mis, accs, fbs = [], [], [], []
    status, ack_round = "outage", None
    for ell in range(1, tree.delay + 1):
        pw = policy.power(f)
        blocks = draw_fading(rng, config.n_r, config.n_t, config.b)
        imi = float(round_mi(c, blocks, pw, noise_draws, rng))
        acc += imi
        k = quantize(tree, f, acc, mode)
        powers.append(pw)
        mis.append(imi)
        accs.append(acc)
        fbs.append(k)
        if k == ack:
            status, ack_round = f"ack@{ell}", ell
            break
        f = f + (k,)
    return EpisodeTrace(tuple(powers), tuple(mis), tuple(accs), tuple(fbs),
                        status, ack_round)


def _advance_group(c, x, n_r, n_t, b, snr, noise_draws, rng, g):
    """One protocol round for a group of g same-history episodes.

    Returns the per-episode round MI (clamped) and the mean squared MI
    standard error, consuming rng in a fixed order (fading then noise).
    """
    cap = float(c.bits_per_symbol * n_t)
    blocks = draw_fading(rng, n_r, n_t, g * b)
    a = math.sqrt(snr / n_t) * blocks
    u = np.ascontiguousarray(np.einsum("qt,brt->bqr", x, a))
    w = math.sqrt(0.5) * (
        rng.standard_normal((g * b, noise_draws, n_r))
        + 1j * rng.standard_normal((g * b, noise_draws, n_r))
    )
    out = np.empty((g * b, noise_draws))
    kernels.round_gap_terms(u, w, out)
    per_draw = cap - out.reshape(g, b, noise_draws).mean(axis=1)  # (g, D)
    imi = np.clip(per_draw.mean(axis=1), 0.0, cap)
    if noise_draws > 1:
        se2 = float((per_draw.var(axis=1, ddof=1) / noise_draws).mean())
    else:
        se2 = 0.0
    return imi, se2


def _sim_chunk(args):
    (c, n_t, n_r, b, tree, policy, mode, noise_draws, seed, stream, ci,
     count) = args
    rng = np.random.default_rng(np.random.SeedSequence((seed, stream, ci)))
    x = joint_alphabet(c, n_t)
    rounds = tree.delay
    rate = tree.rate
    ack = tree.feedback_levels - 1
    acc = np.zeros(count)
    total_power = np.zeros(count)
    groups = {(): np.arange(count)}
    not_acked = np.zeros(rounds, dtype=np.int64)
    visits = {}
    acks = {}
    se2_sum, se2_n = 0.0, 0
    for ell in range(1, rounds + 1):
        nxt = {}
        alive = 0
        for f in sorted(groups):
            idx = groups[f]
            pw = policy.power(f)
            imi, se2 = _advance_group(c, x, n_r, n_t, b, pw, noise_draws,
                                      rng, idx.size)
            acc[idx] += imi
            total_power[idx] += pw
            visits[f] = visits.get(f, 0) + idx.size
            se2_sum += se2 * idx.size
            se2_n += idx.size
            a = acc[idx]
            ths = tree.branch(f)
            floor_th = ths[0]
            if np.any(a < floor_th - _FLOOR_TOL * max(1.0, abs(floor_th))):
                raise ProtocolViolationError(
                    f"accumulated MI below branch floor {floor_th} on {f}"
                )
            acked = (a >= rate) if mode == "geq" else (a > rate)
            n_ack = int(acked.sum())
            if n_ack:
                acks[f] = acks.get(f, 0) + n_ack
            rest = idx[~acked]
            alive += rest.size
            if ell < rounds and rest.size:
                ks = np.searchsorted(np.asarray(ths), acc[rest],
                                     side="right") - 1
                np.clip(ks, 0, ack - 1, out=ks)
                for k in np.unique(ks):
                    nxt[f + (int(k),)] = rest[ks == k]
        not_acked[ell - 1] = alive
        groups = nxt
    return (ci, not_acked, visits, acks, float(total_power.sum()),
            float((total_power ** 2).sum()), se2_sum, se2_n)


def estimate_outage(config, tree: ThresholdTree, policy: PowerPolicy,
                    trials: int, seed: int, workers: int = 1,
                    mode: str = "geq", noise_draws: int = 32,
                    stream: int = 0) -> SimResult:
    """Outage probabilities, branch occupancies, and realized power."""
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    if mode not in ("geq", "strict"):
        raise ValueError("mode must be 'geq' or 'strict'")
    check_coverage(tree, policy)
    c = from_name(config.constellation) if isinstance(
        config.constellation, str) else config.constellation
    tasks = []
    done = 0
    ci = 0
    while done < trials:
        count = min(CHUNK_EPISODES, trials - done)
        tasks.append((c, config.n_t, config.n_r, config.b, tree, policy,
                      mode, noise_draws, seed, stream, ci, count))
        done += count
        ci += 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sim_chunk, tasks, chunksize=1))
    else:
        parts = [_sim_chunk(t) for t in tasks]
    parts.sort(key=lambda p: p[0])
    rounds = tree.delay
    not_acked = np.zeros(rounds, dtype=np.int64)
    visits, acks = {}, {}
    psum = psumsq = se2_sum = 0.0
    se2_n = 0
    for _, na, vis, ak, ps, ps2, s2, s2n in parts:
        not_acked += na
        for k, v in vis.items():
            visits[k] = visits.get(k, 0) + v
        for k, v in ak.items():
            acks[k] = acks.get(k, 0) + v
        psum += ps
        psumsq += ps2
        se2_sum += s2
        se2_n += s2n
    p_out = tuple(int(n) / trials for n in not_acked)
    ci_list = tuple(wilson_interval(int(n), trials) for n in not_acked)
    mean_power = psum / trials
    var = max(psumsq / trials - mean_power ** 2, 0.0) * trials / max(
        trials - 1, 1)
    half = _Z95 * math.sqrt(var / trials)
    meta = {
        "mode": mode,
        "noise_draws": noise_draws,
        "backend": kernels.BACKEND,
        "avg_mi_std_err": math.sqrt(se2_sum / se2_n) if se2_n else 0.0,
        "tree_fingerprint": json_fingerprint(tree.to_jsonable()),
        "policy_fingerprint": json_fingerprint(policy.to_jsonable()),
    }
    return SimResult(
        trials=trials,
        rounds=rounds,
        p_out=p_out,
        ci=ci_list,
        branch_visits=visits,
        ack_counts=acks,
        mean_power=mean_power,
        power_ci=(mean_power - half, mean_power + half),
        seed=seed,
        meta=meta,
    )


@dataclass(frozen=True)
class OutageCurve:
    """estimate_outage results over an ascending linear SNR list."""

    snr_list: tuple
    results: tuple

    def slope_to_next(self, i: int, round_index: int):
        """Local log-log decay rate of p(round) between grid points i, i+1.

        This is the empirical diversity proxy; None when either
        probability is zero or i is the last point.
        """
        if i + 1 >= len(self.snr_list):
            return None
        p0 = self.results[i].p_out[round_index - 1]
        p1 = self.results[i + 1].p_out[round_index - 1]
        if p0 <= 0.0 or p1 <= 0.0:
            return None
        return -(math.log10(p1) - math.log10(p0)) / (
            math.log10(self.snr_list[i + 1]) - math.log10(self.snr_list[i]))

    def rows(self):
        """Flat (snr, round, p_out, ci_lo, ci_hi, trials, mean_power, slope)."""
        for i, (snr, res) in enumerate(zip(self.snr_list, self.results)):
            for ell in range(1, res.rounds + 1):
                lo, hi = res.ci[ell - 1]
                yield (snr, ell, res.p_out[ell - 1], lo, hi, res.trials,
                       res.mean_power, self.slope_to_next(i, ell))


def sweep_snr(config, tree_builder, policy_builder, snr_list, trials: int,
              seed: int, workers: int = 1, mode: str = "geq",
              noise_draws: int = 32) -> OutageCurve:
    """Rebuild the policy at each SNR (budget = that SNR) and simulate.

    tree_builder(config) -> ThresholdTree; policy_builder(config, tree,
    budget) -> PowerPolicy.  Each grid point uses its own seed stream, so
    single points can be reproduced in isolation.
    """
    snr_list = [float(s) for s in snr_list]
    if any(b <= a for a, b in zip(snr_list, snr_list[1:])) or not snr_list:
        raise ValueError("snr_list must be nonempty ascending")
    tree = tree_builder(config)
    results = []
    for gi, snr in enumerate(snr_list):
        policy = policy_builder(config, tree, snr)
        results.append(
            estimate_outage(config, tree, policy, trials, seed,
                            workers=workers, mode=mode,
                            noise_draws=noise_draws, stream=gi)
        )
    return OutageCurve(tuple(snr_list), tuple(results))
