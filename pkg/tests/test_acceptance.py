"""End-to-end acceptance checks.

Each test covers one release criterion and records a single PASS/FAIL
line in the terminal summary.  Monte-Carlo checks pin every seed and
sample count, so reruns are deterministic; the chosen counts are the
smallest that leave comfortable statistical margins (see the per-test
notes).
"""

import math
import os
import time
from fractions import Fraction

import numpy as np

from mimoarq import (ChannelConfig, DiversityQuery, block_mi, cli,
                     constant_power_diversity, db_to_linear,
                     multi_bit_diversity, one_bit_diversity,
                     scalar_mi_quadrature, tradeoff_curve)
from mimoarq.constellation import from_name
from mimoarq.feedback import canonical_grid_tree, design_thresholds
from mimoarq.mi import cdf_at
from mimoarq.power import (allocate_round, appendix_b_policy,
                           approx_branch_probs, constant_policy, solve_eq28)
from mimoarq.sim import estimate_outage


def _stamp(log, num, name, ok, detail, elapsed):
    log(f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} "
        f"[{detail}] in {elapsed:.1f}s")


def test_criterion_1_reference_threshold_rows(criterion_log, siso_channel):
    t0 = time.perf_counter()
    tree = design_thresholds(siso_channel)
    expected = {
        (): (0.0, 2.0, 2.75),
        (0,): (0.0, 2.0, 2.75),
        (1,): (2.0, 2.5, 3.0),
        (2,): (2.75, 3.0, 3.25),
    }
    ok = tree.branches == expected
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 1, "reference threshold rows", ok,
           "9 designed values, decimal-exact", elapsed)
    assert ok, tree.branches
    assert elapsed < 1.0


def test_criterion_2_diversity_closed_forms(criterion_log):
    t0 = time.perf_counter()
    siso = DiversityQuery.make(1, 1, 2, 4, Fraction(7, 2), delay=2,
                               feedback_levels=4)
    mimo = DiversityQuery.make(2, 1, 1, 4, Fraction(15, 2), delay=2,
                               feedback_levels=3)
    got = (constant_power_diversity(siso).value,
           one_bit_diversity(siso, 2).value,
           multi_bit_diversity(siso, 2).value,
           one_bit_diversity(mimo, 2).value,
           multi_bit_diversity(mimo, 2).value)
    ok = got == (3, 4, 5, 4, 5)
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 2, "diversity closed forms", ok,
           f"siso {got[:3]}, mimo {got[3:]}", elapsed)
    assert ok, got
    assert elapsed < 1.0


def test_criterion_3_tradeoff_curve_properties(criterion_log):
    t0 = time.perf_counter()
    grid = [Fraction(2 * i + 1, 50) for i in range(200)]  # off-boundary
    failures = []
    for delay in (1, 2, 3):
        tpl = DiversityQuery.make(2, 2, 2, 4, Fraction(1), delay=delay,
                                  feedback_levels=2)
        curves = {}
        for scheme in ("constant_power", "one_bit", "multi_bit",
                       "random_coding"):
            pts, _ = tradeoff_curve(tpl, grid, scheme, delay)
            curves[scheme] = [v.value for _, v in pts]
        for i in range(200):
            if not (curves["constant_power"][i] <= curves["one_bit"][i]
                    <= curves["multi_bit"][i]):
                failures.append(f"L={delay} ordering at grid {i}")
            if curves["multi_bit"][i] != curves["random_coding"][i]:
                failures.append(f"L={delay} multi!=random at grid {i}")
        for scheme, vals in curves.items():
            if any(b > a for a, b in zip(vals, vals[1:])):
                failures.append(f"L={delay} {scheme} not nonincreasing")
    ok = not failures
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 3, "tradeoff curve properties", ok,
           "200-point grid, L in {1,2,3}", elapsed)
    assert ok, failures[:5]
    assert elapsed < 5.0


def test_criterion_4_oracle_equivalence(criterion_log):
    # Draw counts rise with SNR because the per-draw integrand gets
    # heavy-tailed near MI saturation; at the chosen counts the only
    # stragglers are deep-saturated BPSK gains whose residual gap
    # (~1e-9) no unweighted Monte-Carlo run can resolve, and the 57/60
    # allowance absorbs exactly those.
    t0 = time.perf_counter()
    rng = np.random.default_rng(123)
    passes = {}
    for cname in ("bpsk", "qpsk"):
        c = from_name(cname)
        good = 0
        grng = np.random.default_rng(2024)
        for _ in range(20):
            g = complex((grng.standard_normal()
                         + 1j * grng.standard_normal()) * math.sqrt(0.5))
            for snr in (0.1, 1.0, 10.0):
                if snr < 5.0:
                    draws = 100000
                else:
                    draws = 10000000 if cname == "bpsk" else 4000000
                mc = block_mi(c, np.array([[g]]), snr, draws, rng)
                qd = float(scalar_mi_quadrature(c, g, snr))
                if abs(float(mc) - qd) < 3 * max(mc.std_err, 1e-300):
                    good += 1
        passes[cname] = good
    ok = all(v >= 57 for v in passes.values())
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 4, "MI estimator vs quadrature oracle", ok,
           f"bpsk {passes['bpsk']}/60, qpsk {passes['qpsk']}/60, need 57",
           elapsed)
    assert ok, passes
    assert elapsed < 120.0


def test_criterion_5_single_round_consistency(criterion_log, siso_table):
    t0 = time.perf_counter()
    ch = ChannelConfig(n_t=1, n_r=1, b=2, constellation="qam16",
                       rate=Fraction(7, 2), delay=1, feedback_levels=2)
    tree = design_thresholds(ch)
    worst = 0.0
    details = []
    for i, snr_db in enumerate((10.0, 14.0, 18.0, 22.0, 26.0)):
        snr = db_to_linear(snr_db)
        res = estimate_outage(ch, tree, constant_policy(snr, 1), 100000,
                              seed=777, noise_draws=32, stream=i)
        p_sim = res.p_out[0]
        p_tab = cdf_at(siso_table, snr, 3.5)
        sig = math.sqrt(p_sim * (1 - p_sim) / res.trials
                        + p_tab * (1 - p_tab) / siso_table.n)
        z = abs(p_sim - p_tab) / sig
        worst = max(worst, z)
        details.append(f"{snr_db:.0f}dB z={z:.2f}")
    ok = worst < 3.0
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 5, "single-round sim vs table CDF", ok,
           "; ".join(details), elapsed)
    assert ok, details
    assert elapsed < 600.0


def test_criterion_6_desk_scale_slopes(criterion_log, siso_k3_channel,
                                       siso_table):
    # 18 and 21 dB are the two highest points where the constant-power
    # p(2) tail still collects enough hits at these trial counts; the
    # constant arm gets 4x the trials because its p(2) is ~30x smaller.
    t0 = time.perf_counter()
    ch = siso_k3_channel
    tree = canonical_grid_tree(ch)
    dlog = (db_to_linear(21.0) / db_to_linear(18.0))
    p_adaptive, p_const, p_first = [], [], []
    for i, snr_db in enumerate((18.0, 21.0)):
        budget = db_to_linear(snr_db)
        pol_b = appendix_b_policy(ch, siso_table, budget)
        res_b = estimate_outage(ch, tree, pol_b, 1000000, seed=311,
                                noise_draws=32, stream=i)
        res_c = estimate_outage(ch, tree, constant_policy(budget, 2),
                                4000000, seed=312, noise_draws=32, stream=i)
        p_adaptive.append(res_b.p_out[1])
        p_const.append(res_c.p_out[1])
        p_first.append(res_c.p_out[0])
    feasible = min(p_adaptive + p_const) > 0
    slope_b = math.log(p_adaptive[0] / p_adaptive[1]) / math.log(dlog)
    slope_c = math.log(p_const[0] / p_const[1]) / math.log(dlog)
    slope_1 = math.log(p_first[0] / p_first[1]) / math.log(dlog)
    ok = feasible and slope_b > slope_c and abs(slope_1 - 1.0) <= 0.75
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 6, "desk-scale slope ordering", ok,
           f"p(2) slope adaptive {slope_b:.2f} vs constant {slope_c:.2f}; "
           f"L=1 slope {slope_1:.2f} vs target 1 +/- 0.75", elapsed)
    assert feasible, (p_adaptive, p_const)
    assert slope_b > slope_c, (slope_b, slope_c)
    assert abs(slope_1 - 1.0) <= 0.75, slope_1
    assert elapsed < 1800.0


def _budget_audit(ch, tree, policy, budget, table, trials, seed,
                  noise_draws):
    res = estimate_outage(ch, tree, policy, trials, seed=seed,
                          noise_draws=noise_draws)
    half = res.power_ci[1] - res.mean_power
    over = res.mean_power - budget
    # conservation of the approximate branch masses, ACK included
    worst = 0.0
    for rnd in range(2, tree.delay + 1):
        parents = approx_branch_probs(tree, policy, table, rnd - 1).q_hat \
            if rnd > 2 else {(): 1.0}
        kids = approx_branch_probs(tree, policy, table, rnd).q_hat
        for f, qf in parents.items():
            nack = sum(q for k, q in kids.items() if k[:-1] == f)
            ack = qf * (1.0 - cdf_at(table, policy.power(f),
                                     tree.rate - tree.entry(f)))
            worst = max(worst, abs(nack + ack - qf))
    return over, half, worst


def test_criterion_7_budget_audits(criterion_log, siso_channel,
                                   siso_table, mimo_channel, mimo_table):
    t0 = time.perf_counter()
    details, ok = [], True
    cases = [
        ("siso", siso_channel, siso_table, db_to_linear(18.0), 32),
        ("mimo", mimo_channel, mimo_table, db_to_linear(21.0), 8),
    ]
    seed = 5000
    for label, ch, table, budget, draws in cases:
        designed = design_thresholds(ch)
        canonical = canonical_grid_tree(ch)
        runs = [
            ("eq28", designed, solve_eq28(designed, table, budget)),
            ("appendix_b", canonical, appendix_b_policy(ch, table, budget)),
        ]
        for scheme, tree, pol in runs:
            seed += 1
            over, half, worst = _budget_audit(
                ch, tree, pol, budget, table, 10000,
                seed=seed, noise_draws=draws)
            good = over <= 3 * half and worst < 1e-9
            ok = ok and good
            details.append(f"{label}/{scheme} over={over:+.2f} "
                           f"(3ci={3 * half:.2f}) cons={worst:.1e}")
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 7, "power budget audits", ok,
           "; ".join(details), elapsed)
    assert ok, details
    assert elapsed < 600.0


def test_criterion_8_solver_toy_oracle(criterion_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(88)
    grid = np.geomspace(0.1, 1e4, 64)
    step = math.log(grid[1] / grid[0])
    bad = []
    for case in range(50):
        nb = int(rng.integers(2, 6))
        a = rng.choice([1.0, 2.0], size=nb)
        c = np.exp(rng.uniform(math.log(0.5), math.log(5.0), size=nb))
        raw = rng.uniform(0.1, 1.0, size=nb)
        q = raw / raw.sum() * rng.uniform(0.4, 0.9)
        budget = float(q.sum() * rng.uniform(50.0, 500.0))
        keys = [(i,) for i in range(nb)]
        curves = {k: c[i] * grid ** -a[i] for i, k in enumerate(keys)}
        q_hat = {k: float(q[i]) for i, k in enumerate(keys)}

        def spend(lam):
            p = (c * a / lam) ** (1.0 / (a + 1.0))
            return float(q @ p), p

        lo, hi = 1e-12, 1e12
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if spend(mid)[0] > budget:
                lo = mid
            else:
                hi = mid
        p_star = spend(math.sqrt(lo * hi))[1]
        powers, obj, _ = allocate_round(q_hat, curves, grid, budget)
        for i, k in enumerate(keys):
            gap = abs(math.log(powers[k] / p_star[i]))
            if gap > step * 1.5:
                bad.append(f"case {case} branch {i}: off by "
                           f"{gap / step:.2f} steps")
        uni = grid[np.searchsorted(grid, budget / q.sum(),
                                   side="right") - 1]
        uni_obj = float(q @ (c * uni ** -a))
        if obj > uni_obj + 1e-12:
            bad.append(f"case {case}: lost to uniform")
    ok = not bad
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 8, "round solver vs hand Lagrangian", ok,
           "50 random power-law tables", elapsed)
    assert ok, bad[:5]
    assert elapsed < 60.0


_DET_CFG = """\
[channel]
nt = 1
nr = 1
b = 2
modulation = qam16
rate = 7/2

[protocol]
delay = 2
feedback_levels = 3
ack_convention = geq

[simulation]
trials = 4000
seed = 42
workers = {workers}
noise_draws = 8

[power]
scheme = appendix_b

[snr]
grid_db = 15, 18

[table]
samples = 2000
noise_draws = 8
seed = 9
grid_db = 4, 8, 12, 16, 20, 24

[paths]
table_dir = {root}/tables
out_dir = {root}/out
"""


def test_criterion_9_worker_count_determinism(criterion_log, tmp_path):
    t0 = time.perf_counter()
    outputs = {}
    for workers in (1, 8):
        root = tmp_path / f"w{workers}"
        cfg_path = root / "exp.cfg"
        os.makedirs(root)
        cfg_path.write_text(_DET_CFG.format(workers=workers, root=root))
        for argv in (["mi-table"], ["solve-power", "--budget-db", "18",
                                    "--scheme", "eq28"], ["simulate"]):
            rc = cli.main(argv + ["--config", str(cfg_path)])
            assert rc == 0, argv
        blobs = {}
        (table_path,) = (root / "tables").glob("mitable-*.txt")
        blobs["table"] = table_path.read_bytes()
        for name in ("policy_eq28.json", "outage_appendix_b.csv",
                     "run_appendix_b.json"):
            blobs[name] = (root / "out" / name).read_bytes()
        outputs[workers] = blobs
    mismatched = [k for k in outputs[1] if outputs[1][k] != outputs[8][k]]
    ok = not mismatched
    elapsed = time.perf_counter() - t0
    _stamp(criterion_log, 9, "worker-count determinism", ok,
           "table, policy, and simulation artifacts byte-compared",
           elapsed)
    assert ok, mismatched
    assert elapsed < 300.0
