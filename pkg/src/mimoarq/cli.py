"""Command-line front end: experiment orchestration and artifact emission.

All outputs are plot-ready CSV or JSON, written atomically, with the run
manifest (config hash, seeds, version, backend) embedded so equal
manifests imply byte-identical files.  dB to linear conversion happens
here and nowhere else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from fractions import Fraction
from importlib import resources

from . import __version__, kernels
from .config import (ExperimentConfig, db_to_linear, linear_to_db,
                     load_config)
from .diversity import (DiversityQuery, constant_power_diversity,
                        multi_bit_diversity, one_bit_diversity,
                        random_coding_exponent, tradeoff_curve)
from .errors import ConfigError, MimoArqError
from .feedback import canonical_grid_tree, design_thresholds
from .mi import (MiCdfTable, build_mi_table, header_fingerprint,
                 table_header)
from .power import appendix_b_policy, constant_policy, solve_eq28
from .sim import json_fingerprint, sweep_snr

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

_FMT = ".10g"


def _resolve_config_path(name: str) -> str:
    if os.path.isfile(name):
        return name
    preset = resources.files("mimoarq").joinpath("presets", f"{name}.cfg")
    if preset.is_file():
        return str(preset)
    raise ConfigError([f"config: no file or preset named {name!r}"])


def _manifest(cfg: ExperimentConfig, **extra) -> dict:
    man = {
        "version": __version__,
        "backend": kernels.BACKEND,
        "config": cfg.to_jsonable(),
        "config_fingerprint": json_fingerprint(cfg.to_jsonable()),
    }
    man.update(extra)
    return man


def _atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, manifest: dict, columns, rows):
    lines = [f"# manifest {json.dumps(manifest, sort_keys=True)}",
             ",".join(columns)]
    for row in rows:
        cells = []
        for v in row:
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(format(v, _FMT))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")
    print(f"wrote {path} ({len(rows) if hasattr(rows, '__len__') else '?'} rows)")


def _write_json(path: str, obj: dict):
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")
    print(f"wrote {path}")


def _table_dir(cfg: ExperimentConfig) -> str:
    return os.environ.get("MIMOARQ_CACHE_DIR", cfg.table_dir)


def _ensure_table(cfg: ExperimentConfig, force: bool = False) -> MiCdfTable:
    """Build the MI table or reuse a cached copy whose fingerprint matches."""
    ch = cfg.channel
    grid = cfg.table_grid_linear()
    fp = header_fingerprint(table_header(
        ch.constellation, ch.m, ch.n_t, ch.n_r, ch.b, cfg.table_samples,
        cfg.table_seed, cfg.table_noise_draws, grid))
    path = os.path.join(_table_dir(cfg), f"mitable-{fp}.txt")
    if not force and os.path.isfile(path):
        table = MiCdfTable.load(path)
        if table.fingerprint() == fp:
            print(f"table cache hit {path}")
            return table
        print(f"table cache fingerprint mismatch, rebuilding {path}")
    table = build_mi_table(ch, grid, cfg.table_samples,
                           noise_draws=cfg.table_noise_draws,
                           seed=cfg.table_seed, workers=cfg.workers)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    table.save(path)
    print(f"built table {path} ({len(grid)} SNRs x {cfg.table_samples} samples)")
    return table


def _tree_for(cfg: ExperimentConfig, scheme: str):
    if scheme == "appendix_b":
        return canonical_grid_tree(cfg.channel)
    return design_thresholds(cfg.channel)


def _policy_for(scheme: str, cfg: ExperimentConfig, tree, table, budget):
    if scheme == "constant":
        return constant_policy(budget, cfg.channel.delay)
    if scheme == "appendix_b":
        return appendix_b_policy(cfg.channel, table, budget)
    return solve_eq28(tree, table, budget)


def cmd_mi_table(cfg: ExperimentConfig, args) -> int:
    table = _ensure_table(cfg, force=args.force)
    print(f"fingerprint {table.fingerprint()}")
    return EXIT_OK


def cmd_diversity(cfg: ExperimentConfig, args) -> int:
    ch = cfg.channel
    rnd = args.round or ch.delay
    base = DiversityQuery.make(ch.n_t, ch.n_r, ch.b, ch.m, ch.rate,
                               delay=ch.delay,
                               feedback_levels=ch.feedback_levels)
    rows = [("constant_power", rnd, constant_power_diversity(base).value,
             constant_power_diversity(base).validity)]
    q_one = base
    rows.append(("one_bit", rnd, one_bit_diversity(q_one, rnd).value,
                 one_bit_diversity(q_one, rnd).validity))
    q_multi = base
    if base.feedback_levels < base.min_levels:
        q_multi = dataclasses.replace(base, feedback_levels=base.min_levels)
    rows.append(("multi_bit", rnd, multi_bit_diversity(q_multi, rnd).value,
                 multi_bit_diversity(q_multi, rnd).validity))
    rows.append(("random_coding", rnd,
                 random_coding_exponent(q_multi, rnd).value,
                 random_coding_exponent(q_multi, rnd).validity))
    for scheme, r, val, validity in rows:
        print(f"{scheme} round {r}: {val} ({validity})")
    path = os.path.join(cfg.out_dir, "diversity.csv")
    _write_csv(path, _manifest(cfg), ("scheme", "round", "diversity",
                                      "validity"), rows)
    return EXIT_OK


def cmd_curve(cfg: ExperimentConfig, args) -> int:
    ch = cfg.channel
    rnd = args.round or ch.delay
    points = args.points
    base = DiversityQuery.make(ch.n_t, ch.n_r, ch.b, ch.m, ch.rate,
                               delay=ch.delay,
                               feedback_levels=ch.feedback_levels)
    cap = ch.m * ch.n_t
    grid = [Fraction(cap) * Fraction(2 * i + 1, 2 * points)
            for i in range(points)]
    pts, boundaries = tradeoff_curve(base, grid, args.scheme, rnd)
    rows = [(float(r), v.value, v.validity) for r, v in pts]
    path = os.path.join(cfg.out_dir, f"curve_{args.scheme}.csv")
    man = _manifest(cfg, scheme=args.scheme, round=rnd,
                    boundary_rates=[str(b) for b in boundaries])
    _write_csv(path, man, ("rate", "diversity", "validity"), rows)
    return EXIT_OK


def cmd_thresholds(cfg: ExperimentConfig, args) -> int:
    ch = cfg.channel
    if args.levels:
        ch = dataclasses.replace(ch, feedback_levels=args.levels)
    tree = canonical_grid_tree(ch) if args.canonical else \
        design_thresholds(ch)
    rows = list(tree.to_rows())
    for path_, k, th in rows:
        print(f"branch [{path_}] level {k}: {format(th, _FMT)}")
    man = _manifest(cfg, tree_fingerprint=json_fingerprint(tree.to_jsonable()))
    _write_csv(os.path.join(cfg.out_dir, "thresholds.csv"), man,
               ("branch", "level", "threshold"), rows)
    _write_json(os.path.join(cfg.out_dir, "thresholds.json"),
                {"manifest": man, "tree": tree.to_jsonable()})
    return EXIT_OK


def cmd_solve_power(cfg: ExperimentConfig, args) -> int:
    scheme = args.scheme or cfg.scheme
    budget = db_to_linear(args.budget_db)
    table = None if scheme == "constant" else _ensure_table(cfg)
    tree = _tree_for(cfg, scheme)
    policy = _policy_for(scheme, cfg, tree, table, budget)
    man = _manifest(cfg, scheme=scheme, budget_db=args.budget_db,
                    tree_fingerprint=json_fingerprint(tree.to_jsonable()),
                    policy_fingerprint=json_fingerprint(policy.to_jsonable()))
    _write_json(os.path.join(cfg.out_dir, f"policy_{scheme}.json"),
                {"manifest": man, "tree": tree.to_jsonable(),
                 "policy": policy.to_jsonable()})
    for key in sorted(policy.powers):
        path_ = ".".join(str(k) for k in key)
        print(f"P(round {len(key) + 1} | [{path_}]) = "
              f"{format(policy.powers[key], _FMT)}")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    scheme = args.scheme or cfg.scheme
    table = None if scheme == "constant" else _ensure_table(cfg)

    def tree_builder(ch):
        return _tree_for(cfg, scheme)

    def policy_builder(ch, tree, budget):
        return _policy_for(scheme, cfg, tree, table, budget)

    curve = sweep_snr(cfg.channel, tree_builder, policy_builder,
                      cfg.snr_linear(), cfg.trials, cfg.seed,
                      workers=cfg.workers, mode=cfg.ack_convention,
                      noise_draws=cfg.noise_draws)
    man = _manifest(
        cfg, scheme=scheme,
        table_fingerprint=table.fingerprint() if table else None,
        point_fingerprints=[r.meta["policy_fingerprint"]
                            for r in curve.results],
    )
    rows = []
    for snr, ell, p, lo, hi, trials, mp, slope in curve.rows():
        rows.append((linear_to_db(snr), ell, p, lo, hi, trials, mp, slope))
    _write_csv(os.path.join(cfg.out_dir, f"outage_{scheme}.csv"), man,
               ("snr_db", "round", "p_out", "ci_lo", "ci_hi", "trials",
                "mean_total_power", "slope_to_next"), rows)
    _write_json(os.path.join(cfg.out_dir, f"run_{scheme}.json"),
                {"manifest": man})
    for snr, res in zip(curve.snr_list, curve.results):
        outs = " ".join(format(p, ".3g") for p in res.p_out)
        print(f"snr {format(linear_to_db(snr), '.4g')} dB: p_out {outs}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mimoarq",
        description="INR-ARQ outage analysis over MIMO block-fading "
                    "channels")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", required=True,
                       help="config file path or preset name")
        p.set_defaults(fn=fn)
        return p

    p = add("mi-table", cmd_mi_table, help="build or reuse the MI CDF table")
    p.add_argument("--force", action="store_true",
                   help="rebuild even on cache hit")
    p = add("diversity", cmd_diversity,
            help="closed-form diversity values at one round")
    p.add_argument("--round", type=int, default=None)
    p = add("curve", cmd_curve, help="diversity tradeoff curve over rate")
    p.add_argument("--scheme", default="multi_bit",
                   choices=("multi_bit", "one_bit", "constant_power",
                            "random_coding"))
    p.add_argument("--round", type=int, default=None)
    p.add_argument("--points", type=int, default=200)
    p = add("thresholds", cmd_thresholds, help="feedback threshold tree")
    p.add_argument("--levels", type=int, default=None,
                   help="override feedback level count K")
    p.add_argument("--canonical", action="store_true",
                   help="fixed-grid reference tree instead of the designed one")
    p = add("solve-power", cmd_solve_power, help="compute a power policy")
    p.add_argument("--budget-db", type=float, required=True)
    p.add_argument("--scheme", default=None,
                   choices=("constant", "appendix_b", "eq28"))
    p = add("simulate", cmd_simulate, help="Monte-Carlo outage sweep")
    p.add_argument("--scheme", default=None,
                   choices=("constant", "appendix_b", "eq28"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(_resolve_config_path(args.config))
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MimoArqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
