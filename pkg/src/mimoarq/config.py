"""Experiment configuration: the channel scenario plus run settings.

Configs are INI files; every violation is collected and reported at once
rather than failing on the first.  SNR values live in dB here and are
converted to linear scale only when handed to the core modules.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .constellation import from_name
from .diversity import as_rate, _snap
from .errors import ConfigError

ACK_CONVENTIONS = ("geq", "strict")
POWER_SCHEMES = ("constant", "appendix_b", "eq28")

_SECTIONS = {
    "channel": {"nt", "nr", "b", "modulation", "rate"},
    "protocol": {"delay", "feedback_levels", "ack_convention"},
    "simulation": {"trials", "seed", "workers", "noise_draws"},
    "power": {"scheme"},
    "snr": {"grid_db"},
    "table": {"samples", "noise_draws", "seed", "grid_db"},
    "paths": {"table_dir", "out_dir"},
}


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(linear: float) -> float:
    return 10.0 * math.log10(linear)


@dataclass(frozen=True)
class ChannelConfig:
    """One ARQ scenario; rate is kept exact as a Fraction."""

    n_t: int
    n_r: int
    b: int
    constellation: str
    rate: Fraction
    delay: int = 1
    feedback_levels: int = 2

    def __post_init__(self):
        violations = []
        for name in ("n_t", "n_r", "b", "delay"):
            val = getattr(self, name)
            if not isinstance(val, int) or val < 1:
                violations.append(f"{name}: must be a positive integer, "
                                  f"got {val!r}")
        if not isinstance(self.feedback_levels, int) or \
                self.feedback_levels < 2:
            violations.append(
                f"feedback_levels: K >= 2 required (ACK plus at least one "
                f"NACK level), got {self.feedback_levels!r}")
        m = None
        try:
            m = from_name(self.constellation).bits_per_symbol
        except (KeyError, ValueError, TypeError) as exc:
            violations.append(f"constellation: {exc}")
        try:
            rate = as_rate(self.rate)
            if isinstance(self.rate, float):
                rate = _snap(rate)
            object.__setattr__(self, "rate", rate)
            if m is not None and not 0 < rate < m * self.n_t:
                violations.append(
                    f"rate: must lie in (0, {m * self.n_t}) bpcu, got {rate}")
        except (ValueError, ZeroDivisionError) as exc:
            violations.append(f"rate: {exc}")
        if violations:
            raise ConfigError(violations)

    @cached_property
    def m(self) -> int:
        return from_name(self.constellation).bits_per_symbol

    def to_jsonable(self) -> dict:
        return {
            "n_t": self.n_t, "n_r": self.n_r, "b": self.b,
            "constellation": self.constellation, "rate": str(self.rate),
            "delay": self.delay, "feedback_levels": self.feedback_levels,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Channel scenario plus simulation, power, grid, and path settings."""

    channel: ChannelConfig
    ack_convention: str = "geq"
    trials: int = 10000
    seed: int = 1
    workers: int = 1
    noise_draws: int = 32
    snr_db: tuple = ()
    scheme: str = "constant"
    table_samples: int = 2000
    table_noise_draws: int = 32
    table_seed: int = 1
    table_grid_db: tuple = ()  # empty means derive from snr_db
    table_dir: str = "artifacts"
    out_dir: str = "artifacts"

    def __post_init__(self):
        violations = []
        if self.ack_convention not in ACK_CONVENTIONS:
            violations.append(f"ack_convention: one of {ACK_CONVENTIONS} "
                              f"required, got {self.ack_convention!r}")
        if self.scheme not in POWER_SCHEMES:
            violations.append(f"scheme: one of {POWER_SCHEMES} required, "
                              f"got {self.scheme!r}")
        for name, minval in (("trials", 1000), ("seed", 0), ("workers", 1),
                             ("noise_draws", 1), ("table_samples", 1000),
                             ("table_noise_draws", 1), ("table_seed", 0)):
            val = getattr(self, name)
            if not isinstance(val, int) or val < minval:
                violations.append(f"{name}: integer >= {minval} required, "
                                  f"got {val!r}")
        for name in ("snr_db", "table_grid_db"):
            grid = getattr(self, name)
            if any(y <= x for x, y in zip(grid, grid[1:])):
                violations.append(f"{name}: must be strictly ascending")
        if violations:
            raise ConfigError(violations)

    def snr_linear(self) -> tuple:
        return tuple(db_to_linear(s) for s in self.snr_db)

    def table_grid_linear(self) -> tuple:
        """The MI-table grid, derived when not given explicitly.

        The derived grid spans from below the smallest power any policy
        can look up, min budget / (K*L), up to the largest sweep SNR,
        in steps of at most 1.5 dB.
        """
        if self.table_grid_db:
            return tuple(db_to_linear(s) for s in self.table_grid_db)
        if not self.snr_db:
            raise ConfigError(["snr.grid_db: required to derive the table "
                               "grid"])
        ch = self.channel
        margin = linear_to_db(ch.feedback_levels * ch.delay)
        lo = math.floor(min(self.snr_db) - margin - 1.0)
        hi = max(self.snr_db)
        points = max(2, int(math.ceil((hi - lo) / 1.5)) + 1)
        step = (hi - lo) / (points - 1)
        return tuple(db_to_linear(lo + i * step) for i in range(points))

    def to_jsonable(self) -> dict:
        # workers and output paths are execution details; results must not
        # depend on them, so they stay out of fingerprints and manifests
        return {
            "channel": self.channel.to_jsonable(),
            "ack_convention": self.ack_convention,
            "trials": self.trials,
            "seed": self.seed,
            "noise_draws": self.noise_draws,
            "snr_db": list(self.snr_db),
            "scheme": self.scheme,
            "table_samples": self.table_samples,
            "table_noise_draws": self.table_noise_draws,
            "table_seed": self.table_seed,
            "table_grid_db": list(self.table_grid_db),
        }


def _parse_scalar(raw: str, kind, key: str, violations: list):
    try:
        if kind is int:
            return int(raw)
        if kind is Fraction:
            return as_rate(raw)
        return raw.strip()
    except (ValueError, ZeroDivisionError) as exc:
        violations.append(f"{key}: {exc}")
        return None


def _parse_grid(raw: str, key: str, violations: list) -> tuple:
    raw = raw.strip()
    if not raw or raw.lower() == "auto":
        return ()
    try:
        return tuple(float(v) for v in raw.split(","))
    except ValueError as exc:
        violations.append(f"{key}: {exc}")
        return ()


def load_config(path) -> ExperimentConfig:
    """Parse and validate an INI experiment file, reporting all problems."""
    if not os.path.isfile(path):
        raise ConfigError([f"{path}: no such file"])
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    violations = []
    for section in cp.sections():
        if section not in _SECTIONS:
            violations.append(f"[{section}]: unknown section")
            continue
        for key in cp[section]:
            if key not in _SECTIONS[section]:
                violations.append(f"{section}.{key}: unknown key")
    for section, key in (("channel", "nt"), ("channel", "nr"),
                         ("channel", "b"), ("channel", "modulation"),
                         ("channel", "rate"), ("snr", "grid_db")):
        if not cp.has_option(section, key):
            violations.append(f"{section}.{key}: missing required key")
    if violations:
        raise ConfigError(violations)

    def get(section, key, kind, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        if kind is tuple:
            return _parse_grid(raw, f"{section}.{key}", violations)
        return _parse_scalar(raw, kind, f"{section}.{key}", violations)

    channel = None
    try:
        channel = ChannelConfig(
            n_t=get("channel", "nt", int),
            n_r=get("channel", "nr", int),
            b=get("channel", "b", int),
            constellation=get("channel", "modulation", str),
            rate=get("channel", "rate", Fraction),
            delay=get("protocol", "delay", int, 1),
            feedback_levels=get("protocol", "feedback_levels", int, 2),
        )
    except ConfigError as exc:
        violations.extend(exc.violations)
    except TypeError:
        pass  # missing required values already recorded
    kwargs = dict(
        ack_convention=get("protocol", "ack_convention", str, "geq"),
        trials=get("simulation", "trials", int, 10000),
        seed=get("simulation", "seed", int, 1),
        workers=get("simulation", "workers", int, 1),
        noise_draws=get("simulation", "noise_draws", int, 32),
        snr_db=get("snr", "grid_db", tuple, ()),
        scheme=get("power", "scheme", str, "constant"),
        table_samples=get("table", "samples", int, 2000),
        table_noise_draws=get("table", "noise_draws", int, 32),
        table_seed=get("table", "seed", int, 1),
        table_grid_db=get("table", "grid_db", tuple, ()),
        table_dir=get("paths", "table_dir", str, "artifacts"),
        out_dir=get("paths", "out_dir", str, "artifacts"),
    )
    if channel is None and not violations:
        violations.append("channel: could not be built")
    # validate run settings even when the channel is broken, so one pass
    # reports everything; the stand-in channel never escapes
    probe = channel if channel is not None else ChannelConfig(
        n_t=1, n_r=1, b=1, constellation="qpsk", rate=Fraction(1))
    cfg = None
    try:
        cfg = ExperimentConfig(channel=probe, **kwargs)
    except ConfigError as exc:
        violations.extend(exc.violations)
    except TypeError:
        pass  # unparseable values already recorded
    if violations:
        raise ConfigError(violations)
    return cfg
