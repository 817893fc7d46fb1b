"""Run configuration: INI-style structured text with five sections.

Defaults reproduce the desk configuration (2-D, n = 64, gamma = (2, 3),
mu = 0.1, lambda = 0, delta0 = 0.5, T = 0.5, eps sweep 0.4 .. 0.05,
H^2 diagnostics).  Every field is validated before any run starts.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

from .errors import ConfigError

_KNOWN = {
    "grid": {"dim", "n", "length"},
    "physics": {"gamma_plus", "gamma_minus", "mu", "lambda", "epsilon", "s"},
    "init": {"u0", "delta0", "seed"},
    "time": {"T", "cfl", "snapshot_interval", "dt"},
    "sweep": {"epsilons"},
    "output": {"dir", "formats", "checkpoint_times"},
}

U0_PRESETS = ("zero", "taylor_green", "tg_perturbed")


@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    n: int = 64
    length: float = 2.0 * math.pi
    gamma_plus: float = 2.0
    gamma_minus: float = 3.0
    mu: float = 0.1
    lam: float = 0.0
    epsilon: float = 0.2
    s: int = 2
    u0: str = "tg_perturbed"
    delta0: float = 0.5
    seed: int = 1234
    T: float = 0.5
    cfl: float = 0.4
    snapshot_interval: float = 0.0   # 0 -> T / 25
    dt: float = 0.0                  # 0 -> CFL-derived
    epsilons: tuple = (0.4, 0.2, 0.1, 0.05)
    out_dir: str = "out"
    formats: tuple = ("csv", "checkpoint")
    checkpoint_times: tuple = ()

    def snap_interval(self) -> float:
        return self.snapshot_interval if self.snapshot_interval > 0 else self.T / 25.0

    def resolved_items(self):
        """Canonical (key, value) pairs for embedding in reports."""
        return [
            ("grid.dim", self.dim),
            ("grid.n", self.n),
            ("grid.length", self.length),
            ("physics.gamma_plus", self.gamma_plus),
            ("physics.gamma_minus", self.gamma_minus),
            ("physics.mu", self.mu),
            ("physics.lambda", self.lam),
            ("physics.epsilon", self.epsilon),
            ("physics.s", self.s),
            ("init.u0", self.u0),
            ("init.delta0", self.delta0),
            ("init.seed", self.seed),
            ("time.T", self.T),
            ("time.cfl", self.cfl),
            ("time.snapshot_interval", self.snap_interval()),
            ("time.dt", self.dt),
            ("sweep.epsilons", ",".join("%.17g" % e for e in self.epsilons)),
            ("output.dir", self.out_dir),
            ("output.formats", ",".join(self.formats)),
            ("output.checkpoint_times",
             ",".join("%.17g" % t for t in self.checkpoint_times)),
        ]


def _parse_floats(text):
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keys are case-sensitive (T vs t)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    def get(section, key, conv, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return conv(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for [{section}] {key}: {raw!r}") from exc
        return default

    d = RunConfig()  # defaults
    cfg = RunConfig(
        dim=get("grid", "dim", int, d.dim),
        n=get("grid", "n", int, d.n),
        length=get("grid", "length", float, d.length),
        gamma_plus=get("physics", "gamma_plus", float, d.gamma_plus),
        gamma_minus=get("physics", "gamma_minus", float, d.gamma_minus),
        mu=get("physics", "mu", float, d.mu),
        lam=get("physics", "lambda", float, d.lam),
        epsilon=get("physics", "epsilon", float, d.epsilon),
        s=get("physics", "s", int, d.s),
        u0=get("init", "u0", str, d.u0),
        delta0=get("init", "delta0", float, d.delta0),
        seed=get("init", "seed", int, d.seed),
        T=get("time", "T", float, d.T),
        cfl=get("time", "cfl", float, d.cfl),
        snapshot_interval=get("time", "snapshot_interval", float,
                              d.snapshot_interval),
        dt=get("time", "dt", float, d.dt),
        epsilons=get("sweep", "epsilons", _parse_floats, d.epsilons),
        out_dir=get("output", "dir", str, d.out_dir),
        formats=get("output", "formats",
                    lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
                    d.formats),
        checkpoint_times=get("output", "checkpoint_times", _parse_floats,
                             d.checkpoint_times),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if cfg.dim not in (1, 2, 3):
        raise ConfigError("grid.dim must be 1, 2 or 3")
    if cfg.n < 8 or cfg.n % 2:
        raise ConfigError("grid.n must be even and >= 8")
    if cfg.length <= 0:
        raise ConfigError("grid.length must be positive")
    if cfg.gamma_plus <= 1 or cfg.gamma_minus <= 1:
        raise ConfigError("adiabatic exponents must exceed 1")
    if cfg.mu <= 0 or 2 * cfg.mu + 3 * cfg.lam < 0:
        raise ConfigError("need mu > 0 and 2 mu + 3 lambda >= 0")
    if not 0 < cfg.epsilon <= 1:
        raise ConfigError("physics.epsilon must lie in (0, 1]")
    if cfg.s < 0 or cfg.s > 6:
        raise ConfigError("physics.s must lie in 0..6")
    if cfg.u0 not in U0_PRESETS:
        raise ConfigError(f"init.u0 must be one of {U0_PRESETS}")
    if cfg.delta0 < 0:
        raise ConfigError("init.delta0 must be nonnegative")
    if cfg.T <= 0:
        raise ConfigError("time.T must be positive")
    if not 0 < cfg.cfl <= 1:
        raise ConfigError("time.cfl must lie in (0, 1]")
    if cfg.snapshot_interval < 0 or cfg.dt < 0:
        raise ConfigError("time intervals must be nonnegative")
    if not cfg.epsilons:
        raise ConfigError("sweep.epsilons must not be empty")
    if any(not 0 < e <= 1 for e in cfg.epsilons):
        raise ConfigError("sweep epsilons must lie in (0, 1]")
    if any(b >= a for a, b in zip(cfg.epsilons, cfg.epsilons[1:])):
        raise ConfigError("sweep epsilons must be strictly decreasing")
    bad = set(cfg.formats) - {"csv", "checkpoint"}
    if bad:
        raise ConfigError(f"unknown output formats: {sorted(bad)}")
    if any(t < 0 or t > cfg.T for t in cfg.checkpoint_times):
        raise ConfigError("checkpoint times must lie in [0, T]")
