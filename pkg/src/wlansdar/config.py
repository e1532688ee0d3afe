"""JSON run configuration."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ScenarioError
from .params import MacParams, PhyParams, Scenario

SEED_ENV = "WLANSDAR_SEED"
OUTPUT_ENV = "WLANSDAR_OUTPUT_DIR"

_TOP_KEYS = {
    "nodes", "lambda", "lambdas", "buffer", "payload_bytes", "access_mode",
    "phy", "mac", "sweep", "sim", "workers", "output_dir",
}
_SIM_KEYS = {"engine", "seed", "horizon", "warmup_fraction"}


class ConfigError(ScenarioError):
    pass


@dataclass
class SimSettings:
    engine: str = "sdar"
    seed: int = 0
    horizon: float = 100.0
    warmup_fraction: float = 0.05


@dataclass
class RunConfig:
    scenario: Scenario
    sweep: Optional[list] = None
    sim: SimSettings = None
    workers: int = 1
    output_dir: Optional[str] = None

    def output_path(self, name: Optional[str]) -> Optional[Path]:
        if name is None:
            return None
        p = Path(name)
        if not p.is_absolute() and self.output_dir:
            p = Path(self.output_dir) / p
        return p


def _build(cls, raw: dict, where: str):
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad {where} section: {exc}") from None


def _sweep_values(raw) -> list:
    if isinstance(raw, list):
        return [float(x) for x in raw]
    if isinstance(raw, dict):
        if "lambdas" in raw:
            return [float(x) for x in raw["lambdas"]]
        try:
            start, stop, step = float(raw["start"]), float(raw["stop"]), float(raw["step"])
        except KeyError as exc:
            raise ConfigError(f"sweep needs 'lambdas' or start/stop/step (missing {exc})") from None
        if step <= 0:
            raise ConfigError("sweep step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    raise ConfigError("sweep must be a list or an object")


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if "lambdas" in raw:
        lambdas = tuple(float(x) for x in raw["lambdas"])
        if "nodes" in raw and raw["nodes"] != len(lambdas):
            raise ConfigError("'nodes' disagrees with the length of 'lambdas'")
    else:
        if "nodes" not in raw:
            raise ConfigError("config needs 'nodes' (or an explicit 'lambdas' list)")
        lambdas = (float(raw.get("lambda", 0.0)),) * int(raw["nodes"])
    phy = _build(PhyParams, raw.get("phy", {}), "phy")
    mac = _build(MacParams, raw.get("mac", {}), "mac")
    buffer = raw.get("buffer", 5)
    s = Scenario(
        lambdas=lambdas,
        buffer=None if buffer is None else int(buffer),
        payload_bits=int(round(float(raw.get("payload_bytes", 1000)) * 8)),
        access_mode=raw.get("access_mode", "basic"),
        phy=phy,
        mac=mac,
    )
    sim_raw = raw.get("sim", {})
    if set(sim_raw) - _SIM_KEYS:
        raise ConfigError(f"unknown sim keys: {sorted(set(sim_raw) - _SIM_KEYS)}")
    sim = SimSettings(**sim_raw)
    sweep = _sweep_values(raw["sweep"]) if "sweep" in raw else None
    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return RunConfig(s, sweep, sim, workers, raw.get("output_dir"))


def load_config(path, env=None) -> RunConfig:
    """Read a JSON config file and apply environment overrides."""
    env = os.environ if env is None else env
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    try:
        cfg = parse_config(raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ConfigError(str(exc)) from None
    if env.get(SEED_ENV):
        try:
            cfg.sim.seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    if env.get(OUTPUT_ENV):
        cfg.output_dir = env[OUTPUT_ENV]
    return cfg
