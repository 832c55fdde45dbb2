"""Experiment runner: YAML configs, seeded replications, CSV output, horizon sweeps.

Config schema (unknown keys are rejected)::

    protocol: demab            # see PROTOCOLS
    M: 8
    T: 20000
    seed: 0                    # replication r uses seed + r
    replications: 1
    instance:
      kind: mab
      means: [0.2, 0.5, 0.8]   # or: spaced: {K: 16, low: 0.2, high: 0.8}

    instance:
      kind: linear
      d: 5
      n_actions: 50            # random unit-sphere actions ...
      instance_seed: 0         # ... and theta*, drawn from this seed
      actions: [[1, 0], ...]   # optional explicit actions
      theta_star: [1, 0]       # optional explicit parameter
      sigma: 1.0
      time_varying: false      # fresh actions every step (UCB protocols only)
"""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
import yaml

from .env import ActionSetGenerator, LinearInstance, MabInstance, UsageError, VaryingLinearInstance
from .linear import delb_run, dislinucb_run, pooled_linucb_run
from .mab import demab_run, immediate_sharing_mab_run, independent_run
from .result import RunResult

PROTOCOLS: dict[str, tuple[str, Callable[..., RunResult]]] = {
    "demab": ("mab", lambda inst, M, T, s: demab_run(inst, M, T, s, burn_in=True)),
    "demab-no-burnin": ("mab", lambda inst, M, T, s: demab_run(inst, M, T, s, burn_in=False)),
    "mab-immediate": ("mab", immediate_sharing_mab_run),
    "mab-independent": ("mab", independent_run),
    "delb": ("linear", delb_run),
    "dislinucb": ("linear", dislinucb_run),
    "linucb-pooled": ("linear", pooled_linucb_run),
}

RUN_HEADER = ["seed", "step", "cum_regret", "cum_comm"]
SUMMARY_HEADER = ["seed", "protocol", "M", "T", "final_regret", "final_comm"]
SWEEP_HEADER = ["T", "mean_final_regret", "mean_final_comm"]


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    """Locale-free float text with 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


@dataclass
class InstanceSpec:
    kind: str
    means: Optional[list[float]] = None
    spaced: Optional[dict[str, float]] = None
    d: Optional[int] = None
    n_actions: Optional[int] = None
    instance_seed: int = 0
    actions: Optional[list[list[float]]] = None
    theta_star: Optional[list[float]] = None
    sigma: float = 1.0
    time_varying: bool = False

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "mab":
            keys = ["kind", "means"] if self.means is not None else ["kind", "spaced"]
        else:
            keys = ["kind", "d", "n_actions", "instance_seed", "sigma", "time_varying"]
            keys += [k for k in ("actions", "theta_star") if getattr(self, k) is not None]
        return {k: getattr(self, k) for k in keys}


@dataclass
class RunConfig:
    protocol: str
    instance: InstanceSpec
    M: int
    T: int
    seed: int = 0
    replications: int = 1

    @property
    def kind(self) -> str:
        return PROTOCOLS[self.protocol][0]

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "M": self.M,
            "T": self.T,
            "seed": self.seed,
            "replications": self.replications,
            "instance": self.instance.to_dict(),
        }

    def replace(self, **changes) -> "RunConfig":
        return validate_config(dataclasses.replace(self, **changes))


_TOP_KEYS = {"protocol", "M", "T", "seed", "replications", "instance"}
_MAB_KEYS = {"kind", "means", "spaced"}
_LINEAR_KEYS = {"kind", "d", "n_actions", "instance_seed", "actions", "theta_star", "sigma", "time_varying"}


def _int(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _instance_spec(raw: Any) -> InstanceSpec:
    if not isinstance(raw, dict):
        raise ConfigError("'instance' must be a mapping")
    kind = raw.get("kind")
    if kind == "mab":
        unknown = set(raw) - _MAB_KEYS
        if unknown:
            raise ConfigError(f"unknown instance keys: {sorted(unknown)}")
        if ("means" in raw) == ("spaced" in raw):
            raise ConfigError("a mab instance needs exactly one of 'means' or 'spaced'")
        if "spaced" in raw:
            spaced = raw["spaced"]
            if not isinstance(spaced, dict) or set(spaced) != {"K", "low", "high"}:
                raise ConfigError("'spaced' needs exactly the keys K, low, high")
            spec = InstanceSpec("mab", spaced={"K": _int(spaced["K"], "K", 2),
                                               "low": float(spaced["low"]), "high": float(spaced["high"])})
        else:
            spec = InstanceSpec("mab", means=[float(m) for m in raw["means"]])
    elif kind == "linear":
        unknown = set(raw) - _LINEAR_KEYS
        if unknown:
            raise ConfigError(f"unknown instance keys: {sorted(unknown)}")
        spec = InstanceSpec(
            "linear",
            d=_int(raw["d"], "d", 1) if "d" in raw else None,
            n_actions=_int(raw["n_actions"], "n_actions", 1) if "n_actions" in raw else None,
            instance_seed=_int(raw.get("instance_seed", 0), "instance_seed", 0),
            actions=[[float(v) for v in row] for row in raw["actions"]] if "actions" in raw else None,
            theta_star=[float(v) for v in raw["theta_star"]] if "theta_star" in raw else None,
            sigma=float(raw.get("sigma", 1.0)),
            time_varying=bool(raw.get("time_varying", False)),
        )
        if spec.actions is not None:
            spec.d = spec.d or len(spec.actions[0])
            spec.n_actions = spec.n_actions or len(spec.actions)
        if spec.d is None or spec.n_actions is None:
            raise ConfigError("a linear instance needs d and n_actions (or explicit actions)")
    else:
        raise ConfigError(f"instance kind must be 'mab' or 'linear', got {kind!r}")
    try:
        build_instance(spec)
    except UsageError as exc:
        raise ConfigError(f"invalid instance: {exc}") from exc
    return spec


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {cfg.protocol!r}; choose from {sorted(PROTOCOLS)}")
    M = _int(cfg.M, "M", 1)
    T = _int(cfg.T, "T", 1)
    if T <= max(M, 2):
        raise ConfigError(f"T must exceed max(M, 2); got T={T}, M={M}")
    seed = _int(cfg.seed, "seed", 0)
    reps = _int(cfg.replications, "replications", 1)
    if seed + reps > 2**64:
        raise ConfigError("seeds must stay below 2**64")
    if cfg.kind != cfg.instance.kind:
        raise ConfigError(f"protocol {cfg.protocol!r} needs a {cfg.kind} instance, got {cfg.instance.kind!r}")
    if cfg.protocol == "delb" and cfg.instance.time_varying:
        raise ConfigError("delb requires a fixed action set")
    return RunConfig(cfg.protocol, cfg.instance, M, T, seed, reps)


def parse_config(source: Union[str, Path, dict]) -> RunConfig:
    """Parse a config from a mapping, a YAML file path, or YAML text."""
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        text = path.read_text() if "\n" not in str(source) and path.exists() else str(source)
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"protocol", "M", "T", "instance"} - set(raw)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    cfg = RunConfig(
        protocol=str(raw["protocol"]),
        instance=_instance_spec(raw["instance"]),
        M=raw["M"],
        T=raw["T"],
        seed=raw.get("seed", 0),
        replications=raw.get("replications", 1),
    )
    return validate_config(cfg)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def build_instance(spec: InstanceSpec):
    if spec.kind == "mab":
        if spec.spaced is not None:
            return MabInstance.spaced(int(spec.spaced["K"]), spec.spaced["low"], spec.spaced["high"])
        return MabInstance(np.array(spec.means))
    rng = np.random.default_rng(spec.instance_seed)
    base = LinearInstance.random_sphere(spec.d, spec.n_actions, rng, spec.sigma)
    actions = base.actions if spec.actions is None else np.array(spec.actions)
    theta = base.theta_star if spec.theta_star is None else np.array(spec.theta_star)
    if actions.shape[1] != spec.d or actions.shape[0] != spec.n_actions or theta.size != spec.d:
        raise UsageError("explicit actions/theta_star disagree with d or n_actions")
    if spec.time_varying:
        gen = ActionSetGenerator.random_sphere(spec.d, spec.n_actions, spec.instance_seed)
        return VaryingLinearInstance(gen, theta, spec.sigma)
    return LinearInstance(actions, theta, spec.sigma)


def run(config: RunConfig) -> list[RunResult]:
    """Run ``config.replications`` independent replications, seeds seed, seed+1, ..."""
    config = validate_config(config)
    instance = build_instance(config.instance)
    fn = PROTOCOLS[config.protocol][1]
    return [fn(instance, config.M, config.T, config.seed + r) for r in range(config.replications)]


def emit_csv(results: Sequence[RunResult], destination: Union[str, Path]) -> tuple[Path, Path]:
    """Write ``runs.csv`` (per step) and ``summary.csv`` (per replication) into ``destination``."""
    if not results:
        raise UsageError("no results to write")
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    runs_path, summary_path = dest / "runs.csv", dest / "summary.csv"
    with open(runs_path, "w", newline="", encoding="ascii") as fh:
        fh.write(",".join(RUN_HEADER) + "\n")
        for res in sorted(results, key=lambda r: r.seed):
            prefix = f"{res.seed},"
            fh.writelines(
                f"{prefix}{t},{fmt(reg)},{int(com)}\n"
                for t, (reg, com) in enumerate(zip(res.cumulative_regret.tolist(), res.cumulative_comm.tolist()), 1)
            )
    with open(summary_path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for res in sorted(results, key=lambda r: r.seed):
            writer.writerow([res.seed, res.protocol, res.M, res.T, fmt(res.final_regret), res.final_comm])
    return runs_path, summary_path


def read_runs_csv(path: Union[str, Path]) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Inverse of the per-step part of :func:`emit_csv`: seed -> (cum_regret, cum_comm)."""
    out: dict[int, tuple[list, list]] = {}
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RUN_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for row in reader:
            reg, com = out.setdefault(int(row["seed"]), ([], []))
            reg.append(float(row["cum_regret"]))
            com.append(int(row["cum_comm"]))
    return {s: (np.array(r), np.array(c, dtype=np.int64)) for s, (r, c) in out.items()}


@dataclass
class SweepRow:
    T: int
    mean_final_regret: float
    mean_final_comm: float
    results: list[RunResult] = field(default_factory=list, repr=False)


def sweep(base: RunConfig, horizons: Sequence[int]) -> list[SweepRow]:
    """Run ``base`` at each horizon with the same seeds."""
    horizons = [int(h) for h in horizons]
    if not horizons or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ConfigError("horizons must be non-empty and strictly ascending")
    rows = []
    for T in horizons:
        results = run(base.replace(T=T))
        rows.append(SweepRow(
            T,
            float(np.mean([r.final_regret for r in results])),
            float(np.mean([r.final_comm for r in results])),
            results,
        ))
    return rows


def emit_sweep_csv(rows: Sequence[SweepRow], destination: Union[str, Path]) -> Path:
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    path = dest / "sweep.csv"
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([row.T, fmt(row.mean_final_regret), fmt(row.mean_final_comm)])
    return path
