"""INI-style experiment configuration.

Keys are addressed as ``section.key`` (``schedule.num_steps``). With no config
file every key takes its default; a config file must at least pin
``schedule.num_steps``. Unknown keys are rejected so typos surface early.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError, SelguideError
from .guidance import GuidanceSpec
from .oracle import CostModel, MixtureModel, default_mixture
from .sampler import RunConfig
from .schedule import build_schedule

REQUIRED_IN_FILE = ("schedule.num_steps",)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    items = [p for p in text.replace(",", " ").split() if p]
    if not items:
        raise ValueError("empty list")
    return tuple(float(p) for p in items)


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none") else int(text)


def _optional_str(text: str) -> str | None:
    text = text.strip()
    return None if text.lower() in ("", "none") else text


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        text = text.strip()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "schedule.kind": (_choice("linear", "cosine"), "linear"),
    "schedule.num_steps": (int, 50),
    "schedule.beta_min": (float, 1e-4),
    "schedule.beta_max": (float, 0.02),
    "cost.eval_cost": (float, 0.0811),
    "cost.iter_overhead": (float, 0.0366),
    "guidance.scale": (float, 7.5),
    "guidance.skip_start_frac": (float, 0.0),
    "guidance.skip_end_frac": (float, 0.0),
    "run.sampler": (_choice("ddpm", "ddim"), "ddpm"),
    "run.seed": (int, 0),
    "run.seeds": (_optional_int, None),
    "run.condition": (_optional_int, 0),
    "run.record_trajectory": (_bool, False),
    "mixture.file": (_optional_str, None),
    "sweep.width": (float, 0.25),
    "sweep.positions": (int, 4),
    "sweep.reference_size": (int, 4000),
    "sweep.projections": (int, 128),
    "bench.fractions": (_float_list, (0.0, 0.2, 0.3, 0.4, 0.5)),
    "bench.warmup": (int, 10),
    "bench.reference_size": (int, 4000),
    "bench.projections": (int, 128),
    "tune.skip_last": (float, 0.4),
    "tune.scale_min": (float, 7.5),
    "tune.scale_max": (float, 12.0),
    "tune.scale_step": (float, 0.1),
}

DEFAULT_SEEDS = {"sample": 1, "sweep": 200, "bench": 50, "tune": 200}


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


@dataclass
class Settings:
    values: dict[str, Any]
    base_dir: Path

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def set(self, key: str, raw: Any) -> None:
        """Apply an override; strings go through the schema parser."""
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}", key)
        if isinstance(raw, str):
            self.values[key] = _parse(key, raw)
        else:
            self.values[key] = raw

    def seeds(self, command: str) -> int:
        n = self.values["run.seeds"]
        return DEFAULT_SEEDS.get(command, 1) if n is None else n

    def echo(self) -> str:
        """Resolved configuration as INI text, sections and keys sorted."""
        out = io.StringIO()
        section = None
        for key in sorted(self.values):
            sec, name = key.split(".", 1)
            if sec != section:
                if section is not None:
                    out.write("\n")
                out.write(f"[{sec}]\n")
                section = sec
            out.write(f"{name} = {_format(self.values[key])}\n")
        return out.getvalue()

    # --- builders ---------------------------------------------------------

    def mixture(self) -> MixtureModel:
        path = self.values["mixture.file"]
        if path is None:
            return default_mixture()
        full = Path(path) if Path(path).is_absolute() else self.base_dir / path
        try:
            return MixtureModel.from_file(full)
        except (OSError, ValueError, SelguideError) as exc:
            raise ConfigError(f"mixture.file: cannot load {full}: {exc}", "mixture.file") from exc

    def run_config(self) -> RunConfig:
        v = self.values
        if v["schedule.num_steps"] < 1:
            raise ConfigError("schedule.num_steps: must be a positive integer", "schedule.num_steps")
        try:
            schedule = build_schedule(v["schedule.kind"], v["schedule.num_steps"], v["schedule.beta_min"], v["schedule.beta_max"])
        except SelguideError as exc:
            raise ConfigError(f"schedule.beta_min/beta_max: {exc}", "schedule.beta_min") from exc
        try:
            guidance = GuidanceSpec(v["guidance.scale"], v["guidance.skip_start_frac"], v["guidance.skip_end_frac"])
        except SelguideError as exc:
            raise ConfigError(f"guidance.scale/skip_*_frac: {exc}", "guidance.scale") from exc
        try:
            cost = CostModel(v["cost.eval_cost"], v["cost.iter_overhead"])
        except ValueError as exc:
            raise ConfigError(f"cost.eval_cost/iter_overhead: {exc}", "cost.eval_cost") from exc
        mixture = self.mixture()
        if v["run.condition"] is not None and v["run.condition"] not in mixture.labels:
            raise ConfigError(
                f"run.condition: label {v['run.condition']} not in mixture labels {list(mixture.labels)}",
                "run.condition",
            )
        if not 0 <= v["run.seed"] < 2**64:
            raise ConfigError("run.seed: must be a 64-bit unsigned integer", "run.seed")
        if v["run.seeds"] is not None and v["run.seeds"] < 1:
            raise ConfigError("run.seeds: must be at least 1", "run.seeds")
        return RunConfig(
            schedule=schedule,
            guidance=guidance,
            mixture=mixture,
            condition=v["run.condition"],
            sampler_kind=v["run.sampler"],
            seed=v["run.seed"],
            cost=cost,
            record_trajectory=v["run.record_trajectory"],
        )


def _parse(key: str, raw: str) -> Any:
    parser, _ = SCHEMA[key]
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: invalid value ({exc})", key) from exc


def defaults() -> Settings:
    return Settings({k: d for k, (_, d) in SCHEMA.items()}, Path.cwd())


def load(path: str | Path | None, overrides: dict[str, Any] | None = None) -> Settings:
    """Read a config file (or start from defaults when ``path`` is None).

    ``overrides`` (``section.key`` -> value) are applied after the file and
    count towards the required keys.

    Raises:
        ConfigError: Syntax errors (with line numbers), unknown keys, bad
            values or missing required keys.
    """
    settings = defaults()
    overrides = overrides or {}
    if path is None:
        for key, value in overrides.items():
            settings.set(key, value)
        return settings
    path = Path(path)
    parser = configparser.ConfigParser(
        interpolation=None, default_section="__none__", inline_comment_prefixes=(";", "#")
    )
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(" ".join(f"{path}: {exc}".split())) from exc
    settings.base_dir = path.parent
    seen = set()
    for section in parser.sections():
        for name, raw in parser.items(section):
            key = f"{section}.{name}"
            if key not in SCHEMA:
                raise ConfigError(f"{path}: unknown config key {key!r}", key)
            settings.values[key] = _parse(key, raw)
            seen.add(key)
    for key, value in overrides.items():
        settings.set(key, value)
        seen.add(key)
    for key in REQUIRED_IN_FILE:
        if key not in seen:
            raise ConfigError(f"{path}: missing required key {key!r}", key)
    return settings
