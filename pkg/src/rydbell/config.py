"""Experiment configuration files: loading, validation, canonical echo.

Configs are JSON. Every field is optional except ``scenario``; unknown keys
are rejected and validation errors name the offending field path. A config
resolves to concrete noise/loss/detector values (preset first, inline
overrides second); the resolved echo embedded in a result bundle contains
every number inline, so rerunning from the echo never depends on the preset
table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigurationError
from .optics import LossChain
from .presets import REFERENCE_LOSS_CHAIN, NoisePreset, get_preset
from .protocol import AtomMetadata, NoiseConfig

SCENARIOS = ("rabi-scan", "prep-verify", "entangle-scan", "chsh", "efficiency-budget")

DEFAULT_SHOTS = 100_000
DEFAULT_SEED = 123456789

_NOISE_KEYS = ("blockade_leakage", "rydberg_dephasing", "pulse_area_error", "atom")
_ATOM_KEYS = ("n_atoms", "pi_time_r1_ns", "pi_time_r2_ns")
_LOSS_KEYS = (
    "preparation",
    "retrieval",
    "fiber_coupling",
    "aom_deflection",
    "mz_transmission",
    "detector_efficiency",
)
_DETECTOR_KEYS = ("dark_count_prob", "afterpulse_prob", "swap_register_2")
_SCAN_KEYS = ("start", "stop", "points", "values")
_TOP_KEYS = (
    "scenario",
    "preset",
    "shots",
    "master_seed",
    "workers",
    "scan",
    "noise",
    "loss_chain",
    "detector",
    "bell_switch_transmission",
    "rabi_target",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description."""

    scenario: str
    preset: NoisePreset
    shots: int = DEFAULT_SHOTS
    master_seed: int = DEFAULT_SEED
    workers: int = 1
    scan_values: tuple[float, ...] | None = None
    rabi_target: str = "r1"
    loss_chain_overridden: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"scenario: unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.shots < 1:
            raise ConfigurationError("shots: must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed: must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigurationError("workers: must be >= 1")
        if self.rabi_target not in ("r1", "r2"):
            raise ConfigurationError("rabi_target: must be 'r1' or 'r2'")

    def to_dict(self) -> dict[str, Any]:
        """Self-contained echo; reloading it reproduces this config exactly."""
        preset = self.preset
        return {
            "scenario": self.scenario,
            "preset": preset.name,
            "shots": self.shots,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "scan": None if self.scan_values is None else {"values": list(self.scan_values)},
            "noise": {
                "blockade_leakage": preset.noise.blockade_leakage,
                "rydberg_dephasing": preset.noise.rydberg_dephasing,
                "pulse_area_error": preset.noise.pulse_area_error,
                "atom": {
                    "n_atoms": preset.noise.atom.n_atoms,
                    "pi_time_r1_ns": preset.noise.atom.pi_time_r1_ns,
                    "pi_time_r2_ns": preset.noise.atom.pi_time_r2_ns,
                },
            },
            "loss_chain": {k: getattr(preset.loss_chain, k) for k in _LOSS_KEYS},
            "detector": {
                "dark_count_prob": preset.dark_count_prob,
                "afterpulse_prob": preset.afterpulse_prob,
                "swap_register_2": preset.swap_register_2,
            },
            "bell_switch_transmission": preset.bell_switch_transmission,
            "rabi_target": self.rabi_target,
        }


def _require_keys(section: Mapping[str, Any], allowed, path: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")


def _number(raw: Mapping[str, Any], key: str, path: str, lo=None, hi=None, default=None):
    if key not in raw:
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}.{key}: expected a number, got {value!r}")
    if lo is not None and value < lo or hi is not None and value > hi:
        raise ConfigurationError(f"{path}.{key}: {value} outside [{lo}, {hi}]")
    return float(value)


def _resolve_noise(base: NoiseConfig, raw: Mapping[str, Any]) -> NoiseConfig:
    _require_keys(raw, _NOISE_KEYS, "noise")
    atom = base.atom
    if "atom" in raw:
        _require_keys(raw["atom"], _ATOM_KEYS, "noise.atom")
        section = raw["atom"]
        n_atoms = section.get("n_atoms", atom.n_atoms)
        if not isinstance(n_atoms, int) or n_atoms < 1:
            raise ConfigurationError("noise.atom.n_atoms: must be a positive integer")
        atom = AtomMetadata(
            n_atoms=n_atoms,
            pi_time_r1_ns=_number(section, "pi_time_r1_ns", "noise.atom", 1e-9, None, atom.pi_time_r1_ns),
            pi_time_r2_ns=_number(section, "pi_time_r2_ns", "noise.atom", 1e-9, None, atom.pi_time_r2_ns),
        )
    try:
        return NoiseConfig(
            blockade_leakage=_number(raw, "blockade_leakage", "noise", 0.0, 1.0, base.blockade_leakage),
            rydberg_dephasing=_number(raw, "rydberg_dephasing", "noise", 0.0, 1.0, base.rydberg_dephasing),
            pulse_area_error=_number(raw, "pulse_area_error", "noise", -0.5, 0.5, base.pulse_area_error),
            atom=atom,
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"noise: {exc}") from None


def _resolve_loss_chain(base: LossChain, raw: Mapping[str, Any]) -> LossChain:
    _require_keys(raw, _LOSS_KEYS, "loss_chain")
    values = {}
    for key in _LOSS_KEYS:
        values[key] = _number(raw, key, "loss_chain", 0.0, 1.0, getattr(base, key))
    return LossChain(**values, switch=base.switch)


def build_config(raw: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a parsed JSON object and resolve it against its preset."""
    if not isinstance(raw, Mapping):
        raise ConfigurationError("config root must be a JSON object")
    _require_keys(raw, _TOP_KEYS, "config")
    if "scenario" not in raw:
        raise ConfigurationError("scenario: required field is missing")

    preset_name = raw.get("preset", "ideal")
    try:
        preset = get_preset(preset_name)
    except KeyError as exc:
        raise ConfigurationError(f"preset: {exc.args[0]}") from None

    noise = _resolve_noise(preset.noise, raw.get("noise", {}))
    chain = _resolve_loss_chain(preset.loss_chain, raw.get("loss_chain", {}))

    det_raw = raw.get("detector", {})
    _require_keys(det_raw, _DETECTOR_KEYS, "detector")
    dark = _number(det_raw, "dark_count_prob", "detector", 0.0, 1.0, preset.dark_count_prob)
    afterpulse = _number(det_raw, "afterpulse_prob", "detector", 0.0, 1.0, preset.afterpulse_prob)
    swap = det_raw.get("swap_register_2", preset.swap_register_2)
    if not isinstance(swap, bool):
        raise ConfigurationError("detector.swap_register_2: expected a boolean")

    switch = _number(raw, "bell_switch_transmission", "config", 0.0, 1.0, preset.bell_switch_transmission)

    resolved = NoisePreset(
        name=preset.name,
        noise=noise,
        dark_count_prob=dark,
        afterpulse_prob=afterpulse,
        swap_register_2=swap,
        bell_switch_transmission=switch,
        loss_chain=chain,
    )

    shots = raw.get("shots", DEFAULT_SHOTS)
    if isinstance(shots, bool) or not isinstance(shots, int) or shots < 1:
        raise ConfigurationError("shots: must be a positive integer")
    seed = raw.get("master_seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigurationError("master_seed: must be an unsigned 64-bit integer")
    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigurationError("workers: must be a positive integer")

    scan_values = None
    if raw.get("scan") is not None:
        scan = raw["scan"]
        _require_keys(scan, _SCAN_KEYS, "scan")
        if "values" in scan:
            values = scan["values"]
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigurationError("scan.values: must be a nonempty list of numbers")
            scan_values = tuple(float(v) for v in values)
        else:
            for key in ("start", "stop", "points"):
                if key not in scan:
                    raise ConfigurationError(f"scan.{key}: required when scan.values is absent")
            points = scan["points"]
            if isinstance(points, bool) or not isinstance(points, int) or points < 1:
                raise ConfigurationError("scan.points: must be a positive integer")
            start, stop = float(scan["start"]), float(scan["stop"])
            step = (stop - start) / points
            scan_values = tuple(start + i * step for i in range(points))

    rabi_target = raw.get("rabi_target", "r1")
    scenario = raw["scenario"]

    # The efficiency-budget scenario exists to reproduce the reference
    # transmission budget, so default its chain accordingly.
    if (
        scenario == "efficiency-budget"
        and "loss_chain" not in raw
        and preset_name == "ideal"
    ):
        resolved = NoisePreset(
            name=resolved.name,
            noise=resolved.noise,
            dark_count_prob=resolved.dark_count_prob,
            afterpulse_prob=resolved.afterpulse_prob,
            swap_register_2=resolved.swap_register_2,
            bell_switch_transmission=resolved.bell_switch_transmission,
            loss_chain=REFERENCE_LOSS_CHAIN,
        )

    if scenario in ("chsh", "efficiency-budget"):
        if scan_values is not None:
            raise ConfigurationError(f"scan: not applicable to the {scenario} scenario")
    elif scan_values is None:
        scan_values = _default_scan_values(scenario, rabi_target, noise)

    return ExperimentConfig(
        scenario=scenario,
        preset=resolved,
        shots=shots,
        master_seed=seed,
        workers=workers,
        scan_values=scan_values,
        rabi_target=rabi_target,
        loss_chain_overridden="loss_chain" in raw or preset_name != "ideal",
    )


def _default_scan_values(scenario: str, rabi_target: str, noise: NoiseConfig) -> tuple[float, ...]:
    if scenario == "rabi-scan":
        # One full excitation-probability period: durations up to 2 pi times.
        top = 2.0 * noise.atom.pi_time_ns(rabi_target)
        n = 28
        return tuple(top * i / (n - 1) for i in range(n))
    # Phase scans: a full turn, endpoint excluded.
    n = 24
    return tuple(2.0 * math.pi * i / n for i in range(n))


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file is not valid JSON: {exc}") from None
    return build_config(raw)


def with_overrides(
    config: ExperimentConfig,
    *,
    shots: int | None = None,
    master_seed: int | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Command-line overrides on top of a loaded config."""
    updates = {}
    if shots is not None:
        updates["shots"] = shots
    if master_seed is not None:
        updates["master_seed"] = master_seed
    if workers is not None:
        updates["workers"] = workers
    return replace(config, **updates) if updates else config
