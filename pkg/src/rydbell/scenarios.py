"""Named scenario runners: from a resolved config to a result bundle.

Each scenario mirrors one characterization of the reference experiment:
collective Rabi oscillations, the preparation-verification fringe, the
two-photon correlation scan with its visibilities and fidelity bound, the
four-setting Bell test, and the transmission budget check.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__, analysis
from .config import ExperimentConfig
from .errors import ConfigurationError
from .montecarlo import (
    SAMPLER_BACKEND,
    CountsTable,
    SeedPolicy,
    sample_counts,
    scan,
)
from .optics import AnalyzerSetting, apply_losses, joint_click_distribution
from .presets import CHSH_SETTINGS_DEG
from .protocol import ProtocolConfig, run_protocol

COUNTS_FILE = "counts.tsv"
RESULTS_FILE = "results.json"


@dataclass
class ResultBundle:
    """Everything one scenario run produces, ready for serialization."""

    config: dict[str, Any]
    tables: list[CountsTable]
    fits: dict[str, Any] = field(default_factory=dict)
    derived: dict[str, Any] = field(default_factory=dict)
    runtime: dict[str, Any] = field(default_factory=dict)

    def counts_rows(self) -> list[tuple]:
        """Flat (point, grid value, settings, outcomes, count) rows."""
        rows = []
        for table in self.tables:
            s1, s2 = table.settings
            label = f"t1={s1.theta:.6f},p1={s1.phi:.6f},t2={s2.theta:.6f},p2={s2.phi:.6f}"
            grid = "" if table.grid_value is None else f"{table.grid_value:.9g}"
            for a, b, n in table.canonical_rows():
                rows.append((table.point_index, grid, label, a, b, n))
        return rows

    def counts_text(self) -> str:
        lines = ["point\tgrid_value\tsettings\toutcome_1\toutcome_2\tcount"]
        for row in self.counts_rows():
            lines.append("\t".join(str(v) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, outdir: str | Path) -> dict[str, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        counts_path = outdir / COUNTS_FILE
        counts_path.write_text(self.counts_text())
        results_path = outdir / RESULTS_FILE
        payload = {
            "config": self.config,
            "fits": self.fits,
            "derived": self.derived,
            "runtime": self.runtime,
            "counts_file": COUNTS_FILE,
        }
        results_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return {"results": results_path, "counts": counts_path}


def _protocol(config: ExperimentConfig, variant: str) -> ProtocolConfig:
    return ProtocolConfig.standard(
        variant,
        retrieval_efficiency=config.preset.loss_chain.retrieval,
        noise=config.preset.noise,
    )


def _eigen_settings() -> tuple[AnalyzerSetting, AnalyzerSetting]:
    return (AnalyzerSetting(0.0, 0.0, 1), AnalyzerSetting(0.0, 0.0, 2))


def _superposition_settings() -> tuple[AnalyzerSetting, AnalyzerSetting]:
    return (AnalyzerSetting(math.pi / 4, 0.0, 1), AnalyzerSetting(math.pi / 4, 0.0, 2))


def run_scenario(config: ExperimentConfig) -> ResultBundle:
    """Dispatch on the scenario name; deterministic given (config, seed)."""
    started = time.perf_counter()
    runner = {
        "rabi-scan": _run_rabi_scan,
        "prep-verify": _run_prep_verify,
        "entangle-scan": _run_entangle_scan,
        "chsh": _run_chsh,
        "efficiency-budget": _run_efficiency_budget,
    }[config.scenario]
    bundle = runner(config)
    bundle.runtime = {
        "wall_seconds": round(time.perf_counter() - started, 3),
        "sampler_backend": SAMPLER_BACKEND,
        "version": __version__,
    }
    return bundle


def _run_rabi_scan(config: ExperimentConfig) -> ResultBundle:
    preset = config.preset
    probe = ProtocolConfig.rabi_probe(
        config.rabi_target,
        efficiency=preset.loss_chain.retrieval,
        noise=preset.noise,
    )
    tables = scan(
        probe,
        "pulse_duration",
        config.scan_values,
        config.shots,
        SeedPolicy(config.master_seed),
        settings=_eigen_settings(),
        loss_chain=preset.loss_chain,
        detector=preset.detector(multiplexed=True),
        workers=config.workers,
    )
    series = analysis.rabi_series(tables, register=2)
    fit = analysis.fit_rabi(series, shots_per_point=config.shots)
    return ResultBundle(
        config=config.to_dict(),
        tables=tables,
        fits={
            "rabi": {
                "omega_rad_per_ns": fit.omega,
                "omega_err": fit.omega_err,
                "decay_time_ns": fit.decay_time if math.isfinite(fit.decay_time) else None,
                "amplitude": fit.amplitude,
                "offset": fit.offset,
                "residual_norm": fit.residual_norm,
            }
        },
        derived={
            "target": config.rabi_target,
            "pi_time_ns": fit.pi_time,
            "pi_time_err_ns": fit.pi_time * (fit.omega_err / fit.omega) if fit.omega else None,
        },
    )


def _run_prep_verify(config: ExperimentConfig) -> ResultBundle:
    preset = config.preset
    protocol = _protocol(config, "skip_entangle_phase")
    tables = scan(
        protocol,
        "analyzer_phase",
        config.scan_values,
        config.shots,
        SeedPolicy(config.master_seed),
        settings=_superposition_settings(),
        loss_chain=preset.loss_chain,
        detector=preset.detector(multiplexed=True),
        scan_register=2,
        workers=config.workers,
    )
    fit = analysis.fit_fringe(analysis.fringe_series(tables, register=2))
    return ResultBundle(
        config=config.to_dict(),
        tables=tables,
        fits={"fringe": _fringe_dict(fit)},
        derived={
            "visibility": fit.visibility,
            "visibility_err": fit.visibility_err,
        },
    )


def _fringe_dict(fit: analysis.FringeFit) -> dict[str, Any]:
    return {
        "visibility": fit.visibility,
        "visibility_err": fit.visibility_err,
        "phase_offset": fit.phase_offset,
        "mean_level": fit.mean_level,
        "minus_visibility": fit.minus_visibility,
    }


def _run_entangle_scan(config: ExperimentConfig) -> ResultBundle:
    preset = config.preset
    protocol = _protocol(config, "full")
    seeds = SeedPolicy(config.master_seed)
    detector = preset.detector(multiplexed=True)
    n_points = len(config.scan_values)

    eigen_tables = scan(
        protocol,
        "analyzer_phase",
        config.scan_values,
        config.shots,
        seeds,
        settings=_eigen_settings(),
        loss_chain=preset.loss_chain,
        detector=detector,
        scan_register=2,
        stream_offset=0,
        workers=config.workers,
    )
    super_tables = scan(
        protocol,
        "analyzer_phase",
        config.scan_values,
        config.shots,
        seeds,
        settings=_superposition_settings(),
        loss_chain=preset.loss_chain,
        detector=detector,
        scan_register=2,
        stream_offset=n_points,
        workers=config.workers,
    )

    v1, v1_err = analysis.pooled_eigenbasis_visibility(eigen_tables)
    fringe = analysis.fit_fringe(analysis.coincidence_fringe_series(super_tables))
    v2, v2_err = fringe.visibility, fringe.visibility_err
    fidelity, fidelity_err = analysis.fidelity_bound(max(v1, 0.0), v2, v1_err, v2_err)

    return ResultBundle(
        config=config.to_dict(),
        tables=eigen_tables + super_tables,
        fits={"superposition_fringe": _fringe_dict(fringe)},
        derived={
            "v1": v1,
            "v1_err": v1_err,
            "v2": v2,
            "v2_err": v2_err,
            "fidelity_bound": fidelity,
            "fidelity_bound_err": fidelity_err,
        },
    )


def _run_chsh(config: ExperimentConfig) -> ResultBundle:
    preset = config.preset
    protocol = _protocol(config, "full")
    chain = preset.bell_loss_chain()
    detector = preset.detector(multiplexed=False)
    seeds = SeedPolicy(config.master_seed)

    rho = run_protocol(protocol)
    rho = apply_losses(rho, chain, 1)
    rho = apply_losses(rho, chain, 2)

    tables = []
    e_values = []
    for index, (alpha_deg, beta_deg) in enumerate(CHSH_SETTINGS_DEG):
        s1 = AnalyzerSetting(math.radians(alpha_deg), 0.0, 1)
        s2 = AnalyzerSetting(math.radians(beta_deg), 0.0, 2)
        dist = joint_click_distribution(rho, s1, s2, detector)
        table = sample_counts(
            dist,
            config.shots,
            detector,
            seeds,
            point_index=index,
            workers=config.workers,
            grid_value=float(index),
        )
        tables.append(table)
        e_values.append(analysis.correlation_E(table))

    bell = analysis.chsh_S(*e_values)
    return ResultBundle(
        config=config.to_dict(),
        tables=tables,
        fits={},
        derived={
            "settings_deg": [list(pair) for pair in CHSH_SETTINGS_DEG],
            "e_values": [e for e, _ in e_values],
            "e_sigmas": [s for _, s in e_values],
            "s_value": bell.s_value,
            "sigma_s": bell.sigma_s,
            "violation_sigmas": bell.violation_sigmas,
        },
    )


def _run_efficiency_budget(config: ExperimentConfig) -> ResultBundle:
    preset = config.preset
    protocol = _protocol(config, "skip_entangle_phase")
    chain = preset.loss_chain
    detector = preset.detector(multiplexed=True)

    rho = run_protocol(protocol)
    rho = apply_losses(rho, chain, 1)
    rho = apply_losses(rho, chain, 2)
    dist = joint_click_distribution(rho, *_eigen_settings(), detector)
    table = sample_counts(
        dist, config.shots, detector, SeedPolicy(config.master_seed),
        workers=config.workers, grid_value=0.0,
    )

    clicks = table.shots - table.register_clicks(2)["no_click"]
    probability = clicks / table.shots
    return ResultBundle(
        config=config.to_dict(),
        tables=[table],
        fits={},
        derived={
            "detection_probability": probability,
            "detected_clicks": clicks,
            "expected_end_to_end": chain.end_to_end(),
            "budget_factors": chain.factors(),
        },
    )


def rerun_from_echo(echo: dict[str, Any]) -> ResultBundle:
    """Re-execute a bundle's echoed config (round-trip support)."""
    from .config import build_config

    return run_scenario(build_config(echo))


def bundles_counts_equal(a: ResultBundle, b: ResultBundle) -> bool:
    return a.counts_text() == b.counts_text()


def load_bundle_config(path: str | Path) -> dict[str, Any]:
    payload = json.loads(Path(path).read_text())
    if "config" not in payload:
        raise ConfigurationError(f"{path} does not look like a results file")
    return payload["config"]
