"""Run configuration: strict JSON schema, defaults, presets.

Configs are nested JSON objects with the blocks ``system``, ``channel``,
``roi``, ``codebook``, ``combiner``, ``detection``, ``montecarlo`` and
``output``.  Unknown keys are rejected and every violation names the
offending field path.  An empty object resolves to the desk-scale preset.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass

from .codebook import PgdParams
from .core import ArrayConfig, ChannelParams, FrequencyGrid, RegionOfInterest
from .harness import CODEBOOK_METHODS, COMBINER_METHODS, Scenario
from .ttd import TtdConfig


class ConfigError(ValueError):
    """Configuration file violates the schema."""


_DESK_DEFAULTS: dict = {
    "system": {
        "fc_hz": 60e9,
        "bandwidth_hz": 6e9,
        "n_subcarriers": 64,
        "n_symbols": 16,
        "n_elements": 64,
        "cp_fraction": 0.125,
        "noise_power": 40.0,
        "tx_power": 1.0,
    },
    "channel": {
        "rician_k_db": 30.0,
        "n_scatterers": 3,
        "phase_noise_deg": 2.0,
    },
    "roi": {
        "theta_min_deg": -60.0,
        "theta_max_deg": 60.0,
        "r_min_m": 2.0,
        "r_max_m": 6.0,
        "angle_step_deg": 1.0,
        "range_step_m": 0.5,
    },
    "codebook": {
        "method": "fairness",
        "methods": None,
        "size": 12,
        "n_rings": 2,
        "q_subapertures": 4,
        "pgd": {
            "step_size": 1.0,
            "beta0": None,
            "beta_growth": 2.0,
            "epoch_len": 50,
            "max_iters": 300,
            "rel_tol": 1e-6,
            "backtrack": 0.5,
        },
        "ttd": {
            "n_units": 4,
            "resolution_s": 50e-9,
            "mode": "ideal_full",
        },
    },
    "combiner": {
        "method": "mrc",
        "mu": 0.5,
        "guard_bins": 1,
    },
    "detection": {
        "pfa_target": 0.01,
        "gate_bins": 1,
        "calibration_trials": 2000,
    },
    "montecarlo": {
        "trials": 2000,
        "seed": 1234,
        "velocity_span_mps": 0.0,
        "n_users": 225,
    },
    "output": {},
}


def desk_preset() -> dict:
    """Desk-scale defaults: minutes-scale runtime, ultra-wideband ratio kept."""
    return copy.deepcopy(_DESK_DEFAULTS)


def paper_preset() -> dict:
    """Full-scale constants: 60 GHz carrier, 5 GHz band, 512 x 256 frame,
    400-element ULA (~1 m aperture), 7-15 m region, 1e5 trials."""
    cfg = desk_preset()
    cfg["system"].update(
        fc_hz=60e9, bandwidth_hz=5e9, n_subcarriers=512, n_symbols=256, n_elements=400
    )
    cfg["channel"].update(rician_k_db=30.0, n_scatterers=3, phase_noise_deg=2.0)
    cfg["roi"].update(theta_min_deg=-60.0, theta_max_deg=60.0, r_min_m=7.0, r_max_m=15.0)
    cfg["codebook"]["ttd"].update(n_units=4, resolution_s=50e-9, mode="quantized_subarray")
    cfg["codebook"]["n_rings"] = 20
    cfg["montecarlo"]["trials"] = 100_000
    return cfg


def _require_type(value, kinds, path: str):
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"{path}: expected {' or '.join(k.__name__ for k in kinds)}")
    return value


def _positive(value, path: str):
    if value <= 0:
        raise ConfigError(f"{path}: must be > 0")
    return value


def _nonnegative(value, path: str):
    if value < 0:
        raise ConfigError(f"{path}: must be >= 0")
    return value


def _merge(defaults: dict, user: dict, path: str = "") -> dict:
    out = {}
    for key, default in defaults.items():
        here = f"{path}.{key}" if path else key
        if key in user:
            value = user[key]
            if isinstance(default, dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"{here}: expected an object")
                out[key] = _merge(default, value, here)
            else:
                out[key] = value
        else:
            out[key] = copy.deepcopy(default)
    for key in user:
        if key not in defaults:
            here = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key: {here}")
    return out


def _validate(cfg: dict) -> None:
    sys_ = cfg["system"]
    for key in ("fc_hz", "bandwidth_hz", "noise_power", "tx_power"):
        _positive(_require_type(sys_[key], (int, float), f"system.{key}"), f"system.{key}")
    for key in ("n_subcarriers", "n_symbols", "n_elements"):
        _positive(_require_type(sys_[key], (int,), f"system.{key}"), f"system.{key}")
    _nonnegative(_require_type(sys_["cp_fraction"], (int, float), "system.cp_fraction"), "system.cp_fraction")
    if sys_["fc_hz"] <= sys_["bandwidth_hz"] / 2:
        raise ConfigError("system.fc_hz: must exceed bandwidth_hz / 2")
    if sys_["n_elements"] < 2:
        raise ConfigError("system.n_elements: must be >= 2")

    chan = cfg["channel"]
    _nonnegative(_require_type(chan["rician_k_db"], (int, float), "channel.rician_k_db"), "channel.rician_k_db")
    _nonnegative(_require_type(chan["n_scatterers"], (int,), "channel.n_scatterers"), "channel.n_scatterers")
    _nonnegative(
        _require_type(chan["phase_noise_deg"], (int, float), "channel.phase_noise_deg"), "channel.phase_noise_deg"
    )

    roi = cfg["roi"]
    for key in roi:
        _require_type(roi[key], (int, float), f"roi.{key}")
    if not roi["theta_min_deg"] < roi["theta_max_deg"]:
        raise ConfigError("roi.theta_min_deg: must be < roi.theta_max_deg")
    if not -90.0 <= roi["theta_min_deg"] and roi["theta_max_deg"] <= 90.0:
        raise ConfigError("roi.theta_min_deg: angles must lie within [-90, 90] degrees")
    if not 0 < roi["r_min_m"] < roi["r_max_m"]:
        raise ConfigError("roi.r_min_m: need 0 < r_min_m < r_max_m")
    _positive(roi["angle_step_deg"], "roi.angle_step_deg")
    _positive(roi["range_step_m"], "roi.range_step_m")

    cb = cfg["codebook"]
    if cb["method"] not in CODEBOOK_METHODS:
        raise ConfigError(f"codebook.method: must be one of {CODEBOOK_METHODS}")
    if cb["methods"] is not None:
        if not isinstance(cb["methods"], list) or not cb["methods"]:
            raise ConfigError("codebook.methods: expected a non-empty list or null")
        for m in cb["methods"]:
            if m not in CODEBOOK_METHODS:
                raise ConfigError(f"codebook.methods: must be among {CODEBOOK_METHODS}")
    _positive(_require_type(cb["size"], (int,), "codebook.size"), "codebook.size")
    _positive(_require_type(cb["n_rings"], (int,), "codebook.n_rings"), "codebook.n_rings")
    _positive(_require_type(cb["q_subapertures"], (int,), "codebook.q_subapertures"), "codebook.q_subapertures")
    pgd = cb["pgd"]
    for key in ("step_size", "beta_growth", "rel_tol", "backtrack"):
        _positive(_require_type(pgd[key], (int, float), f"codebook.pgd.{key}"), f"codebook.pgd.{key}")
    if pgd["beta0"] is not None:
        _positive(_require_type(pgd["beta0"], (int, float), "codebook.pgd.beta0"), "codebook.pgd.beta0")
    _positive(_require_type(pgd["epoch_len"], (int,), "codebook.pgd.epoch_len"), "codebook.pgd.epoch_len")
    _nonnegative(_require_type(pgd["max_iters"], (int,), "codebook.pgd.max_iters"), "codebook.pgd.max_iters")
    ttd = cb["ttd"]
    _positive(_require_type(ttd["n_units"], (int,), "codebook.ttd.n_units"), "codebook.ttd.n_units")
    _positive(_require_type(ttd["resolution_s"], (int, float), "codebook.ttd.resolution_s"), "codebook.ttd.resolution_s")
    if ttd["mode"] not in ("ideal_full", "quantized_subarray"):
        raise ConfigError("codebook.ttd.mode: must be 'ideal_full' or 'quantized_subarray'")

    comb = cfg["combiner"]
    if comb["method"] not in COMBINER_METHODS:
        raise ConfigError(f"combiner.method: must be one of {COMBINER_METHODS}")
    if not 0 <= comb["mu"] <= 1:
        raise ConfigError("combiner.mu: must lie in [0, 1]")
    _nonnegative(_require_type(comb["guard_bins"], (int,), "combiner.guard_bins"), "combiner.guard_bins")

    det = cfg["detection"]
    if not 0 < det["pfa_target"] < 1:
        raise ConfigError("detection.pfa_target: must lie in (0, 1)")
    _nonnegative(_require_type(det["gate_bins"], (int,), "detection.gate_bins"), "detection.gate_bins")
    _positive(
        _require_type(det["calibration_trials"], (int,), "detection.calibration_trials"),
        "detection.calibration_trials",
    )

    mc = cfg["montecarlo"]
    _positive(_require_type(mc["trials"], (int,), "montecarlo.trials"), "montecarlo.trials")
    _require_type(mc["seed"], (int,), "montecarlo.seed")
    _nonnegative(
        _require_type(mc["velocity_span_mps"], (int, float), "montecarlo.velocity_span_mps"),
        "montecarlo.velocity_span_mps",
    )
    _positive(_require_type(mc["n_users"], (int,), "montecarlo.n_users"), "montecarlo.n_users")


@dataclass
class RunConfig:
    """Fully resolved, validated configuration."""

    resolved: dict

    @property
    def digest(self) -> str:
        return config_digest(self.resolved)

    def array(self) -> ArrayConfig:
        return ArrayConfig.half_wavelength(self.resolved["system"]["n_elements"], self.resolved["system"]["fc_hz"])

    def grid(self) -> FrequencyGrid:
        s = self.resolved["system"]
        return FrequencyGrid(s["fc_hz"], s["bandwidth_hz"], s["n_subcarriers"])

    def roi(self) -> RegionOfInterest:
        r = self.resolved["roi"]
        return RegionOfInterest(
            math.radians(r["theta_min_deg"]),
            math.radians(r["theta_max_deg"]),
            r["r_min_m"],
            r["r_max_m"],
            math.radians(r["angle_step_deg"]),
            r["range_step_m"],
        )

    def channel(self) -> ChannelParams:
        c = self.resolved["channel"]
        return ChannelParams(
            rician_k_db=c["rician_k_db"],
            n_scatterers=c["n_scatterers"],
            phase_noise_deg=c["phase_noise_deg"],
            noise_power=self.resolved["system"]["noise_power"],
            seed=self.resolved["montecarlo"]["seed"],
        )

    def pgd(self) -> PgdParams:
        p = self.resolved["codebook"]["pgd"]
        return PgdParams(
            step_size=p["step_size"],
            beta0=p["beta0"],
            beta_growth=p["beta_growth"],
            epoch_len=p["epoch_len"],
            max_iters=p["max_iters"],
            rel_tol=p["rel_tol"],
            backtrack=p["backtrack"],
        )

    def ttd(self) -> TtdConfig:
        t = self.resolved["codebook"]["ttd"]
        return TtdConfig(n_units=t["n_units"], resolution_s=t["resolution_s"], mode=t["mode"])

    def codebook_methods(self) -> list[str]:
        cb = self.resolved["codebook"]
        return list(cb["methods"]) if cb["methods"] else [cb["method"]]

    def scenario(self) -> Scenario:
        r = self.resolved
        return Scenario(
            array=self.array(),
            grid=self.grid(),
            roi=self.roi(),
            channel=self.channel(),
            n_symbols=r["system"]["n_symbols"],
            cp_fraction=r["system"]["cp_fraction"],
            codebook_method=r["codebook"]["method"],
            codebook_size=r["codebook"]["size"],
            n_rings=r["codebook"]["n_rings"],
            q_subapertures=r["codebook"]["q_subapertures"],
            pgd=self.pgd(),
            ttd=self.ttd(),
            combiner_method=r["combiner"]["method"],
            mu=r["combiner"]["mu"],
            guard_bins=r["combiner"]["guard_bins"],
            pfa_target=r["detection"]["pfa_target"],
            gate_bins=r["detection"]["gate_bins"],
            calibration_trials=r["detection"]["calibration_trials"],
            trials=r["montecarlo"]["trials"],
            seed=r["montecarlo"]["seed"],
            velocity_span_mps=r["montecarlo"]["velocity_span_mps"],
            tx_power=r["system"]["tx_power"],
        )


def resolve_config(data: dict) -> RunConfig:
    """Fill defaults, reject unknown keys, validate field values."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    resolved = _merge(_DESK_DEFAULTS, data)
    _validate(resolved)
    return RunConfig(resolved)


def parse_config(path) -> RunConfig:
    """Load and resolve a JSON config file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    return resolve_config(data)


def config_digest(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def write_config_echo(config: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.resolved, fh, indent=1, sort_keys=True)
        fh.write("\n")
