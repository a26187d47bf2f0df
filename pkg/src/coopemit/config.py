"""
Flat, unit-suffixed experiment configuration.

Configuration files are TOML documents holding only top-level ``key = value``
pairs. Every physical quantity carries its unit in the key name
(``_ns``, ``_per_ns``, ``_rad``, ``_rad_per_ns``); unknown keys are errors.
See ``docs/FORMATS.md`` for the full key list.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .dynamics import DriveKind, DriveProtocol, EmissionModel, EmitterParams
from .instrument import IrfModel
from .interference import HomConfig

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMA", "load_config", "parse_config", "canonical_json", "config_hash"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


_NUM = (int, float)

# key -> (accepted python types, default, help)
SCHEMA: dict = {
    "model": (str, "cooperative", "single | independent | cooperative | superradiant"),
    "gamma_per_ns": (_NUM, None, "radiative decay rate"),
    "gamma_inv_ns": (_NUM, None, "radiative lifetime 1/gamma (alternative to gamma_per_ns)"),
    "gamma_p_per_ns": (_NUM, None, "incoherent pump rate"),
    "gamma_p_inv_ns": (_NUM, None, "1/gamma_p"),
    "gamma_d_per_ns": (_NUM, None, "pure dephasing rate"),
    "gamma_d_inv_ns": (_NUM, None, "1/gamma_d"),
    "gamma_sr_per_ns": (_NUM, None, "collective decay rate of the superradiant model (default 2 gamma)"),
    "drive": (str, "incoherent-cw", "incoherent-cw | coherent-cw | coherent-pulsed"),
    "rabi_rad_per_ns": (_NUM, 0.0, "CW Rabi angular frequency"),
    "detuning_rad_per_ns": ((int, float, list), 0.0, "detuning, scalar or one entry per emitter"),
    "pulse_area_rad": (_NUM, None, "pulse area in rad"),
    "pulse_area_pi": (_NUM, None, "pulse area in multiples of pi (alternative to pulse_area_rad)"),
    "pulse_fwhm_ns": (_NUM, 0.040, "Gaussian pulse FWHM"),
    "period_ns": (_NUM, 12.44, "pulse repetition period"),
    "hom_delay_ns": (_NUM, 12.44, "interferometer arm delay"),
    "polarization_overlap": (_NUM, 1.0, "eta in [0, 1]"),
    "irf_fwhm_ns": (_NUM, 0.240, "Gaussian instrument response FWHM"),
    "apply_irf": (bool, False, "convolve simulated traces with the IRF before writing"),
    "tau_max_ns": (_NUM, None, "largest CW delay (default: 5 slowest relaxation times)"),
    "tau_points": (int, 2001, "number of CW delays in [0, tau_max_ns]"),
    "bin_width_ns": (_NUM, 0.004, "pulsed histogram bin width"),
    "tau_span_ns": (_NUM, None, "pulsed histogram half-span (default 2.5 periods)"),
    "windows_ns": (list, [10.0, 0.3], "integration windows around zero delay"),
    "t_points": (int, 3001, "time points for the intensity command"),
    "t_max_ns": (_NUM, None, "time span for the intensity command (default: one period)"),
    "initial_state": (str, "periodic", "intensity start: periodic | ground | excited"),
    "tail_t_min_ns": (_NUM, 3.0, "start of the exponential tail fit"),
    "sweep_parameter": (str, None, "config key to sweep"),
    "sweep_values": (list, None, "values of the swept key, in that key's unit"),
    "seed": (int, 0, "random seed for synthetic data"),
    "total_counts": (_NUM, 1_000_000, "counts in synthetic histograms"),
    "histogram_path": (str, None, "counts file to fit (synthesised when absent)"),
    "fit_span_ns": (_NUM, None, "half-span of synthesised fit histograms"),
    "fit_bin_width_ns": (_NUM, 0.008, "bin width of synthesised fit histograms"),
    "init_gamma_per_ns": (_NUM, None, "initial gamma for fits"),
    "init_gamma_d_per_ns": (_NUM, None, "initial gamma_d for fits"),
    "init_amplitude": (_NUM, None, "initial amplitude for fits"),
    "fit_background": (bool, False, "fit a flat background in pulsed fits"),
    "g2_zero": (_NUM, None, "measured g2(0) of the pair (fidelity)"),
    "g2_single_zero": (_NUM, None, "measured g2(0) of one emitter (fidelity)"),
    "workers": (int, 1, "parallel sweep workers"),
}

SWEEPABLE = (
    "pulse_area_rad",
    "pulse_area_pi",
    "rabi_rad_per_ns",
    "detuning_rad_per_ns",
    "gamma_per_ns",
    "gamma_p_per_ns",
    "gamma_d_per_ns",
    "pulse_fwhm_ns",
)

_PAIRS = [
    ("gamma_per_ns", "gamma_inv_ns"),
    ("gamma_p_per_ns", "gamma_p_inv_ns"),
    ("gamma_d_per_ns", "gamma_d_inv_ns"),
    ("pulse_area_rad", "pulse_area_pi"),
]


def _check_type(key: str, value: Any):
    types = SCHEMA[key][0]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{key}: expected {_type_name(types)}, got a boolean")
    if not isinstance(value, types):
        raise ConfigError(f"{key}: expected {_type_name(types)}, got {type(value).__name__}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    if isinstance(value, list):
        for item in value:
            if isinstance(item, bool) or not isinstance(item, _NUM) or not math.isfinite(item):
                raise ConfigError(f"{key}: list entries must be finite numbers")


def _type_name(types) -> str:
    types = types if isinstance(types, tuple) else (types,)
    return " or ".join(t.__name__ for t in types)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration values (defaults filled in)."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def replace(self, **updates) -> "ExperimentConfig":
        merged = {k: v for k, v in self.values.items()}
        for key in updates:
            if key not in SCHEMA:
                raise ConfigError(f"unknown configuration key {key!r}")
        for a, b in _PAIRS:
            if a in updates:
                merged[b] = None
            if b in updates:
                merged[a] = None
        merged.update(updates)
        return parse_config({k: v for k, v in merged.items() if v is not None})

    # -- domain objects ----------------------------------------------------

    @property
    def model(self) -> EmissionModel:
        return EmissionModel.parse(self.values["model"])

    def _rate(self, per_ns: str, inv_ns: str, default: float) -> float:
        if self.values.get(per_ns) is not None:
            return float(self.values[per_ns])
        if self.values.get(inv_ns) is not None:
            t = float(self.values[inv_ns])
            if not t > 0:
                raise ConfigError(f"{inv_ns}: must be > 0")
            return 1.0 / t
        return default

    def emitter_params(self) -> EmitterParams:
        try:
            return EmitterParams(
                gamma=self._rate("gamma_per_ns", "gamma_inv_ns", 1.0 / 0.643),
                gamma_p=self._rate("gamma_p_per_ns", "gamma_p_inv_ns", 0.0),
                gamma_d=self._rate("gamma_d_per_ns", "gamma_d_inv_ns", 0.0),
                Gamma_sr=self.values.get("gamma_sr_per_ns"),
            )
        except ValueError as exc:
            raise ConfigError(f"rates: {exc}") from None

    def pulse_area(self) -> float:
        if self.values.get("pulse_area_rad") is not None:
            return float(self.values["pulse_area_rad"])
        if self.values.get("pulse_area_pi") is not None:
            return float(self.values["pulse_area_pi"]) * math.pi
        return math.pi

    def drive(self) -> DriveProtocol:
        det = self.values["detuning_rad_per_ns"]
        try:
            return DriveProtocol(
                kind=DriveKind.parse(self.values["drive"]),
                rabi=float(self.values["rabi_rad_per_ns"]),
                detuning=tuple(det) if isinstance(det, list) else float(det),
                pulse_area=self.pulse_area(),
                pulse_fwhm=float(self.values["pulse_fwhm_ns"]),
                period=float(self.values["period_ns"]),
            )
        except ValueError as exc:
            raise ConfigError(f"drive: {exc}") from None

    def hom(self) -> HomConfig:
        try:
            return HomConfig(
                delay=float(self.values["hom_delay_ns"]),
                polarization_overlap=float(self.values["polarization_overlap"]),
            )
        except ValueError as exc:
            raise ConfigError(f"hom_delay_ns/polarization_overlap: {exc}") from None

    def irf(self) -> IrfModel:
        try:
            return IrfModel(float(self.values["irf_fwhm_ns"]))
        except ValueError as exc:
            raise ConfigError(f"irf_fwhm_ns: {exc}") from None


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a flat mapping and fill in defaults."""
    values = {}
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"{key}: tables are not allowed; the configuration is flat")
        _check_type(key, value)
        values[key] = value
    for a, b in _PAIRS:
        if values.get(a) is not None and values.get(b) is not None:
            raise ConfigError(f"{a} and {b} are mutually exclusive")
    for key, (_, default, _) in SCHEMA.items():
        values.setdefault(key, list(default) if isinstance(default, list) else default)

    try:
        EmissionModel.parse(values["model"])
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None
    try:
        DriveKind.parse(values["drive"])
    except ValueError as exc:
        raise ConfigError(f"drive: {exc}") from None
    if values["initial_state"] not in ("periodic", "ground", "excited"):
        raise ConfigError("initial_state: choose periodic, ground or excited")
    for key in ("tau_points", "t_points"):
        if values[key] < 2:
            raise ConfigError(f"{key}: need at least 2 points")
    for key in ("bin_width_ns", "pulse_fwhm_ns", "period_ns", "irf_fwhm_ns", "total_counts", "fit_bin_width_ns"):
        if not values[key] > 0:
            raise ConfigError(f"{key}: must be > 0")
    if values["workers"] < 1:
        raise ConfigError("workers: must be >= 1")
    if any(w <= 0 for w in values["windows_ns"]):
        raise ConfigError("windows_ns: windows must be > 0")
    sp, sv = values["sweep_parameter"], values["sweep_values"]
    if (sp is None) != (sv is None):
        raise ConfigError("sweep_parameter and sweep_values must be given together")
    if sp is not None:
        if sp not in SWEEPABLE:
            raise ConfigError(f"sweep_parameter: {sp!r} cannot be swept (choose from {', '.join(SWEEPABLE)})")
        if not sv:
            raise ConfigError("sweep_values: must not be empty")
    cfg = ExperimentConfig(values)
    # build the domain objects once so that range errors surface here
    cfg.emitter_params()
    cfg.drive()
    cfg.hom()
    cfg.irf()
    return cfg


def load_config(path: Optional[str], overrides: Optional[list] = None) -> ExperimentConfig:
    """Read a configuration file (or start empty) and apply ``key=value`` overrides.

    Override values use TOML syntax, e.g. ``gamma_d_inv_ns=0.28`` or
    ``model="single"``; bare words are taken as strings.
    """
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path!r}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"configuration {path!r} is not valid TOML: {exc}") from None
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = (s.strip() for s in item.split("=", 1))
        try:
            value = tomllib.loads(f"v = {text}")["v"]
        except tomllib.TOMLDecodeError:
            value = text
        raw[key] = value
    return parse_config(raw)


# settings that change how a run executes but not what it computes
EXECUTION_ONLY = ("workers",)


def canonical_json(cfg: ExperimentConfig) -> str:
    """Sorted-key JSON of every resolved value except execution-only settings.

    This is the input of :func:`config_hash`.
    """
    payload = {k: v for k, v in cfg.values.items() if k not in EXECUTION_ONLY}
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()
