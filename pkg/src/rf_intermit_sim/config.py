"""Flat dotted-key configuration: file parsing, defaults, object builders.

The module-level types (ChannelParams, DeviceConfig, ...) carry generic
textbook defaults; the config layer shipped here carries the *calibrated*
desk-scale defaults the experiment harness runs with, so that the stock
scenarios land their policy transitions inside the 0.1-0.9 m band.
Calibration knobs live in the ``calibrate.*`` keys and the ``sim calibrate``
command re-derives them from targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import C_LIGHT, ChannelParams, dbi_to_linear, dbm_to_watts
from .device import Policy, TaskSpec
from .energy import DeviceConfig
from .reader import ReaderConfig

#: Single source of truth for config keys: key -> (type, default).
#: Booleans accept true/false/1/0/yes/no in config files.
DEFAULTS: dict[str, tuple[type, object]] = {
    "channel.p_t_dbm": (float, 30.0),
    "channel.g_t_dbi": (float, 9.0),
    "channel.g_r_dbi": (float, 2.0),
    "channel.freq_mhz": (float, 912.5),
    "channel.eta": (float, 0.02515),
    "channel.shadowing_sigma_db": (float, 0.0),
    "channel.coherence_ms": (float, 100.0),
    "device.c_uf": (float, 900.0),
    "device.v_charged": (float, 2.4),
    "device.v_min": (float, 1.8),
    "device.p_sleep_uw": (float, 10.0),
    "device.p_active_mw": (float, 2.4),
    "device.p_transmit_mw": (float, 0.0),  # 0: follow the active draw
    "device.t_execute_ms": (float, 0.630),
    "device.t_t_mean_ms": (float, 1.641),
    "device.t_t_sigma_ms": (float, 0.0),
    "task.total_bytes": (int, 1280),
    "task.fragment_bytes": (int, 32),
    "task.us_per_byte": (float, 825.0),
    "policy": (str, "readme"),
    "policy.iem_sleep_ms": (int, 30),
    "policy.readme_default_ms": (int, 30),
    "readme.k_ms": (float, 2.271),
    "readme.tau": (float, 1.1),
    "readme.window_s": (float, 1.0),
    "readme.period_s": (float, 1.0),
    "readme.max_sleep_ms": (float, 500.0),
    "readme.measure_during_task": (bool, False),
    "reader.query_timeout_ms": (float, 0.7),
    "sweep.base_window_s": (float, 5.0),
    "sweep.min_successes": (int, 100),
    "sweep.max_window_s": (float, 900.0),
    "sweep.settle_timeout_s": (float, 120.0),
    "bench.warmup_s": (float, 2.5),
    "bench.start_timeout_s": (float, 60.0),
    "bench.trial_timeout_s": (float, 300.0),
    "bench.shadowing_sigma_db": (float, 1.5),
    "bench.redraw_cap": (int, 100),
    "calibrate.plateau_rate": (float, 1000.0 / 2.271),
    "calibrate.plateau_d_m": (float, 0.3),
    "calibrate.cem_onset_d_m": (float, 0.4),
    "calibrate.tolerance": (float, 0.05),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw: str):
    typ, _ = DEFAULTS[key]
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_file(path: str | Path) -> dict[str, object]:
    """Read ``key = value`` lines; '#' starts a comment; unknown keys are errors."""
    values: dict[str, object] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


@dataclass(frozen=True)
class AppConfig:
    """Typed view over the flat key-value space."""

    values: dict[str, object] = field(default_factory=dict)

    @staticmethod
    def defaults() -> "AppConfig":
        return AppConfig({k: d for k, (_, d) in DEFAULTS.items()})

    def with_overrides(self, overrides: dict[str, object]) -> "AppConfig":
        merged = dict(self.values)
        for key, val in overrides.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key {key!r}")
            merged[key] = val
        return AppConfig(merged)

    def __getitem__(self, key: str):
        if key in self.values:
            return self.values[key]
        return DEFAULTS[key][1]

    # -- builders ----------------------------------------------------------

    def lambda_m(self) -> float:
        return C_LIGHT / (self["channel.freq_mhz"] * 1e6)

    def channel_params(self, sigma_db: float | None = None) -> ChannelParams:
        return ChannelParams(
            p_t_w=dbm_to_watts(self["channel.p_t_dbm"]),
            g_t=dbi_to_linear(self["channel.g_t_dbi"]),
            g_r=dbi_to_linear(self["channel.g_r_dbi"]),
            lambda_m=self.lambda_m(),
            eta=self["channel.eta"],
            shadowing_sigma_db=(
                self["channel.shadowing_sigma_db"] if sigma_db is None else sigma_db
            ),
        )

    def device_config(self) -> DeviceConfig:
        p_tx = self["device.p_transmit_mw"] * 1e-3
        return DeviceConfig(
            c_f=self["device.c_uf"] * 1e-6,
            v_charged=self["device.v_charged"],
            v_min=self["device.v_min"],
            p_sleep_w=self["device.p_sleep_uw"] * 1e-6,
            p_active_w=self["device.p_active_mw"] * 1e-3,
            p_transmit_w=p_tx if p_tx > 0 else None,
            t_execute_us=int(round(self["device.t_execute_ms"] * 1000)),
            t_t_mean_us=int(round(self["device.t_t_mean_ms"] * 1000)),
            t_t_sigma_us=int(round(self["device.t_t_sigma_ms"] * 1000)),
        )

    def task_spec(self) -> TaskSpec:
        per_byte = self["task.us_per_byte"]
        total = int(round(self["task.total_bytes"] * per_byte))
        fragment = int(round(self["task.fragment_bytes"] * per_byte))
        return TaskSpec(total_work_us=total, fragment_work_us=fragment)

    def policy(self, kind: str | None = None) -> Policy:
        return Policy(
            kind=kind or self["policy"],
            iem_sleep_ms=self["policy.iem_sleep_ms"],
            readme_default_ms=self["policy.readme_default_ms"],
        )

    def reader_config(self) -> ReaderConfig:
        return ReaderConfig(
            k_ms=self["readme.k_ms"],
            tau=self["readme.tau"],
            window_s=self["readme.window_s"],
            period_s=self["readme.period_s"],
            max_sleep_ms=self["readme.max_sleep_ms"],
            query_timeout_ms=self["reader.query_timeout_ms"],
            measure_during_task=self["readme.measure_during_task"],
        )

    def coherence_us(self) -> int:
        return int(round(self["channel.coherence_ms"] * 1000))

    def dump(self) -> str:
        """Config-file text with every key explicit (stable ordering)."""
        lines = [f"{key} = {self[key]}" for key in DEFAULTS]
        return "\n".join(lines) + "\n"


def load_config(path: str | Path | None, overrides: dict[str, object] | None = None) -> AppConfig:
    cfg = AppConfig.defaults()
    if path is not None:
        cfg = cfg.with_overrides(parse_config_file(path))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg
