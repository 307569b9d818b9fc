"""Free-space power transfer from reader antenna to tag harvester.

Received power follows the inverse-square free-space transmission law; the
harvester converts a fixed fraction of it.  An optional log-normal
shadowing overlay models desk-scale channel variation and is sampled on a
fixed virtual-time grid so that two simulations with the same seed see the
same channel realization regardless of device behaviour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .simkernel import Simulator

C_LIGHT = 299_792_458.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def dbi_to_linear(dbi: float) -> float:
    return 10.0 ** (dbi / 10.0)


def db_to_factor(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Link parameters in linear units (conversions happen at the CLI/config layer).

    p_t_w: transmit power, watts
    g_t, g_r: antenna gains, dimensionless
    lambda_m: carrier wavelength, metres (default mid-UHF RFID band)
    eta: harvester efficiency in (0, 1]
    shadowing_sigma_db: log-normal shadowing std-dev in dB; 0 disables noise
    """

    p_t_w: float = 1.0
    g_t: float = dbi_to_linear(9.0)
    g_r: float = dbi_to_linear(2.0)
    lambda_m: float = 0.3286
    eta: float = 0.3
    shadowing_sigma_db: float = 0.0

    def __post_init__(self) -> None:
        if self.p_t_w <= 0:
            raise ValueError("p_t_w must be > 0")
        if self.g_t <= 0 or self.g_r <= 0:
            raise ValueError("antenna gains must be > 0")
        if self.lambda_m <= 0:
            raise ValueError("lambda_m must be > 0")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be >= 0")


def received_power(params: ChannelParams, d: float) -> float:
    """Power at the tag antenna for separation ``d`` metres (deterministic)."""
    if d <= 0:
        raise ValueError("far-field model requires d > 0")
    return params.p_t_w * params.g_t * params.g_r * params.lambda_m**2 / (4.0 * math.pi * d) ** 2


def harvested_power(
    params: ChannelParams, d: float, rng: np.random.Generator | None = None
) -> float:
    """Harvester output: efficiency times received power, with optional shadowing.

    When shadowing is enabled the result is multiplied by ``10^(X/10)`` with
    ``X ~ Normal(0, sigma_db)``; the median of the noisy output equals the
    noiseless value.
    """
    p = params.eta * received_power(params, d)
    if params.shadowing_sigma_db > 0.0:
        if rng is None:
            raise ValueError("shadowing enabled but no random source supplied")
        x_db = rng.normal(0.0, params.shadowing_sigma_db)
        p *= db_to_factor(x_db)
    return p


class HarvestSource:
    """Piecewise-constant harvest power feeding a device."""

    current_w: float

    def start(self, sim: Simulator, on_change: Callable[[int], None]) -> None:
        raise NotImplementedError


class FixedHarvest(HarvestSource):
    """Constant harvest power; tests can step it to provoke transitions."""

    def __init__(self, power_w: float):
        self.current_w = float(power_w)
        self._on_change: Callable[[int], None] | None = None
        self._sim: Simulator | None = None

    def start(self, sim: Simulator, on_change: Callable[[int], None]) -> None:
        self._sim = sim
        self._on_change = on_change

    def set_power(self, power_w: float) -> None:
        self.current_w = float(power_w)
        if self._sim is not None and self._on_change is not None:
            self._on_change(self._sim.now)


class FriisHarvest(HarvestSource):
    """Distance-driven harvest power with optional gridded shadowing.

    With shadowing enabled the multiplicative factor is redrawn every
    ``coherence_us`` of virtual time from the simulator's ``channel``
    stream, so the noise sequence depends only on (seed, time), never on
    what the device happens to be doing.
    """

    def __init__(
        self,
        params: ChannelParams,
        d_m: float,
        coherence_us: int = 100_000,
        stream_name: str = "channel",
    ):
        if coherence_us <= 0:
            raise ValueError("coherence_us must be > 0")
        self.params = params
        self.d_m = d_m
        self.coherence_us = coherence_us
        self.stream_name = stream_name
        self.current_w = params.eta * received_power(params, d_m)
        self._sim: Simulator | None = None
        self._on_change: Callable[[int], None] | None = None

    def start(self, sim: Simulator, on_change: Callable[[int], None]) -> None:
        self._sim = sim
        self._on_change = on_change
        if self.params.shadowing_sigma_db > 0.0:
            self._resample(sim.now)

    def set_distance(self, d_m: float) -> None:
        """Step change of operating distance mid-run."""
        if d_m <= 0:
            raise ValueError("d_m must be > 0")
        self.d_m = d_m
        if self._sim is None:
            self.current_w = self.params.eta * received_power(self.params, d_m)
            return
        if self.params.shadowing_sigma_db > 0.0:
            self._draw(self._sim)
        else:
            self.current_w = self.params.eta * received_power(self.params, d_m)
        if self._on_change is not None:
            self._on_change(self._sim.now)

    def _draw(self, sim: Simulator) -> None:
        self.current_w = harvested_power(self.params, self.d_m, sim.stream(self.stream_name))

    def _resample(self, now: int) -> None:
        sim = self._sim
        assert sim is not None
        self._draw(sim)
        if self._on_change is not None:
            self._on_change(now)
        sim.schedule(self.coherence_us, kind="harvest-resample", callback=self._resample)
