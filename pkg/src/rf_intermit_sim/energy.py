"""Capacitor energy bookkeeping and the closed-form timing model.

All closed forms work in SI units (joules, watts, seconds).  ``INFINITE``
is a legal, representable outcome of :func:`charge_time` (a supply that can
never build up), not an error; it propagates into :func:`read_rate` as a
read rate of zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

INFINITE = math.inf

US_PER_S = 1_000_000


@dataclass(frozen=True)
class DeviceConfig:
    """Electrical parameters of the tag.

    c_f: reservoir capacitance, farads
    v_charged: regulator turn-on threshold, volts
    v_min: minimum operational voltage, volts
    p_sleep_w: low-power-mode plus leakage draw, watts
    p_active_w: MCU active draw, watts
    p_transmit_w: backscatter-phase draw, watts (defaults to active draw)
    t_execute_us: application-code execution time per wake, microseconds
    t_t_mean_us / t_t_sigma_us: transmit-phase duration statistics
    """

    c_f: float = 100e-6
    v_charged: float = 2.4
    v_min: float = 1.8
    p_sleep_w: float = 20e-6
    p_active_w: float = 2e-3
    p_transmit_w: float | None = None
    t_execute_us: int = 630
    t_t_mean_us: int = 1641
    t_t_sigma_us: int = 0

    def __post_init__(self) -> None:
        if self.c_f <= 0:
            raise ValueError("c_f must be > 0")
        if not self.v_charged > self.v_min > 0:
            raise ValueError("need v_charged > v_min > 0")
        if not self.p_active_w > self.p_sleep_w > 0:
            raise ValueError("need p_active_w > p_sleep_w > 0")
        if self.t_execute_us <= 0:
            raise ValueError("t_execute_us must be > 0")
        if self.t_t_mean_us <= 0 or self.t_t_sigma_us < 0:
            raise ValueError("bad transmit-time statistics")
        if self.p_transmit_w is None:
            object.__setattr__(self, "p_transmit_w", self.p_active_w)
        elif self.p_transmit_w <= 0:
            raise ValueError("p_transmit_w must be > 0")

    @property
    def e_max_j(self) -> float:
        return 0.5 * self.c_f * self.v_charged**2

    @property
    def e_min_j(self) -> float:
        return 0.5 * self.c_f * self.v_min**2

    @property
    def e_stored_j(self) -> float:
        return stored_energy(self)


@dataclass
class EnergyState:
    """Current capacitor energy; voltage is derived, never stored separately."""

    e_j: float
    c_f: float

    @property
    def v_cap(self) -> float:
        return voltage_of(self.e_j, self.c_f)


def stored_energy(cfg: DeviceConfig) -> float:
    """Usable energy of one full charge cycle, between the two thresholds."""
    return stored_energy_between(cfg.c_f, cfg.v_charged, cfg.v_min)


def stored_energy_between(c_f: float, v_hi: float, v_lo: float) -> float:
    """Capacitor energy between two voltage levels (degenerate window allowed)."""
    if c_f <= 0 or v_hi < v_lo or v_lo < 0:
        raise ValueError("need c_f > 0 and v_hi >= v_lo >= 0")
    return 0.5 * c_f * (v_hi**2 - v_lo**2)


def charge_time(e_stored: float, p_charge: float, p_sleep: float) -> float:
    """Seconds to accumulate ``e_stored`` at net power ``p_charge - p_sleep``.

    Returns INFINITE when the harvest cannot exceed the sleep draw
    (boundary included): the capacitor voltage never builds up.
    """
    if e_stored < 0 or p_charge < 0 or p_sleep < 0:
        raise ValueError("negative inputs")
    if p_charge <= p_sleep:
        return INFINITE
    return e_stored / (p_charge - p_sleep)


def active_time(e_stored: float, p_active: float, p_charge: float, t_execute: float) -> float:
    """Seconds the MCU can stay active on the stored budget.

    While the harvest replenishes less than the active draw, the budget
    bounds the stretch; otherwise the stretch is just the code's runtime.
    """
    if e_stored < 0 or p_active < 0 or p_charge < 0 or t_execute < 0:
        raise ValueError("negative inputs")
    if p_active > p_charge:
        return e_stored / (p_active - p_charge)
    return t_execute


def read_rate(t_c: float, t_a: float, t_t: float) -> float:
    """Replies per second for a cycle of ``t_c + t_a + t_t`` seconds (0 if t_c infinite)."""
    if t_a <= 0 or t_t <= 0:
        raise ValueError("t_a and t_t must be > 0")
    if math.isinf(t_c):
        return 0.0
    if t_c < 0:
        raise ValueError("t_c must be >= 0 or INFINITE")
    return 1.0 / (t_c + t_a + t_t)


def integrate(
    state: EnergyState,
    p_in: float,
    p_out: float,
    dt_s: float,
    e_max: float = INFINITE,
) -> EnergyState:
    """Advance the capacitor by ``dt_s`` seconds of constant net power.

    The result is clamped to [0, e_max]; e_max models the regulator
    refusing to accumulate above its turn-on threshold.
    """
    if dt_s < 0:
        raise ValueError("dt_s must be >= 0")
    e = state.e_j + (p_in - p_out) * dt_s
    e = min(max(e, 0.0), e_max)
    return EnergyState(e, state.c_f)


def voltage_of(e: float, c: float) -> float:
    if e < 0 or c <= 0:
        raise ValueError("need e >= 0 and c > 0")
    return math.sqrt(2.0 * e / c)


def time_to_energy_us(e_now: float, e_target: float, net_w: float) -> int | None:
    """Whole microseconds until energy reaches ``e_target`` at constant ``net_w``.

    Returns None when the target is unreachable (wrong sign or zero net).
    Rounds up so the threshold is guaranteed crossed at the returned tick.
    """
    delta = e_target - e_now
    if delta == 0:
        return 0
    if net_w == 0 or (delta > 0) != (net_w > 0):
        return None
    dt = delta / net_w * US_PER_S
    return max(1, math.ceil(dt - 1e-9))
