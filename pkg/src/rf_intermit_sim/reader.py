"""Reader-side logic: inventory rounds, read-rate windows, remote scheduling.

Rounds are conceptually back-to-back: a silent round costs the query
timeout, a successful one lasts the tag's transmit duration.  The
implementation materialises only the query that can reach a waiting tag
(the silent stretch is pure arithmetic on the round grid), which keeps the
event count proportional to tag activity instead of wall time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .device import Device, DevicePhase
from .simkernel import US_PER_MS, US_PER_S, EventHandle, Simulator, ms_to_us, s_to_us, us_to_ms


@dataclass(frozen=True)
class EstimatorConstants:
    """Constants of the charge-time estimator.

    k_ms is the non-charging share of a power cycle (active plus transmit
    time); tau is the safety margin applied when converting an estimate
    into a commanded sleep.
    """

    k_ms: float = 2.271
    tau: float = 1.1

    def __post_init__(self) -> None:
        if self.k_ms <= 0:
            raise ValueError("k_ms must be > 0")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")


@dataclass
class ReadRateWindow:
    """Outcome of one fixed-length measurement window."""

    window_s: float
    successes: int

    def __post_init__(self) -> None:
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")
        if self.successes < 0:
            raise ValueError("successes must be >= 0")

    @property
    def r_read(self) -> float:
        return self.successes / self.window_s


def estimate_charge_time(
    r_read: float, constants: EstimatorConstants, max_estimate_ms: float = 500.0
) -> float:
    """Charging time implied by a read rate: 1000/rate minus the cycle constant.

    Saturated rates can push the difference negative; that is clamped to
    zero (power is plentiful).  A zero rate is mapped to a configured
    maximal estimate so the caller can still schedule a bounded back-off.
    """
    if r_read < 0:
        raise ValueError("r_read must be >= 0")
    if r_read == 0:
        return max_estimate_ms
    return max(0.0, 1000.0 / r_read - constants.k_ms)


def compute_sleep_time(tc_est_ms: float, tau: float) -> int:
    """Sleep command: margin times the estimate, rounded up to whole milliseconds.

    Plain ceiling keeps the safety direction exact: rounding can only ever
    lengthen the commanded sleep, never shorten it below the estimate.
    """
    if tc_est_ms < 0:
        raise ValueError("tc_est_ms must be >= 0")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    return int(math.ceil(tau * tc_est_ms))


@dataclass(frozen=True)
class ReaderConfig:
    k_ms: float = 2.271
    tau: float = 1.1
    window_s: float = 1.0
    period_s: float = 1.0
    max_sleep_ms: float = 500.0
    query_timeout_ms: float = 0.7
    measure_during_task: bool = False

    def __post_init__(self) -> None:
        if self.window_s <= 0 or self.period_s <= 0:
            raise ValueError("window_s and period_s must be > 0")
        if self.window_s > self.period_s:
            raise ValueError("window cannot exceed the loop period")
        if self.query_timeout_ms <= 0:
            raise ValueError("query_timeout_ms must be > 0")


@dataclass
class WriteDispatch:
    """One control-loop iteration: measured rate, estimate, command, outcome."""

    time_us: int
    r_read: float
    tc_est_ms: float
    t_sleep_ms: int
    delivered: bool

    def as_csv_row(self) -> str:
        return (
            f"{self.time_us},{self.r_read:.6g},{self.tc_est_ms:.6g},"
            f"{self.t_sleep_ms},{int(self.delivered)}"
        )


class Reader:
    """Interrogator plus server logic driving one tag."""

    def __init__(
        self,
        sim: Simulator,
        device: Device,
        cfg: ReaderConfig | None = None,
        entity: str = "reader",
    ):
        self.sim = sim
        self.device = device
        self.cfg = cfg or ReaderConfig()
        self.entity = entity
        self.constants = EstimatorConstants(self.cfg.k_ms, self.cfg.tau)
        self.timeout_us = ms_to_us(self.cfg.query_timeout_ms)

        self.successes = 0
        self.success_times_us: list[int] = []
        self.write_log: list[WriteDispatch] = []

        self._anchor_us = sim.now  # start of the current round grid
        self._pending_query: EventHandle | None = None
        self._loop_on = False
        self._window_open_us = 0
        self._window_successes_mark = 0

        device.on_waiting = self._on_device_waiting

    # -- round mechanics -----------------------------------------------------

    def _next_query_at(self, t_us: int) -> int:
        """First query instant of the round grid at or after ``t_us``."""
        if t_us <= self._anchor_us:
            return self._anchor_us
        k = -((self._anchor_us - t_us) // self.timeout_us)  # ceil division
        return self._anchor_us + k * self.timeout_us

    def _on_device_waiting(self, now: int) -> None:
        if self._pending_query is not None and not self._pending_query.delivered:
            return
        due = self._next_query_at(now)
        self._pending_query = self.sim.schedule(
            at_us=due, kind="reader-command", callback=self._query
        )

    def _query(self, now: int) -> None:
        self._pending_query = None
        tt_us = self.device.respond_inventory(now)
        if tt_us is None:
            return  # silent round; the grid carries on arithmetically
        self.sim.schedule(tt_us, kind="reader-command", callback=self._round_success)

    def _round_success(self, now: int) -> None:
        self.successes += 1
        self.success_times_us.append(now)
        self._anchor_us = now  # next round begins right after the reply

    # -- synchronous helpers (used by tests and the harness) -------------------

    def inventory_round(self) -> tuple[bool, int]:
        """Run a single round right now; returns (success, duration_us)."""
        now = self.sim.now
        tt_us = self.device.respond_inventory(now)
        if tt_us is not None:
            self.sim.run_until(now + tt_us)
            self.successes += 1
            self.success_times_us.append(self.sim.now)
            self._anchor_us = self.sim.now
            return True, tt_us
        self.sim.run_until(now + self.timeout_us)
        self._anchor_us = self.sim.now
        return False, self.timeout_us

    def measure_read_rate(self, window_s: float) -> ReadRateWindow:
        """Count successful rounds over ``window_s`` of virtual time from now."""
        if window_s <= 0:
            raise ValueError("window_s must be > 0")
        mark = self.successes
        self.sim.run_until(self.sim.now + s_to_us(window_s))
        return ReadRateWindow(window_s, self.successes - mark)

    # -- control loop -----------------------------------------------------------

    def start_control_loop(self) -> None:
        """Repeat measure/estimate/command every period, starting now."""
        if self._loop_on:
            return
        self._loop_on = True
        self._open_window(self.sim.now)

    def _open_window(self, now: int) -> None:
        self._window_open_us = now
        self._window_successes_mark = self.successes
        self.sim.schedule(
            s_to_us(self.cfg.window_s),
            kind="measurement-window-close",
            callback=self._close_window,
        )

    def _close_window(self, now: int) -> None:
        window = ReadRateWindow(
            self.cfg.window_s, self.successes - self._window_successes_mark
        )
        suppressed = self.device.task_active and not self.cfg.measure_during_task
        if not suppressed:
            tc_est = estimate_charge_time(
                window.r_read, self.constants, self.cfg.max_sleep_ms
            )
            sleep_ms = compute_sleep_time(tc_est, self.constants.tau)
            delivered = self.device.handle_write_sleeptime(sleep_ms)
            self.write_log.append(
                WriteDispatch(now, window.r_read, tc_est, sleep_ms, delivered)
            )
            self.sim.record(self.entity, "write_dispatch", sleep_ms)
        gap_us = s_to_us(self.cfg.period_s - self.cfg.window_s)
        self.sim.schedule(gap_us, kind="measurement-window-close", callback=self._open_window)

    # -- exports -----------------------------------------------------------------

    def write_log_csv(self) -> str:
        lines = ["time_us,r_read,tc_est_ms,t_sleep_ms,delivered"]
        lines.extend(w.as_csv_row() for w in self.write_log)
        return "\n".join(lines) + "\n"
