"""Tag-side model: power-cycle state machine, task execution policies, register.

The device is event-driven: between events the capacitor energy evolves
linearly (constant harvest in, constant phase draw out), so threshold
crossings (regulator turn-on, brownout) are predicted analytically and
scheduled as events instead of stepping the clock tick by tick.  Crossing
events are authoritative to within one microsecond tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .channel import HarvestSource
from .energy import DeviceConfig, EnergyState, integrate, time_to_energy_us, voltage_of
from .simkernel import US_PER_MS, EventHandle, SimulationError, Simulator, us_to_ms, us_to_s


class DevicePhase(Enum):
    OFF = "OFF"
    CHARGING = "CHARGING"
    ACTIVE = "ACTIVE"
    WAIT_FOR_QUERY = "WAIT_FOR_QUERY"
    TRANSMIT = "TRANSMIT"
    LPM_SLEEP = "LPM_SLEEP"


#: Transitions the state machine may take.  Brownout exits to OFF from any
#: powered phase; CHARGING has no brownout exit because the load is
#: disconnected below the turn-on threshold.
LEGAL_TRANSITIONS: dict[DevicePhase, set[DevicePhase]] = {
    DevicePhase.OFF: {DevicePhase.CHARGING},
    DevicePhase.CHARGING: {DevicePhase.ACTIVE},
    DevicePhase.ACTIVE: {DevicePhase.WAIT_FOR_QUERY, DevicePhase.LPM_SLEEP, DevicePhase.OFF},
    DevicePhase.WAIT_FOR_QUERY: {DevicePhase.TRANSMIT, DevicePhase.OFF},
    DevicePhase.TRANSMIT: {DevicePhase.CHARGING, DevicePhase.OFF},
    DevicePhase.LPM_SLEEP: {DevicePhase.ACTIVE, DevicePhase.OFF},
}

MIN_TRANSMIT_US = 100  # transmit-time draws are floored here


@dataclass(frozen=True)
class TaskSpec:
    """A long-running workload, divisible into equal sub-task fragments."""

    total_work_us: int
    fragment_work_us: int
    energy_per_us_j: float | None = None  # None: active-mode draw applies

    def __post_init__(self) -> None:
        if not 0 < self.fragment_work_us <= self.total_work_us:
            raise ValueError("need 0 < fragment_work_us <= total_work_us")
        if self.energy_per_us_j is not None and self.energy_per_us_j <= 0:
            raise ValueError("energy_per_us_j must be > 0")

    @property
    def fragments(self) -> int:
        return math.ceil(self.total_work_us / self.fragment_work_us)


@dataclass(frozen=True)
class Policy:
    """Execution scheduling policy.

    cem: run the whole task in one active stretch.
    iem: fixed-length low-power sleep after every fragment.
    readme: sleep the current SLEEPTIME register value after every fragment;
            the register is written remotely and reverts to a default on
            power loss.
    """

    kind: str
    iem_sleep_ms: int = 30
    readme_default_ms: int = 30

    def __post_init__(self) -> None:
        if self.kind not in ("cem", "iem", "readme"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.iem_sleep_ms < 0 or self.readme_default_ms < 0:
            raise ValueError("sleep durations must be >= 0")


class Device:
    """One intermittently powered tag inside a simulation instance."""

    def __init__(
        self,
        sim: Simulator,
        cfg: DeviceConfig,
        harvest: HarvestSource,
        policy: Policy,
        entity: str = "device",
        initial_e_j: float = 0.0,
    ):
        self.sim = sim
        self.cfg = cfg
        self.harvest = harvest
        self.policy = policy
        self.entity = entity

        self.phase = DevicePhase.OFF
        self._e = min(max(initial_e_j, 0.0), cfg.e_max_j)
        self._last_sync_us = 0

        self.sleeptime_ms = policy.readme_default_ms
        self.task: TaskSpec | None = None
        self.task_pending = False
        self.task_active = False
        self._remaining_us = 0
        self._frag_index = 0
        self.task_started_at: int | None = None
        self.task_done_at: int | None = None
        self.task_failed_at: int | None = None
        self.brownout_count = 0

        self.on_waiting = None  # callable(now) hooked up by the reader
        self._timer: EventHandle | None = None
        self._crossing: EventHandle | None = None
        self._in_fragment = False
        self._current_tt_us = 0
        self._started = False

    # -- public surface ------------------------------------------------------

    def start(self) -> None:
        """Attach to the harvest source and begin the power cycle at the current clock."""
        if self._started:
            raise SimulationError("device already started")
        self._last_sync_us = self.sim.now
        self._record_phase()
        self._started = True
        # attaching may fire an immediate harvest sample, which can already
        # pull the device out of OFF via the power-change callback
        self.harvest.start(self.sim, self._on_power_change)
        if self.phase is DevicePhase.OFF:
            self._try_leave_off(self.sim.now)

    def dispatch_task(self, task: TaskSpec) -> None:
        """Queue a task; execution begins at the next regulator turn-on."""
        self.task = task
        self.task_pending = True
        self._remaining_us = task.total_work_us
        self._frag_index = 0
        self.sim.record(self.entity, "dispatch", task.fragments)

    def handle_write_sleeptime(self, value_ms: int) -> bool:
        """Remote register write; silently lost while the device is unpowered."""
        if value_ms < 0:
            raise ValueError("sleep value must be >= 0")
        if self.phase is DevicePhase.OFF:
            self.sim.record(self.entity, "write_lost", value_ms)
            return False
        self.sleeptime_ms = int(value_ms)
        self.sim.record(self.entity, "write_sleeptime", value_ms)
        return True

    def respond_inventory(self, now: int) -> int | None:
        """Reply to a query: returns the transmit duration, or None when silent.

        Only a device sitting in WAIT_FOR_QUERY answers; any other phase is
        silence (unpowered, charging or busy).
        """
        if self.phase is not DevicePhase.WAIT_FOR_QUERY:
            return None
        tt = self._draw_transmit_us()
        self._current_tt_us = tt
        self._enter(DevicePhase.TRANSMIT, now)
        self._timer = self.sim.schedule(
            tt, kind="phase-transition", callback=self._transmit_done
        )
        return tt

    @property
    def energy_j(self) -> float:
        return self._e

    @property
    def v_cap(self) -> float:
        return voltage_of(self._e, self.cfg.c_f)

    # -- energy bookkeeping ----------------------------------------------------

    def _draw_w(self) -> float:
        if self.phase in (DevicePhase.OFF, DevicePhase.CHARGING, DevicePhase.LPM_SLEEP):
            return self.cfg.p_sleep_w
        if self.phase is DevicePhase.TRANSMIT:
            return self.cfg.p_transmit_w
        if self._in_fragment and self.task is not None and self.task.energy_per_us_j:
            return self.task.energy_per_us_j * 1e6
        return self.cfg.p_active_w

    def _sync(self, now: int) -> None:
        dt = now - self._last_sync_us
        if dt < 0:
            raise SimulationError("energy sync going backwards")
        if dt:
            state = integrate(
                EnergyState(self._e, self.cfg.c_f),
                self.harvest.current_w,
                self._draw_w(),
                us_to_s(dt),
                e_max=self.cfg.e_max_j,
            )
            self._e = state.e_j
        self._last_sync_us = now

    def _schedule_crossing(self) -> None:
        self.sim.cancel(self._crossing)
        self._crossing = None
        net = self.harvest.current_w - self._draw_w()
        if self.phase is DevicePhase.CHARGING:
            if self._e >= self.cfg.e_max_j:
                dt = 0
            else:
                dt = time_to_energy_us(self._e, self.cfg.e_max_j, net)
            if dt is not None:
                self._crossing = self.sim.schedule(
                    dt, kind="phase-transition", callback=self._boot
                )
        elif self.phase in (
            DevicePhase.ACTIVE,
            DevicePhase.WAIT_FOR_QUERY,
            DevicePhase.TRANSMIT,
            DevicePhase.LPM_SLEEP,
        ):
            if net < 0:
                dt = time_to_energy_us(self._e, self.cfg.e_min_j, net)
                if self._e <= self.cfg.e_min_j:
                    dt = 0
                if dt is not None:
                    self._crossing = self.sim.schedule(
                        dt, kind="phase-transition", callback=self._brownout
                    )

    def _on_power_change(self, now: int) -> None:
        if not self._started:
            return
        self._sync(now)
        if self.phase is DevicePhase.OFF:
            self._try_leave_off(now)
        else:
            self._schedule_crossing()

    # -- state machine ---------------------------------------------------------

    def _record_phase(self) -> None:
        self.sim.record(self.entity, self.phase.value, self.v_cap)

    def _enter(self, new: DevicePhase, now: int) -> None:
        self._sync(now)
        if new not in LEGAL_TRANSITIONS[self.phase]:
            raise SimulationError(f"illegal transition {self.phase.value} -> {new.value}")
        self.sim.cancel(self._timer)
        self._timer = None
        self._in_fragment = False
        self.phase = new
        self._record_phase()
        if new is DevicePhase.OFF:
            self.sleeptime_ms = self.policy.readme_default_ms
        self._schedule_crossing()

    def _try_leave_off(self, now: int) -> None:
        if self.phase is DevicePhase.OFF and self.harvest.current_w > self.cfg.p_sleep_w:
            self._enter(DevicePhase.CHARGING, now)

    def _boot(self, now: int) -> None:
        self._sync(now)
        # the crossing tick rounds up, so the threshold is reached; pin it
        self._e = self.cfg.e_max_j
        self._enter(DevicePhase.ACTIVE, now)
        self.sim.record(self.entity, "boot", self.v_cap)
        if self.task is not None and (self.task_pending or self._remaining_us > 0):
            self._task_begin(now)
        else:
            self._timer = self.sim.schedule(
                self.cfg.t_execute_us, kind="phase-transition", callback=self._exec_done
            )

    def _exec_done(self, now: int) -> None:
        self._enter(DevicePhase.WAIT_FOR_QUERY, now)
        if self.on_waiting is not None:
            self.on_waiting(now)

    def _transmit_done(self, now: int) -> None:
        self._sync(now)
        self.sim.record(self.entity, "reply", us_to_ms(self._current_tt_us))
        # Cycle end: when the harvest cannot sustain continuous operation the
        # residual application activity runs the reservoir down to the
        # operating floor before the next charge cycle (modeled instantaneous).
        if self.harvest.current_w < self.cfg.p_active_w:
            self._e = min(self._e, self.cfg.e_min_j)
        self._enter(DevicePhase.CHARGING, now)

    def _brownout(self, now: int) -> None:
        self._sync(now)
        self.brownout_count += 1
        self.sim.record(self.entity, "brownout", self.v_cap)
        if self.task_active:
            self.task_failed_at = now
            self.task_active = False
            self.sim.record(self.entity, "task_fail", self._frag_index)
            # no checkpointing: the task restarts from scratch at the next boot
            self.task_pending = True
            self._remaining_us = self.task.total_work_us if self.task else 0
            self._frag_index = 0
        self._enter(DevicePhase.OFF, now)
        self._try_leave_off(now)

    # -- task execution ----------------------------------------------------------

    def _task_begin(self, now: int) -> None:
        assert self.task is not None
        self.task_pending = False
        self.task_active = True
        self._remaining_us = self.task.total_work_us
        self._frag_index = 0
        self.task_started_at = now
        self.task_done_at = None
        self.sim.record(self.entity, "task_start", self.task.fragments)
        self._start_fragment(now)

    def _start_fragment(self, now: int) -> None:
        assert self.task is not None and self.phase is DevicePhase.ACTIVE
        if self.policy.kind == "cem":
            work = self._remaining_us
        else:
            work = min(self.task.fragment_work_us, self._remaining_us)
        self._in_fragment = True
        self._sync(now)  # draw may differ inside a fragment
        self._schedule_crossing()
        self._timer = self.sim.schedule(
            work, kind="timer-expiry", callback=self._fragment_done, payload=work
        )

    def _fragment_done(self, now: int) -> None:
        assert self.task is not None
        self._sync(now)
        work = self._timer.payload if self._timer else 0
        self._in_fragment = False
        self._remaining_us -= work
        self._frag_index += 1
        self.sim.record(self.entity, "fragment_done", self._frag_index)
        if self._remaining_us <= 0:
            self.task_active = False
            self.task_done_at = now
            latency_ms = us_to_ms(now - self.task_started_at)
            self.sim.record(self.entity, "task_done", latency_ms)
            self.task = None
            self._enter(DevicePhase.WAIT_FOR_QUERY, now)
            if self.on_waiting is not None:
                self.on_waiting(now)
            return
        sleep_ms = self._boundary_sleep_ms()
        if sleep_ms <= 0:
            self._schedule_crossing()
            self._start_fragment(now)
        else:
            self._enter(DevicePhase.LPM_SLEEP, now)
            self._timer = self.sim.schedule(
                sleep_ms * US_PER_MS, kind="timer-expiry", callback=self._sleep_wake
            )

    def _boundary_sleep_ms(self) -> int:
        if self.policy.kind == "iem":
            return self.policy.iem_sleep_ms
        if self.policy.kind == "readme":
            return self.sleeptime_ms
        return 0

    def _sleep_wake(self, now: int) -> None:
        self._enter(DevicePhase.ACTIVE, now)
        self._start_fragment(now)

    # -- transmit duration -----------------------------------------------------

    def _draw_transmit_us(self) -> int:
        if self.cfg.t_t_sigma_us == 0:
            return self.cfg.t_t_mean_us
        rng = self.sim.stream(f"{self.entity}-tt")
        draw = rng.normal(self.cfg.t_t_mean_us, self.cfg.t_t_sigma_us)
        return max(MIN_TRANSMIT_US, int(round(draw)))
