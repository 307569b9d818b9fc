"""Shared builders for device/reader simulations used across test modules."""

import pytest

from rf_intermit_sim.channel import FixedHarvest
from rf_intermit_sim.device import Device, DevicePhase, Policy, TaskSpec
from rf_intermit_sim.energy import DeviceConfig
from rf_intermit_sim.reader import Reader, ReaderConfig
from rf_intermit_sim.simkernel import Simulator


def make_link(
    power_w,
    policy=None,
    cfg=None,
    reader_cfg=None,
    seed=1,
    initial_e_j=0.0,
    with_reader=True,
):
    """Device on a constant-power harvest, optionally with a reader attached."""
    sim = Simulator(seed)
    cfg = cfg or DeviceConfig()
    harvest = FixedHarvest(power_w)
    device = Device(sim, cfg, harvest, policy or Policy("cem"), initial_e_j=initial_e_j)
    reader = Reader(sim, device, reader_cfg or ReaderConfig()) if with_reader else None
    return sim, harvest, device, reader


def run_until_phase(sim, device, phase, deadline_us, step_us=200):
    while device.phase is not phase and sim.now < deadline_us:
        sim.run_until(min(sim.now + step_us, deadline_us))
    return device.phase is phase


def run_until_task_outcome(sim, device, deadline_us, step_us=50_000):
    while (
        device.task_done_at is None
        and device.task_failed_at is None
        and sim.now < deadline_us
    ):
        sim.run_until(min(sim.now + step_us, deadline_us))


def phase_entries(trace, entity="device"):
    labels = {p.value for p in DevicePhase}
    return [(ev.time_us, ev.label) for ev in trace if ev.entity == entity and ev.label in labels]
