"""Generated-input property suites, runnable standalone.

Each suite exercises at least a thousand cases: estimator monotonicity and
safety, the infinite-charge/zero-rate propagation, exact energy accounting,
and state-machine legality over randomized simulation scenarios.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import phase_entries
from rf_intermit_sim.channel import FixedHarvest
from rf_intermit_sim.device import Device, DevicePhase, LEGAL_TRANSITIONS, Policy, TaskSpec
from rf_intermit_sim.energy import (
    INFINITE,
    DeviceConfig,
    EnergyState,
    charge_time,
    integrate,
    read_rate,
)
from rf_intermit_sim.reader import (
    EstimatorConstants,
    Reader,
    ReaderConfig,
    compute_sleep_time,
    estimate_charge_time,
)
from rf_intermit_sim.simkernel import Simulator, s_to_us

CASES = settings(max_examples=1000, deadline=None, derandomize=True)

LEGAL_PAIRS = {(a.value, b.value) for a, bs in LEGAL_TRANSITIONS.items() for b in bs}


@CASES
@given(
    r1=st.floats(min_value=0.01, max_value=5000.0),
    r2=st.floats(min_value=0.01, max_value=5000.0),
    k=st.floats(min_value=0.1, max_value=50.0),
)
def test_estimator_monotone_decreasing_in_rate(r1, r2, k):
    consts = EstimatorConstants(k_ms=k)
    lo, hi = sorted((r1, r2))
    est_lo, est_hi = estimate_charge_time(lo, consts), estimate_charge_time(hi, consts)
    assert est_lo >= est_hi
    if lo < hi and est_hi > 0:
        assert est_lo > est_hi  # strict off the saturation clamp


@CASES
@given(
    tc=st.floats(min_value=0.0, max_value=1e4),
    tau=st.floats(min_value=1.0, max_value=5.0),
)
def test_sleep_command_never_undershoots_estimate(tc, tau):
    sleep = compute_sleep_time(tc, tau)
    assert sleep >= tau * tc - 1e-6
    assert sleep >= tc  # tau >= 1: never below the estimate itself


@CASES
@given(
    e=st.floats(min_value=1e-9, max_value=1.0),
    p_charge=st.floats(min_value=0.0, max_value=1e-2),
    p_sleep=st.floats(min_value=1e-9, max_value=1e-2),
    t_fixed=st.floats(min_value=1e-6, max_value=1e-1),
)
def test_infinite_charge_propagates_to_zero_rate(e, p_charge, p_sleep, t_fixed):
    tc = charge_time(e, p_charge, p_sleep)
    rate = read_rate(tc, t_fixed, t_fixed)
    if p_charge <= p_sleep:
        assert tc == INFINITE and rate == 0.0
    else:
        assert math.isfinite(tc) and rate > 0.0
        assert rate == pytest.approx(1.0 / (tc + 2 * t_fixed))


@CASES
@given(
    e0=st.floats(min_value=0.0, max_value=3e-4),
    p_in=st.floats(min_value=0.0, max_value=1e-2),
    p_out=st.floats(min_value=0.0, max_value=1e-2),
    dt=st.floats(min_value=0.0, max_value=100.0),
)
def test_energy_accounting_exact_up_to_clamping(e0, p_in, p_out, dt):
    e_max = 2.88e-4
    state = EnergyState(min(e0, e_max), 1e-4)
    out = integrate(state, p_in, p_out, dt, e_max=e_max)
    unclamped = state.e_j + (p_in - p_out) * dt
    if 0.0 <= unclamped <= e_max:
        assert out.e_j == unclamped  # bit-exact: one multiply-add
    else:
        assert out.e_j in (0.0, e_max)


@CASES
@given(
    e=st.floats(min_value=1e-6, max_value=1e-3),
    p_lo=st.floats(min_value=1e-6, max_value=5e-3),
    p_hi=st.floats(min_value=1e-6, max_value=5e-3),
    p_sleep=st.floats(min_value=1e-7, max_value=1e-6),
)
def test_charge_time_strictly_decreasing_in_harvest(e, p_lo, p_hi, p_sleep):
    lo, hi = sorted((p_lo, p_hi))
    t_lo = charge_time(e, lo, p_sleep)
    t_hi = charge_time(e, hi, p_sleep)
    if lo == hi:
        assert t_lo == t_hi
    elif lo > p_sleep:
        assert t_lo > t_hi
    else:
        assert t_lo == INFINITE and t_lo >= t_hi


def test_phase_transitions_legal_over_randomized_scenarios():
    """1000 random scenarios: every observed transition is in the legal set,
    and brownouts appear in the trace iff the supply ever fell below the draw."""
    rng = np.random.default_rng(20210907)
    for case in range(1000):
        sim = Simulator(int(rng.integers(0, 2**63)))
        cfg = DeviceConfig(
            c_f=float(rng.uniform(1e-6, 2e-5)),
            v_charged=2.4,
            v_min=1.8,
            p_sleep_w=float(rng.uniform(5e-7, 5e-5)),
            p_active_w=float(rng.uniform(5e-4, 5e-3)),
            t_execute_us=int(rng.integers(100, 2000)),
            t_t_mean_us=int(rng.integers(200, 3000)),
            t_t_sigma_us=int(rng.choice([0, 300])),
        )
        kind = ("cem", "iem", "readme")[case % 3]
        policy = Policy(kind, iem_sleep_ms=int(rng.integers(0, 12)),
                        readme_default_ms=int(rng.integers(0, 12)))
        harvest = FixedHarvest(float(rng.uniform(0.0, 6e-3)))
        device = Device(sim, cfg, harvest, policy,
                        initial_e_j=float(rng.uniform(0, cfg.e_max_j)))
        Reader(sim, device, ReaderConfig(query_timeout_ms=float(rng.uniform(0.3, 2.0))))
        if rng.random() < 0.7:
            frag = int(rng.integers(500, 5000))
            device.dispatch_task(TaskSpec(total_work_us=frag * int(rng.integers(1, 6)),
                                          fragment_work_us=frag))
        device.start()
        horizon = s_to_us(0.25)
        for step in range(1, 5):
            sim.run_until(horizon * step // 4)
            if rng.random() < 0.5:
                harvest.set_power(float(rng.uniform(0.0, 6e-3)))
            if rng.random() < 0.3:
                device.handle_write_sleeptime(int(rng.integers(0, 20)))
        entries = phase_entries(sim.trace)
        for (_, a), (_, b) in zip(entries, entries[1:]):
            assert (a, b) in LEGAL_PAIRS, f"case {case}: {a} -> {b}"
        times = [t for t, _ in entries]
        assert times == sorted(times)
