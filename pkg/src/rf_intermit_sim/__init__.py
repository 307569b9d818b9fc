"""Discrete-event simulator for intermittently RF-powered devices.

The package models a passively powered backscatter tag (reservoir
capacitor, charge/active/transmit power cycle, brownout) together with an
interrogating reader that measures read rate, infers the tag's charging
time from it, and remotely schedules the tag's low-power sleeps.  An
experiment harness reproduces distance sweeps, estimator-accuracy
correlation studies and policy benchmarks at desk scale.
"""

from .simkernel import Simulator, Distribution, TraceEvent, SimulationError
from .channel import ChannelParams, received_power, harvested_power
from .energy import (
    INFINITE,
    DeviceConfig,
    EnergyState,
    stored_energy,
    charge_time,
    active_time,
    read_rate,
    integrate,
    voltage_of,
)
from .device import Device, DevicePhase, Policy, TaskSpec
from .reader import (
    Reader,
    ReaderConfig,
    EstimatorConstants,
    ReadRateWindow,
    estimate_charge_time,
    compute_sleep_time,
)

__version__ = "0.1.0"
