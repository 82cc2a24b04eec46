"""Shared fixtures: small scenarios and the single-agent training fixture."""

from __future__ import annotations

import numpy as np
import pytest

from farmgrid.battery import BatterySpec
from farmgrid.profiles import FarmConfig, Scenario, TimeSeries

# 24-hour single-agent profile used for learning-convergence checks.  The
# greedy reward-maximizing trajectory collects reward every hour and never
# strands the battery where no rewarded action exists.
FIXTURE_DAY = [
    # (load, gen)
    (5.0, 0.0),  # 00 night deficit
    (5.0, 0.0),  # 01
    (2.0, 0.0),  # 02
    (5.0, 0.0),  # 03
    (2.0, 0.0),  # 04
    (5.0, 0.0),  # 05
    (2.0, 0.0),  # 06
    (5.0, 0.0),  # 07
    (4.0, 4.05),  # 08 near-balanced
    (2.0, 8.0),  # 09 surplus
    (2.0, 8.0),  # 10
    (2.0, 8.0),  # 11
    (2.0, 8.0),  # 12
    (2.0, 8.0),  # 13
    (2.0, 8.0),  # 14
    (2.0, 1.0),  # 15 near-peak deficit
    (2.0, 1.0),  # 16
    (6.0, 1.0),  # 17 peak deficit
    (6.0, 1.0),  # 18
    (3.0, 1.0),  # 19 evening deficit
    (3.0, 0.0),  # 20
    (3.0, 0.0),  # 21
    (3.0, 0.0),  # 22
    (2.0, 0.0),  # 23
]


def single_agent_day_scenario() -> Scenario:
    loads = np.array([l for l, _ in FIXTURE_DAY])
    gens = np.array([g for _, g in FIXTURE_DAY])
    farm = FarmConfig(agent_id=1, herd_size=40, pv_capacity_kw=10.0)
    return Scenario(
        fleet=(farm,),
        loads={1: TimeSeries(loads)},
        generation={1: TimeSeries(gens)},
        horizon_hours=24,
        rng_seed=0,
    )


@pytest.fixture
def day_scenario() -> Scenario:
    return single_agent_day_scenario()


@pytest.fixture
def default_spec() -> BatterySpec:
    return BatterySpec()
