from __future__ import annotations

from pathlib import Path

import pytest

from handover.orchestrator import run_session
from handover.scenario import load_scenario

ROOT = Path(__file__).resolve().parents[1]
PACK_DIR = ROOT / "scenarios" / "pack"
AVOIDABLE_PATH = ROOT / "scenarios" / "avoidable" / "blocked_avoidable.json"

PACK_NAMES = ("blocked_road", "construction_zone", "fog_bank", "tunnel_dead_zone")


@pytest.fixture(scope="session")
def pack_scenarios():
    return {p.stem: load_scenario(p) for p in sorted(PACK_DIR.glob("*.json"))}


@pytest.fixture(scope="session")
def avoidable_scenario():
    return load_scenario(AVOIDABLE_PATH)


@pytest.fixture(scope="session")
def pack_runs_unresponsive(pack_scenarios):
    """Every pack scenario run once with a driver that never responds."""
    return {name: run_session(sc, scripted_driver=False)
            for name, sc in pack_scenarios.items()}


@pytest.fixture(scope="session")
def avoidable_run(avoidable_scenario):
    return run_session(avoidable_scenario, scripted_driver=False)
