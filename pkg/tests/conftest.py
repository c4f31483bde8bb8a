import json
from pathlib import Path

import pytest

from ricloop import build_scenario, load_scenario

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def s1_scenario(mode: str = "a1", seed: int = 1):
    doc = json.loads((FIXTURES / "s1_scenario.json").read_text())
    doc["mode"] = mode
    doc["seed"] = seed
    return build_scenario(doc, FIXTURES)


def small_scenario(mode: str = "ccc", seed: int = 3, days: int = 2, es_policy: str = "auto"):
    """Two-site scenario small enough for per-test runs."""
    doc = {
        "name": "small",
        "topology": {"generate": {"sites": 2, "sectors": 2, "bands": 3}},
        "trace": {
            "diurnal": {
                "days": days,
                "peak_utilization": 0.7,
                "trough_utilization": 0.15,
                "peak_hour": 14.0,
                "noise_std": 0.01,
                "per_band_scale": [1.0, 0.8, 0.6],
            }
        },
        "mode": mode,
        "seed": seed,
        "ue_demand_prb": 5,
        "es": {"policy": es_policy},
    }
    return build_scenario(doc)
