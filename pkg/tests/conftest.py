import json
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    return path


@pytest.fixture
def schema_file(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text(json.dumps({
        "timestamp": "time_s",
        "throughput": "thr",
        "throughput_unit": "Mbps",
        "rsrp": "rsrp",
        "sinr": "sinr",
    }))
    return path


@pytest.fixture
def synthetic_csv(tmp_path):
    """A 400-sample trace in Mbps with rsrp/sinr, matching ``schema_file``."""
    from kftp import synthetic

    syn = synthetic.linear_gaussian(400, seed=7)
    thr = synthetic.to_bps(syn.measured, 10e6, 200e6) / 1e6
    rsrp = -120 + syn.features[:, 0] * 50
    sinr = -5 + syn.features[:, 1] * 35
    rows = [(float(i), repr(float(t)), repr(float(a)), repr(float(b)))
            for i, (t, a, b) in enumerate(zip(thr, rsrp, sinr))]
    return write_csv(tmp_path / "trace.csv", ["time_s", "thr", "rsrp", "sinr"], rows)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
