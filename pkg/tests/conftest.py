import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qnizk.protocol import ProtocolContext, load_fixture
from qnizk.quantum import Statevector

settings.register_profile("dev", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))

ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_KEY]


@pytest.fixture(scope="session")
def fixtures():
    return {name: load_fixture(name) for name in ("toy", "xor", "reject")}


@pytest.fixture(scope="session")
def xor_ctx(fixtures):
    circ, d = fixtures["xor"]
    return ProtocolContext.build(circ, d["instance"], 1)


@pytest.fixture(scope="session")
def xor_ctx2(fixtures):
    circ, d = fixtures["xor"]
    return ProtocolContext.build(circ, d["instance"], 2)


@pytest.fixture(scope="session")
def toy_ctx(fixtures):
    circ, d = fixtures["toy"]
    return ProtocolContext.build(circ, d["instance"], 1)


@pytest.fixture(scope="session")
def xor_witness(fixtures):
    return Statevector.from_bits(fixtures["xor"][1]["witness"])


@pytest.fixture(scope="session")
def toy_witness(fixtures):
    return Statevector.from_bits(fixtures["toy"][1]["witness"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
