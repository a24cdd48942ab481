"""Shared fixtures and the acceptance-criteria summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from fzpipe.core import Field
from fzpipe.data import SyntheticSpec, generate

# (number, description, ok, detail) tuples recorded by tests/test_acceptance.py.
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_RESULTS


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num, desc, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {num:2d} {desc}: {detail}")


def smooth_field(dims, seed=0) -> Field:
    return generate(SyntheticSpec("smooth_trig", tuple(dims), seed))


def noise_field(dims, seed=0, width=4) -> Field:
    return generate(SyntheticSpec("filtered_noise", tuple(dims), seed,
                                  {"width": str(width)}))


def random_field(dims, seed=0, lo=-1.0, hi=1.0) -> Field:
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    data = rng.uniform(lo, hi, n).astype(np.float32)
    return Field(tuple(dims), data)


@pytest.fixture
def rng():
    return np.random.default_rng(0xF2)
