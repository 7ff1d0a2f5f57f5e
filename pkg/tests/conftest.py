from __future__ import annotations

import numpy as np
import pytest

from semev.pipeline import SynthConfig, synth_generate


def sweep_instances(n: int = 200, seed: int = 20240601):
    """Log-uniform prize ratios on [2, 1e4], r uniform on [1, 6]."""
    rng = np.random.default_rng(seed)
    ratios = 10.0 ** rng.uniform(np.log10(2.0), 4.0, n)
    rs = rng.uniform(1.0, 6.0, n)
    return list(zip(ratios.tolist(), rs.tolist()))


@pytest.fixture(scope="session")
def small_synth():
    return synth_generate(SynthConfig(addresses=30, seed=11))


ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
