import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from annular import boundary as bd
from annular import manifold as mf

settings.register_profile("annular", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("annular")


def sphere_circle(a, b, s=1.0):
    """Small circle of S^3 with angular radius a, tilted by b towards e3."""
    e = np.eye(4)
    center = np.cos(a) * (np.cos(b) * e[0] + s * np.sin(b) * e[3])
    return bd.circle(center, np.sin(a), e[1], e[2])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def coaxial():
    return bd.circle_3d((0, 0, 0.4), 1.0), bd.circle_3d((0, 0, -0.4), 1.0)


@pytest.fixture(scope="session")
def sphere_pair():
    return mf.sphere3(), sphere_circle(0.5, 0.2, 1), sphere_circle(0.4, 0.2, -1)


# acceptance reporting ----------------------------------------------------------------


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, checks: dict):
        ok = all(bool(v[0]) for v in checks.values())
        detail = "; ".join(f"{k}: {v[1]}" for k, v in checks.items())
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title} | {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        failed = [k for k, v in checks.items() if not v[0]]
        assert ok, f"criterion {number} failed checks: {failed} | {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
