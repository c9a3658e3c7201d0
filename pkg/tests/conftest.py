import functools
from contextlib import contextmanager

import pytest
from hypothesis import HealthCheck, settings

from lambda_nav.config import resolve_config
from lambda_nav.sim import run_scenario

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict[int, tuple[str, str, str]] = {}


@contextmanager
def criterion(number: int, title: str):
    """Record a PASS/FAIL line for an acceptance criterion; ``info`` collects details."""
    info: dict = {}
    try:
        yield info
    except BaseException:
        _CRITERIA[number] = (title, "FAIL", _fmt(info))
        raise
    _CRITERIA[number] = (title, "PASS", _fmt(info))


def _fmt(info: dict) -> str:
    return ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, verdict, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {verdict}: {title}" + (f" [{detail}]" if detail else ""))


@functools.lru_cache(maxsize=None)
def scenario(name: str, threshold: float, seed: int = 0):
    """Run a bundled scenario once per session."""
    cfg = resolve_config(name).with_threshold(threshold).with_seed(seed)
    return cfg, run_scenario(cfg)


@pytest.fixture
def run_bundled():
    return scenario
