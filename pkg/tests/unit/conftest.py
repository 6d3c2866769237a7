"""
Shared pytest configuration for unit tests.
Ensures project root is on sys.path and provides common fixtures.
"""
import sys
from pathlib import Path
import pytest

# Add project root
ROOT = Path(__file__).resolve().parents[2]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from gpehom.core.models import ProblemSpec, TraceConfig
from gpehom.core.config import GpehomSettings
from gpehom.core.engine import GPEHomotopyEngine
from gpehom.numerics.homotopy import build_problem


@pytest.fixture()
def make_problem():
    """Factory for small homotopy problems; 1D on [-2, 2] unless a 2D ``m`` is given."""
    def _make(n=3, beta=0.0, sigma=0.0, seed=0, m=None, domain=None, kind=None):
        if m is None:
            spec = ProblemSpec(dim=1, domain=domain or (-2.0, 2.0), n=n, beta=beta)
        else:
            spec = ProblemSpec(dim=2, domain=domain or (0.0, 1.0, 0.0, 1.0), n=n, m=m, beta=beta)
        return build_problem(spec, kind=kind, seed=seed, sigma=sigma)
    return _make


@pytest.fixture()
def trace_cfg():
    return TraceConfig()


@pytest.fixture()
def engine():
    return GPEHomotopyEngine(settings=GpehomSettings())


@pytest.fixture()
def write_config(tmp_path):
    """Write a flat config file from keyword arguments and return its path."""
    def _write(name="run.conf", **values):
        path = tmp_path / name
        path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()), encoding="utf-8")
        return path
    return _write


SMOKE_1D = dict(dim=1, x_min=-2.0, x_max=2.0, n=20, beta=1.0, seed=0, sigma=0.5, paths="1-3")
SMOKE_2D = dict(dim=2, x_min=0.0, x_max=1.0, y_min=0.0, y_max=1.0, m=6, n=6, beta=1.0, seed=0,
                sigma=0.5, paths="1")


@pytest.fixture()
def smoke_1d_values():
    return dict(SMOKE_1D)


@pytest.fixture()
def smoke_2d_values():
    return dict(SMOKE_2D)
