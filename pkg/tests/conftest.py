import numpy as np
import pytest

from chi import kernels
from chi.synth import SynthSpec, generate


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synth6():
    """The six-CV noisy synthetic set used by the recovery checks."""
    return generate(SynthSpec(n_cvs=6, n_rows=200, noise_sigma=0.02, seed=0))


@pytest.fixture
def csv_file(tmp_path):
    def write(text, name="data.csv"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return write


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
