import numpy as np
import pytest

from doublevq import _kernels
from doublevq.dvq import DvqModel, TransitionMatrix
from doublevq.series import LagSpec
from doublevq.som import Codebook


def make_model(reg_protos, def_protos, counts, offsets=(0, 1), d=1):
    """Hand-built model with explicit prototypes and transition counts."""
    spec = LagSpec(d, tuple(offsets))
    reg = Codebook(np.asarray(reg_protos, dtype=float))
    dfm = Codebook(np.asarray(def_protos, dtype=float))
    return DvqModel(reg, dfm, TransitionMatrix(np.asarray(counts)), spec)


@pytest.fixture
def model_factory():
    return make_model


@pytest.fixture(params=["numpy", "numba"])
def backend(request):
    with _kernels.use_backend(request.param):
        yield request.param


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE = []


def record(criterion, ok, detail):
    """Remember one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
