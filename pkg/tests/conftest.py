import numpy as np
import pytest

from irs_covert.covertness import CovertnessBudget
from irs_covert.forms import build_quadratic_forms
from irs_covert.scenario import Geometry, cascade_vectors, default_params, sample_channels


def make_instance(n_x, n_z, stream, index, **overrides):
    """(params, budget, channels, quadratic forms) for one seeded draw at the default geometry."""
    p = default_params(n_x=n_x, n_z=n_z, **overrides)
    ch = sample_channels(Geometry(), p, (stream, index))
    a, b = cascade_vectors(ch)
    return p, CovertnessBudget.from_params(p), ch, build_quadratic_forms(a, b, ch.h_ab, ch.h_aw)


def solver_kw(p):
    return dict(sigma_w2=p.sigma_w2, p_max=p.p_max, sigma_b2=p.sigma_b2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Records one acceptance line; a test that errors before recording counts as FAIL."""
    entry = {}

    def record(number: int, passed: bool, detail: str):
        entry.update(number=number, passed=bool(passed), detail=detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

    yield record
    if entry:
        _ACCEPTANCE[entry["number"]] = entry
    else:
        number = int(request.node.name.split("_")[1])
        _ACCEPTANCE[number] = dict(number=number, passed=False, detail="test errored")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if e['passed'] else 'FAIL'}  {e['detail']}")
