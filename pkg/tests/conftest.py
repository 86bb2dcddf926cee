import numpy as np
import pytest

from mginf.dist import (
    Deterministic,
    Empirical,
    Erlang,
    Exponential,
    Ferreira,
    HyperExponential,
    Power,
    QueueModel,
)

H2 = HyperExponential((0.5, 0.5), (0.5, 1.5))


def builtin_families(lam=1.0):
    """One representative of every family, keyed by a readable id."""
    return {
        "det1": Deterministic(1.0),
        "det0": Deterministic(0.0),
        "power1": Power(1.0),
        "power3": Power(3.0),
        "exp1": Exponential(1.0),
        "exp2": Exponential(2.0),
        "ferreira-0.5": Ferreira(-0.5 * lam, lam),
        "ferreira0": Ferreira(0.0, lam),
        "ferreira0.3": Ferreira(0.3 * lam, lam),
        "erlang2": Erlang(2, 1.0),
        "erlang5": Erlang(5, 0.7),
        "h2": H2,
        "empirical": Empirical(np.array([0.2, 0.5, 0.5, 1.1, 1.7, 2.4, 3.0])),
    }


@pytest.fixture(params=sorted(builtin_families()))
def family(request):
    return builtin_families()[request.param]


def with_lam(d, lam):
    """Queue model at rate ``lam``; ferreira laws keep beta / lam fixed."""
    if isinstance(d, Ferreira):
        d = Ferreira(d.beta / d.lam * lam, lam, d.rho)
    return QueueModel(lam, d)


# acceptance verdicts, one line per criterion, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
