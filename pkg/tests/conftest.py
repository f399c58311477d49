from fractions import Fraction

import numpy as np
import pytest

from hrsos.combinat import basis_array
from hrsos.polyform import HomogeneousForm, parse_form

MOTZKIN_TEXT = "x1^2*x2^2*(x1^2+x2^2-3*x3^2)+x3^6"

# Acceptance criteria append (label, passed, detail) here; the summary hook
# prints one line each at the end of the run.
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


@pytest.fixture
def motzkin():
    return parse_form(MOTZKIN_TEXT, ["x1", "x2", "x3"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_form(rng, n, degree, exact=False, density=1.0):
    terms = {}
    for row in basis_array(n, degree).tolist():
        if rng.random() > density:
            continue
        if exact:
            terms[tuple(row)] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 5)))
        else:
            terms[tuple(row)] = float(rng.standard_normal())
    return HomogeneousForm(n, degree, terms)


def random_unit(rng, n, size=None):
    shape = (n,) if size is None else (size, n)
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)
