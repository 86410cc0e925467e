"""Shared helpers: random system factories and the acceptance report hook."""

import numpy as np
import pytest

from svfid import lti

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criterion_report():
    """Callable that records one PASS/FAIL line per acceptance criterion."""

    def record(line: str) -> None:
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_poles(rng: np.random.Generator, order: int, unstable: bool) -> np.ndarray:
    """Pole set with real parts bounded away from the imaginary axis.

    Complex poles come in conjugate pairs so the denominator stays real.
    When ``unstable`` at least one pole is reflected into the right half
    plane.
    """
    poles = []
    remaining = order
    while remaining >= 2 and rng.random() < 0.6:
        re = -rng.uniform(0.3, 2.5)
        im = rng.uniform(0.3, 3.0)
        poles += [re + 1j * im, re - 1j * im]
        remaining -= 2
    poles += [-rng.uniform(0.3, 2.5) + 0j for _ in range(remaining)]
    poles = np.array(poles)
    if unstable:
        k = int(rng.integers(0, len(poles)))
        flip = poles[k]
        if abs(flip.imag) > 0:  # keep the conjugate pair together
            mask = np.isclose(poles.real, flip.real) & np.isclose(abs(poles.imag), abs(flip.imag))
            poles[mask] = -poles[mask].real + 1j * poles[mask].imag
        else:
            poles[k] = -poles[k].real
    return poles


def random_tf(rng: np.random.Generator, order: int = 2, unstable: bool = False):
    """Random strictly proper transfer function with well-separated poles."""
    den = np.polynomial.polynomial.polyfromroots(random_poles(rng, order, unstable)).real
    num = rng.uniform(-2.0, 2.0, size=order)
    num[-1] = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
    return lti.tf(num, den)
