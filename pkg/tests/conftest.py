import sys

import numpy as np
import pytest

from paulitomo.pauli import PauliExpansion, index_to_label, pauli_dense


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_expansion(rng, b, terms, scale=0.2):
    terms = min(terms, 4**b - 1)
    flat = rng.choice(4**b - 1, size=terms, replace=False) + 1
    return PauliExpansion(b, flat, rng.uniform(-scale, scale, size=terms))


def dense_sum(expansion):
    """Reference sum_j c_j B_j built from explicit Kronecker products."""
    d = 2**expansion.qubits
    out = np.zeros((d, d), dtype=complex)
    for f, c in zip(expansion.indices, expansion.values):
        out += c * pauli_dense(index_to_label(int(f) + 1, expansion.qubits))
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
