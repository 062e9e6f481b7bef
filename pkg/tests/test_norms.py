import math

import numpy as np
import pytest

from paulitomo.errors import ConvergenceError, InputError
from paulitomo.lanczos import lanczos_extremes
from paulitomo.norms import (
    dense_norm_check,
    error_report,
    frobenius_error_sq,
    norm_inequality_check,
    schatten_error,
    spectral_error,
    spectral_pair,
)
from paulitomo.pauli import PauliExpansion
from paulitomo.state import DensityState, random_sparse_state, to_dense


def loose_state(rng, b, terms, amplitude=0.3):
    """Random coefficients without the physicality filter."""
    return random_sparse_state(b, rng, min(terms, 4**b - 1), amplitude, psd_tolerance=np.inf)


def dense_diff(a, b):
    return to_dense(a) - to_dense(b)


class TestFrobenius:
    def test_examples(self, rng):
        s = loose_state(rng, 2, 5)
        assert frobenius_error_sq(s, s) == 0.0
        a = DensityState.from_terms(2, {"XY": 0.3})
        assert frobenius_error_sq(a, DensityState.maximally_mixed(2)) == pytest.approx(0.09 / 4, rel=1e-15)

    @pytest.mark.parametrize("b", [1, 2, 3, 4])
    def test_matches_dense(self, rng, b):
        for _ in range(10):
            a, c = loose_state(rng, b, 2 * b), loose_state(rng, b, 3 * b)
            ref = np.linalg.norm(dense_diff(a, c), "fro") ** 2
            assert frobenius_error_sq(a, c) == pytest.approx(ref, rel=1e-12)

    def test_qubit_mismatch(self):
        with pytest.raises(InputError):
            frobenius_error_sq(DensityState.maximally_mixed(1), DensityState.maximally_mixed(2))


class TestSpectral:
    @pytest.mark.parametrize("method", ["dense", "iterative"])
    def test_single_term(self, method):
        for b in (1, 3, 5):
            a = DensityState(PauliExpansion(b, [4**b - 2], [-0.37]))
            m = DensityState.maximally_mixed(b)
            assert spectral_error(a, m, method) == pytest.approx(0.37 / 2**b, rel=1e-12)
            assert spectral_error(a, a, method) == 0.0

    @pytest.mark.parametrize("b", [2, 4, 6, 7])
    def test_iterative_matches_dense(self, rng, b):
        for _ in range(4):
            a, c = loose_state(rng, b, 25), loose_state(rng, b, 25)
            dense = spectral_error(a, c, "dense")
            ref = np.abs(np.linalg.eigvalsh(dense_diff(a, c))).max() if b <= 6 else dense
            assert dense == pytest.approx(ref, rel=1e-12)
            assert spectral_error(a, c, "iterative") == pytest.approx(dense, rel=1e-8)

    def test_residual_certificate(self, rng):
        a, c = loose_state(rng, 6, 30), loose_state(rng, 6, 30)
        pair = spectral_pair(a, c)
        m = dense_diff(a, c)
        assert np.linalg.norm(m @ pair.vector - pair.value * pair.vector) <= 1e-8 * abs(pair.value)
        assert pair.residual <= 1e-8 * abs(pair.value)

    def test_unknown_method(self):
        s = DensityState.maximally_mixed(1)
        with pytest.raises(InputError):
            spectral_error(s, s, "magic")

    def test_symmetric_and_triangle(self, rng):
        for _ in range(20):
            a, c, e = (loose_state(rng, 3, 10) for _ in range(3))
            for f in (spectral_error, lambda x, y: math.sqrt(frobenius_error_sq(x, y))):
                assert f(a, c) == pytest.approx(f(c, a), rel=1e-12)
                assert f(a, e) <= f(a, c) + f(c, e) + 1e-10


class TestSchatten:
    def test_examples(self, rng):
        a, c = loose_state(rng, 3, 12), loose_state(rng, 3, 12)
        assert schatten_error(a, c, 2) == pytest.approx(math.sqrt(frobenius_error_sq(a, c)), abs=1e-10)
        assert schatten_error(a, c, math.inf) == pytest.approx(spectral_error(a, c), abs=1e-10)

    def test_trace_norm_of_single_term(self):
        a = DensityState.from_terms(3, {"XIZ": 0.4})
        assert schatten_error(a, DensityState.maximally_mixed(3), 1) == pytest.approx(0.4, rel=1e-12)

    def test_monotone_in_s(self, rng):
        a, c = loose_state(rng, 4, 20), loose_state(rng, 4, 20)
        vals = [schatten_error(a, c, s) for s in (1, 1.5, 2, 3, 8, math.inf)]
        assert all(x >= y - 1e-12 for x, y in zip(vals, vals[1:]))

    def test_index_below_one(self):
        s = DensityState.maximally_mixed(1)
        with pytest.raises(InputError):
            schatten_error(s, s, 0.5)

    def test_zero_difference(self, rng):
        s = loose_state(rng, 2, 4)
        assert schatten_error(s, s, 1) == 0.0


class TestInequalities:
    def test_trivial(self):
        s = DensityState.maximally_mixed(2)
        assert norm_inequality_check(s, s)

    def test_random_pairs(self, rng):
        for _ in range(500):
            a, c = loose_state(rng, 3, 8), loose_state(rng, 3, 8)
            check = norm_inequality_check(a, c)
            assert check, check.violations

    def test_rank_one(self):
        m = np.zeros((4, 4))
        m[2, 2] = -0.7
        check = dense_norm_check(m)
        assert check and check.spectral == pytest.approx(check.frobenius, rel=1e-15)

    def test_reports_violation(self):
        # eigvalsh reads only the lower triangle, so this non-Hermitian input looks like zero
        check = dense_norm_check(np.array([[0.0, 5.0], [0.0, 0.0]]))
        assert not check
        assert "sqrt(d)" in check.violations[0]


class TestReport:
    def test_fields(self, rng):
        a, c = loose_state(rng, 3, 6), loose_state(rng, 3, 6)
        rep = error_report(a, c, schatten=(1, math.inf))
        assert rep.method == "dense"
        assert rep.spectral_sq == pytest.approx(spectral_error(a, c) ** 2)
        assert rep.schatten[math.inf] == pytest.approx(math.sqrt(rep.spectral_sq))


class TestLanczos:
    def test_diagonal_operator(self):
        diag = np.linspace(-3, 2, 50)
        res = lanczos_extremes(lambda v: diag * v, 50)
        assert res.smallest.value == pytest.approx(-3, rel=1e-12)
        assert res.largest.value == pytest.approx(2, rel=1e-12)
        assert res.max_abs.value == pytest.approx(-3, rel=1e-12)

    def test_degenerate_spectrum_stops_early(self):
        diag = np.array([1.0] * 30 + [-1.0] * 30)
        res = lanczos_extremes(lambda v: diag * v, 60)
        assert res.iterations <= 3
        assert res.smallest.value == pytest.approx(-1) and res.largest.value == pytest.approx(1)

    def test_failure_raises_with_residual(self):
        diag = np.linspace(0, 1, 400)
        with pytest.raises(ConvergenceError) as err:
            lanczos_extremes(lambda v: diag * v, 400, max_iter=5)
        assert err.value.residual > 0
        assert err.value.exit_code == 4

    def test_bad_target(self):
        with pytest.raises(InputError):
            lanczos_extremes(lambda v: v, 4, which="middle")
