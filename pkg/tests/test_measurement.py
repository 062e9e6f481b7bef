import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paulitomo.errors import FormatError, InputError
from paulitomo.measurement import (
    MeasurementRecord,
    all_nonidentity_labels,
    averages,
    exact_record,
    format_record,
    load_record,
    parse_record,
    sample_measurements,
    save_record,
)
from paulitomo.pauli import format_label
from paulitomo.state import DensityState, random_sparse_state


def test_degenerate_binomial():
    s = DensityState.from_terms(2, {"XX": 1.0, "ZZ": -1.0})
    rec = sample_measurements(s, 50, ["XX", "ZZ"], np.random.default_rng(0))
    assert rec.to_dict() == {(1, 1): 50, (3, 3): 0}
    assert averages(rec).to_dict() == {(1, 1): 1.0, (3, 3): -1.0}


def test_zero_coefficient_law():
    # one draw of N over 4^6 - 1 independent zero-coefficient observables
    s = DensityState.maximally_mixed(6)
    n = 10**5
    N = averages(sample_measurements(s, n, None, np.random.default_rng(1))).values
    assert abs(N[0]) <= 4 * np.sqrt(1 / n)
    assert abs(N.var() / (1 / n) - 1) < 0.1


def test_deterministic_and_order_independent():
    s = random_sparse_state(3, np.random.default_rng(2), 10)
    labels = all_nonidentity_labels(3)
    a = sample_measurements(s, 100, labels, np.random.default_rng(9))
    b = sample_measurements(s, 100, labels[::-1], np.random.default_rng(9))
    c = sample_measurements(s, 100, None, np.random.default_rng(9))
    assert a == b == c


def test_label_subset():
    s = DensityState.maximally_mixed(2)
    rec = sample_measurements(s, 10, ["ZX", "IX"], np.random.default_rng(0))
    assert [format_label(x) for x in rec.labels()] == ["IX", "ZX"]


def test_identity_not_measurable():
    with pytest.raises(InputError):
        sample_measurements(DensityState.maximally_mixed(1), 10, ["I"], np.random.default_rng(0))


def test_averages_examples():
    rec = MeasurementRecord.from_mapping(1, 200, {"X": 200, "Y": 0, "Z": 137})
    assert averages(rec).to_dict() == {(1,): 1.0, (2,): -1.0, (3,): pytest.approx(0.37, abs=1e-15)}


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10_000), st.data())
def test_averages_in_range(n, data):
    count = data.draw(st.integers(0, n))
    rec = MeasurementRecord.from_mapping(1, n, {"X": count})
    v = averages(rec).values[0]
    assert -1.0 <= v <= 1.0
    assert (v + 1) * n / 2 == pytest.approx(count, abs=1e-9)


def test_label_enumeration():
    assert [format_label(x) for x in all_nonidentity_labels(1)] == ["X", "Y", "Z"]
    assert len(all_nonidentity_labels(2)) == 15
    three = all_nonidentity_labels(3)
    assert len(three) == 63 and format_label(three[0]) == "IIX"


def test_exact_record():
    s = DensityState.from_terms(1, {"X": 0.5})
    assert exact_record(s, 100).to_dict() == {(1,): 75, (2,): 50, (3,): 50}


class TestRecordValidation:
    def test_count_above_shots(self):
        with pytest.raises(InputError, match="201"):
            MeasurementRecord.from_mapping(1, 200, {"X": 201})

    def test_duplicates(self):
        with pytest.raises(InputError):
            MeasurementRecord(1, 10, [1, 1], [2, 3])

    def test_sorted(self):
        rec = MeasurementRecord(1, 10, [3, 1], [2, 3])
        assert rec.indices.tolist() == [1, 3] and rec.counts.tolist() == [3, 2]


class TestRecordFile:
    def test_roundtrip(self, tmp_path):
        s = random_sparse_state(3, np.random.default_rng(5), 10)
        rec = sample_measurements(s, 200, None, np.random.default_rng(6))
        save_record(rec, tmp_path / "r.txt")
        assert load_record(tmp_path / "r.txt") == rec

    def test_count_201_of_200(self):
        with pytest.raises(FormatError) as err:
            parse_record("pauli-counts v1 qubits=1 shots=200\nX 100\nZ 201\n", "bad.txt")
        assert str(err.value) == "bad.txt:3: count 201 outside [0, 200]"

    def test_partial_record(self):
        rec = parse_record("pauli-counts v1 qubits=2 shots=10\nZZ 7\n")
        assert rec.to_dict() == {(3, 3): 7}

    def test_canonical_text(self):
        text = "pauli-counts v1 qubits=1 shots=10\nX 1\nZ 9\n"
        assert format_record(parse_record(text)) == text

    @pytest.mark.parametrize(
        "body",
        ["X 1.5\n", "X -1\n", "II 3\n", "I 3\n", "X 1\nX 2\n", "X\n", "XQ 1\n"],
    )
    def test_malformed(self, body):
        head = "pauli-counts v1 qubits=1 shots=10\n"
        if body.startswith("II"):
            head = "pauli-counts v1 qubits=2 shots=10\n"
        with pytest.raises(FormatError) as err:
            parse_record(head + body)
        assert err.value.line >= 2

    @pytest.mark.parametrize(
        "header",
        ["pauli-counts v1 qubits=1", "pauli-counts v1 qubits=1 shots=0", "pauli-state v1 qubits=1 shots=5"],
    )
    def test_bad_header(self, header):
        with pytest.raises(FormatError) as err:
            parse_record(header + "\n")
        assert err.value.line == 1
