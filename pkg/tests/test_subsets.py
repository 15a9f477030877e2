import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seeqst.subsets import (
    ElementIndex,
    SubsetKey,
    all_elements,
    all_subsets,
    commutes,
    decompose_projector,
    elements_of_subset,
    eo_split,
    observable_set,
    pauli_matrix,
    plan_from_json,
    plan_subsets,
    plan_to_json,
    restrict,
    subset_of_element,
    threshold_plan,
    y_count,
)


def brute_force_coefficients(row, col, n):
    """Trace inner products over the full Pauli basis (independent of the library)."""
    dim = 1 << n
    proj = np.zeros((dim, dim), dtype=complex)
    proj[col, row] = 1.0
    out = {}
    for letters in itertools.product("IXYZ", repeat=n):
        label = "".join(letters)
        c = np.trace(pauli_matrix(label).conj().T @ proj) / dim
        if abs(c) > 1e-12:
            out[label] = c
    return out


@st.composite
def elements(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    row = draw(st.integers(0, (1 << n) - 1))
    col = draw(st.integers(0, (1 << n) - 1))
    return ElementIndex(row, col, n)


class TestTypes:
    def test_element_bounds(self):
        with pytest.raises(ValueError):
            ElementIndex(4, 0, 2)
        with pytest.raises(ValueError):
            ElementIndex(-1, 0, 2)

    def test_parse(self):
        assert ElementIndex.parse("5:3", 3) == ElementIndex(5, 3, 3)
        with pytest.raises(ValueError):
            ElementIndex.parse("5-3", 3)

    def test_subset_key(self):
        k = SubsetKey(0b10, 2)
        assert k.m == 1
        assert k.off_diagonal_qubits == (0,)
        assert k.diagonal_qubits == (1,)
        assert k.name == "S_3"
        with pytest.raises(ValueError):
            SubsetKey(4, 2)


class TestSubsetOfElement:
    def test_two_qubit_green_class(self):
        assert subset_of_element(ElementIndex(2, 0, 2)).mask == 0b10

    def test_diagonal(self):
        assert subset_of_element(ElementIndex(5, 5, 3)).mask == 0

    def test_xor(self):
        assert subset_of_element(ElementIndex(5, 3, 3)).mask == 0b110

    @given(elements())
    def test_mask_is_xor(self, e):
        assert subset_of_element(e).mask == e.row ^ e.col


class TestElementsOfSubset:
    def test_two_qubit(self):
        got = {(e.row, e.col) for e in elements_of_subset(SubsetKey(0b10, 2))}
        assert got == {(2, 0), (3, 1), (0, 2), (1, 3)}

    def test_single_qubit_diagonal(self):
        got = {(e.row, e.col) for e in elements_of_subset(SubsetKey(0, 1))}
        assert got == {(0, 0), (1, 1)}

    def test_anti_diagonal(self):
        got = [(e.row, e.col) for e in elements_of_subset(SubsetKey(0b111, 3))]
        assert sorted(got) == [(r, 7 - r) for r in range(8)]

    @given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1), st.integers(0, (1 << n) - 1))))
    def test_size_and_flip_closure(self, args):
        n, mask, flip = args
        members = {(e.row, e.col) for e in elements_of_subset(SubsetKey(mask, n))}
        assert len(members) == 1 << n
        assert {(r ^ flip, c ^ flip) for r, c in members} == members

    def test_subsets_partition_matrix(self):
        n = 3
        seen = [(e.row, e.col) for k in all_subsets(n) for e in elements_of_subset(k)]
        assert sorted(seen) == sorted(itertools.product(range(8), repeat=2))


class TestObservables:
    def test_green_class(self):
        assert set(observable_set(SubsetKey(0b10, 2))) == {"XI", "XZ", "YI", "YZ"}

    def test_diagonal(self):
        assert set(observable_set(SubsetKey(0, 2))) == {"II", "IZ", "ZI", "ZZ"}

    def test_all_off_diagonal(self):
        got = set(observable_set(SubsetKey(0b111, 3)))
        assert got == {"".join(p) for p in itertools.product("XY", repeat=3)}

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_union_is_pauli_basis(self, n):
        labels = [p for k in all_subsets(n) for p in observable_set(k)]
        assert len(labels) == 4**n
        assert set(labels) == {"".join(p) for p in itertools.product("IXYZ", repeat=n)}

    def test_split_examples(self):
        s = eo_split(SubsetKey(0b10, 2))
        assert set(s.even) == {"XI", "XZ"} and set(s.odd) == {"YI", "YZ"}
        s = eo_split(SubsetKey(0b11, 2))
        assert set(s.even) == {"XX", "YY"} and set(s.odd) == {"XY", "YX"}
        s = eo_split(SubsetKey(1, 1))
        assert s.even == ("X",) and s.odd == ("Y",)

    def test_diagonal_split(self):
        s = eo_split(SubsetKey(0, 3))
        assert len(s.even) == 8 and s.odd == ()

    @settings(max_examples=40)
    @given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, (1 << n) - 1))))
    def test_split_structure(self, args):
        n, mask = args
        k = SubsetKey(mask, n)
        s = eo_split(k)
        assert len(s.even) == len(s.odd) == 1 << (n - 1)
        assert all(y_count(p) % 2 == 0 for p in s.even)
        assert all(y_count(p) % 2 == 1 for p in s.odd)
        for group in (s.even, s.odd):
            sample = group[:6]
            assert all(commutes(a, b) for a, b in itertools.combinations(sample, 2))
        off = k.off_diagonal_qubits
        for a, b in itertools.product(s.even[:4], s.odd[:4]):
            assert not commutes(restrict(a, off), restrict(b, off))


class TestDecomposition:
    def test_single_qubit_coherence(self):
        d = decompose_projector(ElementIndex(0, 1, 1))
        assert d.terms == pytest.approx({"X": 0.5, "Y": -0.5j})
        expected = np.array([[0, 0], [1, 0]])
        np.testing.assert_allclose(d.matrix(), expected, atol=1e-15)

    def test_single_qubit_population(self):
        d = decompose_projector(ElementIndex(0, 0, 1))
        assert d.terms == pytest.approx({"I": 0.5, "Z": 0.5})

    def test_two_qubit_against_brute_force(self):
        d = decompose_projector(ElementIndex(2, 0, 2))
        oracle = brute_force_coefficients(2, 0, 2)
        assert set(oracle) == {"XI", "XZ", "YI", "YZ"}
        assert set(d.terms) == set(oracle)
        for label, c in oracle.items():
            assert d.terms[label] == pytest.approx(c, abs=1e-15)
            assert abs(c) == pytest.approx(0.25)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_round_trip_exhaustive(self, n):
        dim = 1 << n
        for e in all_elements(n):
            d = decompose_projector(e)
            target = np.zeros((dim, dim))
            target[e.col, e.row] = 1
            np.testing.assert_allclose(d.matrix(), target, atol=1e-12)
            assert set(d.terms) <= set(observable_set(subset_of_element(e)))

    @settings(max_examples=100, deadline=None)
    @given(elements(max_n=8).filter(lambda e: e.n_qubits >= 5))
    def test_round_trip_large(self, e):
        d = decompose_projector(e)
        dim = 1 << e.n_qubits
        m = d.matrix()
        assert m[e.col, e.row] == pytest.approx(1, abs=1e-12)
        m[e.col, e.row] = 0
        assert np.abs(m).max() < 1e-12 * dim


class TestPlanning:
    def test_plan_examples(self):
        got = plan_subsets([ElementIndex(0, 0, 2), ElementIndex(3, 1, 2)])
        assert [k.mask for k in got] == [0, 0b10]
        assert [k.mask for k in plan_subsets(all_elements(2))] == [0, 1, 2, 3]
        assert [k.mask for k in plan_subsets([ElementIndex(0, 31, 5)])] == [0b11111]

    def test_mixed_sizes_rejected(self):
        with pytest.raises(ValueError):
            plan_subsets([ElementIndex(0, 0, 2), ElementIndex(0, 0, 3)])

    def test_threshold_zero_is_identity(self, rng):
        p = rng.dirichlet(np.ones(8))
        els = all_elements(3)
        assert threshold_plan(p, els, 0.0) == plan_subsets(els)

    def test_threshold_pure_state(self):
        p = np.zeros(8)
        p[0] = 1
        assert [k.mask for k in threshold_plan(p, all_elements(3), 0.01)] == [0]

    def test_threshold_uniform(self):
        n = 3
        p = np.full(1 << n, 1 / (1 << n))
        els = all_elements(n)
        assert threshold_plan(p, els, 1 / (1 << n)) == plan_subsets(els)

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            threshold_plan([0.5, 0.5], all_elements(2), 0.1)
        with pytest.raises(ValueError):
            threshold_plan([0.25] * 4, all_elements(2), -1)

    def test_json_round_trip(self):
        keys = plan_subsets(all_elements(3))
        assert plan_from_json(plan_to_json(keys)) == keys
