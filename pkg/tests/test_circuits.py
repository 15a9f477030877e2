import itertools
import math

import numpy as np
import pytest

from seeqst.circuits import (
    GATE_MATRICES,
    Circuit,
    Connectivity,
    Gate,
    GateKind,
    Schedule,
    Variant,
    build_local_circuits,
    build_subset_circuits,
    circuits_for_subsets,
    conjugate_pauli,
    depth_report,
    eigenvalue_table,
    full_qst_plan,
    ghz_eigenstates,
    ghz_prep_layers,
    heavy_hex_ghz_depth,
)
from seeqst.subsets import SubsetKey, all_subsets, pauli_matrix
from seeqst.verify import eigenbasis_residual


def rotation(axis, theta):
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * pauli_matrix(axis)


class TestGates:
    def test_rotation_matrices_follow_exp_convention(self):
        np.testing.assert_allclose(GATE_MATRICES[GateKind.RX90], rotation("X", math.pi / 2), atol=1e-15)
        np.testing.assert_allclose(GATE_MATRICES[GateKind.RY90], rotation("Y", math.pi / 2), atol=1e-15)
        np.testing.assert_allclose(GATE_MATRICES[GateKind.RY90DAG], rotation("Y", -math.pi / 2), atol=1e-15)

    def test_cnot_needs_distinct_qubits(self):
        with pytest.raises(ValueError):
            Gate(GateKind.CNOT, (1, 1))
        with pytest.raises(ValueError):
            Gate(GateKind.RX90, (0, 1))

    def test_layer_disjointness(self):
        k = SubsetKey(0b11, 2)
        with pytest.raises(ValueError):
            Circuit(2, ((Gate(GateKind.RX90, (0,)), Gate(GateKind.RY90, (0,))), (Gate(GateKind.MEASURE_ALL, (0, 1)),)), "EVEN", k)

    def test_must_end_with_measurement(self):
        with pytest.raises(ValueError):
            Circuit(1, ((Gate(GateKind.RX90, (0,)),),), "ODD", SubsetKey(1, 1))

    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_unitarity(self, n):
        for c in full_qst_plan(n):
            u = c.unitary()
            assert np.abs(u.conj().T @ u - np.eye(1 << n)).max() < 1e-10

    def test_json_round_trip(self):
        for c in full_qst_plan(3, schedule=Schedule.ALL_TO_ALL) + full_qst_plan(2, Variant.LOCAL):
            assert Circuit.from_json(c.to_json()) == c


class TestSubsetCircuits:
    def test_single_off_diagonal_qubit(self):
        even, odd = build_subset_circuits(SubsetKey(0b10, 2))
        assert [g.kind for g in even.gates()] == [GateKind.RY90DAG]
        assert [g.kind for g in odd.gates()] == [GateKind.RX90]
        assert all(g.qubits == (0,) for g in (*even.gates(), *odd.gates()))

    def test_two_off_diagonal_qubits(self):
        assert [c.cnot_count for c in build_subset_circuits(SubsetKey(0b11, 2))] == [1, 1]

    def test_five_qubit_chain(self):
        k = SubsetKey(0b11111, 5)
        circuits = build_subset_circuits(k, Schedule.CHAIN)
        assert [c.cnot_count for c in circuits] == [4, 4]
        for c in circuits:
            u = c.unitary()
            images = np.array([u @ s for s in ghz_eigenstates(k, c.label)])
            assert len(images) == 32
            hits = np.argmax(np.abs(images), axis=1)
            assert sorted(hits) == list(range(32))
            np.testing.assert_allclose(np.abs(images[np.arange(32), hits]), 1, atol=1e-12)

    def test_diagonal(self):
        (c,) = build_subset_circuits(SubsetKey(0, 3))
        assert c.label == "DIAGONAL" and list(c.gates()) == []

    @pytest.mark.parametrize("schedule", list(Schedule))
    def test_eigenbasis_contract(self, schedule):
        assert eigenbasis_residual(4, schedule) < 1e-10

    def test_eigenstates_orthonormal(self):
        for k in all_subsets(4):
            if k.m == 0:
                continue
            for kind in ("EVEN", "ODD"):
                states = np.array(ghz_eigenstates(k, kind))
                np.testing.assert_allclose(states.conj() @ states.T, np.eye(16), atol=1e-12)

    def test_eigenvalue_table_matches_dense(self):
        for c in full_qst_plan(3) + full_qst_plan(3, Variant.LOCAL):
            u = c.unitary()
            labels, table = eigenvalue_table(c)
            for label, row in zip(labels, table):
                d = u @ pauli_matrix(label) @ u.conj().T
                np.testing.assert_allclose(d, np.diag(row), atol=1e-12)

    def test_conjugation_sign(self):
        even, odd = build_subset_circuits(SubsetKey(1, 1))
        assert conjugate_pauli(even, "X") == (1, "Z")
        assert conjugate_pauli(odd, "Y")[1] == "Z"


class TestLocal:
    def test_counts(self):
        assert len(build_local_circuits(SubsetKey(0, 2))) == 1
        assert len(build_local_circuits(SubsetKey(0b11, 2))) == 4

    def test_deduplicated_total(self):
        circuits = circuits_for_subsets(all_subsets(3), Variant.LOCAL)
        assert len(circuits) == 27
        assert len({c.label for c in circuits}) == 27

    def test_no_entangling_gates(self):
        assert all(c.cnot_count == 0 for c in full_qst_plan(4, Variant.LOCAL))


class TestPlanCounts:
    @pytest.mark.parametrize("n", range(1, 9))
    def test_seeqst(self, n):
        assert len(full_qst_plan(n)) == 2 ** (n + 1) - 1

    @pytest.mark.parametrize("n", range(1, 7))
    def test_local(self, n):
        assert len(full_qst_plan(n, Variant.LOCAL)) == 3**n

    def test_examples(self):
        assert len(full_qst_plan(1)) == 3
        assert len(full_qst_plan(5)) == 63
        assert len(full_qst_plan(3, Variant.LOCAL)) == 27


class TestDepth:
    @pytest.mark.parametrize("m", range(2, 17))
    def test_all_to_all_layers(self, m):
        qubits = list(range(m))
        layers = ghz_prep_layers(qubits, Schedule.ALL_TO_ALL)
        assert len(layers) == math.ceil(math.log2(m))
        assert sum(len(layer) for layer in layers) == m - 1
        for layer in layers:
            used = [q for pair in layer for q in pair]
            assert len(used) == len(set(used))
        k = SubsetKey((1 << m) - 1, m)
        assert depth_report(k, Connectivity.ALL_TO_ALL).two_qubit_layers == math.ceil(math.log2(m))

    @pytest.mark.parametrize("m", range(1, 9))
    def test_chain_layers(self, m):
        k = SubsetKey((1 << m) - 1, m)
        assert depth_report(k, Connectivity.CHAIN).two_qubit_layers == max(m - 1, 0)
        if m <= 5:
            for c in build_subset_circuits(k, Schedule.CHAIN):
                assert c.two_qubit_layers == max(m - 1, 0)

    def test_eight_all_to_all(self):
        k = SubsetKey(0xFF, 8)
        assert depth_report(k, Connectivity.ALL_TO_ALL).two_qubit_layers == 3
        for c in build_subset_circuits(k, Schedule.ALL_TO_ALL):
            assert c.two_qubit_layers == 3

    def test_single_off_diagonal(self):
        for conn in Connectivity:
            assert depth_report(SubsetKey(0b0100, 4), conn).two_qubit_layers == 0

    @pytest.mark.parametrize("m,k", [(5, 3), (8, 4), (13, 5)])
    def test_heavy_hex(self, m, k):
        # smallest k with m <= (k^2 + k + 1) / 2, by search
        assert min(j for j in range(1, 20) if 2 * m <= j * j + j + 1) == k
        assert heavy_hex_ghz_depth(m) == k
        key = SubsetKey((1 << m) - 1, m)
        assert depth_report(key, Connectivity.HEAVY_HEX_BOUND).two_qubit_layers == 3 * k
