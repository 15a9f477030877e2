"""Property checks exposed through ``seeqst verify``."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .circuits import (
    Schedule,
    Variant,
    build_subset_circuits,
    circuit_unitary,
    eigenvalue_table,
    full_qst_plan,
    ghz_eigenstates,
)
from .subsets import all_subsets, eo_split, pauli_matrix


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _bits(labels) -> tuple[np.ndarray, np.ndarray]:
    arr = np.array([list(p) for p in labels]) if labels else np.zeros((0, 0), dtype="<U1")
    x = np.isin(arr, ("X", "Y")).astype(np.int64)
    z = np.isin(arr, ("Z", "Y")).astype(np.int64)
    return x, z


def anticommutation_matrix(a, b) -> np.ndarray:
    """``out[i, j] = 1`` iff ``a[i]`` and ``b[j]`` anti-commute (symplectic form)."""
    xa, za = _bits(a)
    xb, zb = _bits(b)
    return (xa @ zb.T + za @ xb.T) % 2


def commutation_violations(n_qubits: int) -> int:
    """Count violations of the EVEN/ODD structure over every subset.

    Within EVEN and within ODD all pairs must commute; restricted to the
    off-diagonal qubits every EVEN/ODD pair must anti-commute.
    """
    violations = 0
    for k in all_subsets(n_qubits):
        split = eo_split(k)
        violations += int(anticommutation_matrix(split.even, split.even).sum())
        violations += int(anticommutation_matrix(split.odd, split.odd).sum())
        if k.m >= 1:
            off = k.off_diagonal_qubits
            even = ["".join(p[q] for q in off) for p in split.even]
            odd = ["".join(p[q] for q in off) for p in split.odd]
            violations += int((1 - anticommutation_matrix(even, odd)).sum())
    return violations


def dense_commutation_violations(n_qubits: int, atol: float = 1e-12) -> int:
    violations = 0
    for k in all_subsets(n_qubits):
        split = eo_split(k)
        mats = {p: pauli_matrix(p) for p in split.even + split.odd}
        for group in (split.even, split.odd):
            for a, b in itertools.combinations(group, 2):
                if np.abs(mats[a] @ mats[b] - mats[b] @ mats[a]).max() > atol:
                    violations += 1
        off = k.off_diagonal_qubits
        for a, b in itertools.product(split.even, split.odd):
            ra = pauli_matrix("".join(a[q] for q in off))
            rb = pauli_matrix("".join(b[q] for q in off))
            if np.abs(ra @ rb + rb @ ra).max() > atol:
                violations += 1
    return violations


def eigenbasis_residual(n_qubits: int, schedule: Schedule) -> float:
    """Largest deviation from the eigenbasis contract over all subsets.

    For every EVEN/ODD circuit: each GHZ-type eigenstate must map to a single
    computational basis state (distinct for distinct eigenstates), and
    ``U P U^dagger`` must be diagonal with entries +/-1 for every measured P.
    Returns ``inf`` if the mapping is not a bijection.
    """
    worst = 0.0
    for k in all_subsets(n_qubits):
        if k.m == 0:
            continue
        for c in build_subset_circuits(k, schedule):
            u = circuit_unitary(c)
            images = np.array([u @ s for s in ghz_eigenstates(k, c.label)])
            targets = np.argmax(np.abs(images), axis=1)
            if len(set(targets.tolist())) != len(targets):
                return float("inf")
            residual = images.copy()
            residual[np.arange(len(targets)), targets] = 0
            worst = max(worst, float(np.abs(residual).max()))
            worst = max(worst, float(np.abs(np.abs(images[np.arange(len(targets)), targets]) - 1).max()))
            labels, table = eigenvalue_table(c)
            for p, label in enumerate(labels):
                d = u @ pauli_matrix(label) @ u.conj().T
                off = d - np.diag(np.diag(d))
                worst = max(worst, float(np.abs(off).max()), float(np.abs(np.diag(d) - table[p]).max()))
    return worst


def _timed(name, fn) -> CheckResult:
    start = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, passed, detail, time.perf_counter() - start)


def run_checks(max_symplectic: int = 8, max_dense: int = 4, max_circuit: int = 5) -> list[CheckResult]:
    results = []

    def counts():
        bad = [n for n in range(1, max_symplectic + 1) if len(full_qst_plan(n)) != 2 ** (n + 1) - 1]
        bad += [n for n in range(1, 7) if len(full_qst_plan(n, Variant.LOCAL)) != 3**n]
        return not bad, f"circuit counts, mismatches at N={bad}" if bad else "2^(N+1)-1 and 3^N circuit counts"

    def symplectic():
        total = sum(commutation_violations(n) for n in range(1, max_symplectic + 1))
        return total == 0, f"{total} symplectic violations for N<= {max_symplectic}"

    def dense():
        total = sum(dense_commutation_violations(n) for n in range(1, max_dense + 1))
        return total == 0, f"{total} dense-matrix violations for N<={max_dense}"

    def eigen():
        worst = max(
            eigenbasis_residual(n, s) for n in range(1, max_circuit + 1) for s in Schedule
        )
        return worst < 1e-10, f"max off-diagonal residual {worst:.2e} for N<={max_circuit}"

    for name, fn in (("plan-counts", counts), ("commutation-symplectic", symplectic), ("commutation-dense", dense), ("eigenbasis-contract", eigen)):
        results.append(_timed(name, fn))
    return results
