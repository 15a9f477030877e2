"""Randomized simulation studies built from the planning, sim and estimate layers.

Sample budgets follow the convention ``S = settings x shots``: a budget of
``S`` for a subset is split evenly over the circuits that subset needs
(1 for the diagonal subset, 2 for the entangling pair, ``2**M`` for the
single-qubit-only variant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Schedule, Variant, build_local_circuits, build_subset_circuits
from .estimate import (
    MleConfig,
    delta_err,
    direct_estimate,
    fidelity,
    mle_estimate,
)
from .sim import (
    MeasurementRecord,
    NoiseSpec,
    derive_seed,
    exact_probabilities,
    random_full_rank,
    run_plan,
    sample_counts,
)
from .subsets import SubsetKey, all_subsets, elements_of_subset


def subset_circuits(k: SubsetKey, variant: Variant, schedule: Schedule = Schedule.CHAIN):
    if Variant(variant) is Variant.LOCAL:
        return build_local_circuits(k)
    return list(build_subset_circuits(k, schedule))


@dataclass
class ErrorSweep:
    """Per-state mean element errors, indexed ``errors[state, budget, M]``."""

    n_qubits: int
    budgets: tuple
    variant: Variant
    errors: np.ndarray

    def mean(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    def std(self) -> np.ndarray:
        return self.errors.std(axis=0, ddof=1) if self.errors.shape[0] > 1 else np.zeros(self.errors.shape[1:])

    def rows(self):
        """Tidy rows ``(N, M, S, variant, mean, std, n_states)``."""
        mean, std = self.mean(), self.std()
        for b, s in enumerate(self.budgets):
            for m in range(self.n_qubits + 1):
                yield (self.n_qubits, m, s, self.variant.value, mean[b, m], std[b, m], self.errors.shape[0])


def error_sweep(
    n_qubits: int,
    budgets,
    n_states: int,
    variant: Variant = Variant.SEEQST,
    seed: int = 0,
    schedule: Schedule = Schedule.CHAIN,
    per_subset_budget: bool = True,
) -> ErrorSweep:
    """Direct-estimation error grouped by the number of off-diagonal qubits.

    For each random full-rank state every subset is simulated at every
    budget and estimated on its own; ``errors[i, b, M]`` is the mean
    absolute element error over all subsets with that ``M``.

    Args:
        budgets: sample sizes ``S``.
        per_subset_budget: if true, ``S`` is split over the subset's
            circuits; otherwise every circuit gets ``S`` shots.
    """
    variant = Variant(variant)
    budgets = tuple(int(s) for s in budgets)
    keys = all_subsets(n_qubits)
    errors = np.zeros((n_states, len(budgets), n_qubits + 1))
    for i in range(n_states):
        state_seed = seed * 100_003 + i
        rho = random_full_rank(n_qubits, state_seed)
        per_m: dict = {}
        for k in keys:
            circuits = subset_circuits(k, variant, schedule)
            probs = [exact_probabilities(rho, c) for c in circuits]
            for b, budget in enumerate(budgets):
                shots = max(budget // len(circuits), 1) if per_subset_budget else budget
                records = [
                    MeasurementRecord(
                        c.label,
                        k.mask,
                        shots,
                        sample_counts(p, shots, derive_seed(state_seed, f"{budget}/{c.name}")),
                    )
                    for c, p in zip(circuits, probs)
                ]
                est = direct_estimate(records, k, schedule)
                err = [abs(est.values[e] - rho[e.row, e.col]) for e in elements_of_subset(k)]
                per_m.setdefault((b, k.m), []).extend(err)
        for (b, m), values in per_m.items():
            errors[i, b, m] = np.mean(values)
    return ErrorSweep(n_qubits, budgets, variant, errors)


def loglog_slope(budgets, errors) -> float:
    """Least-squares slope of ``log(err)`` against ``log(S)``."""
    slope, _ = np.polyfit(np.log(np.asarray(budgets, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


def sweep_observations(sweep: ErrorSweep, m_values=None):
    """``(N, M, S, err)`` tuples for :func:`seeqst.estimate.fit_scaling`."""
    mean = sweep.mean()
    ms = range(sweep.n_qubits + 1) if m_values is None else m_values
    return [
        (sweep.n_qubits, m, s, mean[b, m])
        for b, s in enumerate(sweep.budgets)
        for m in ms
    ]


def noisy_mle_fidelity(
    n_qubits: int,
    noise: NoiseSpec,
    variant: Variant,
    state_seed: int,
    shots: int = 16384,
    sample_seed: int = 0,
    schedule: Schedule = Schedule.CHAIN,
    cfg: MleConfig | None = None,
) -> float:
    """Fidelity of the MLE state from a full plan simulated under ``noise``."""
    from .circuits import full_qst_plan

    rho = random_full_rank(n_qubits, state_seed)
    records = run_plan(rho, full_qst_plan(n_qubits, variant, schedule), shots, noise, sample_seed)
    result = mle_estimate(records, n_qubits, cfg, schedule)
    return fidelity(result.rho, rho)


def subset_growth(
    n_qubits: int,
    subset_counts,
    n_states: int,
    shots: int = 16384,
    seed: int = 0,
    schedule: Schedule = Schedule.CHAIN,
    cfg: MleConfig | None = None,
) -> dict:
    """Direct vs MLE error as more non-diagonal subsets are included.

    For each state and each count ``c``, ``c`` random non-diagonal subsets
    are chosen; both estimators see only those subsets' records and are
    scored on the union of their elements.

    Returns:
        ``{"direct": array[state, count], "mle": array[state, count]}``.
    """
    from .estimate import direct_estimate_all

    subset_counts = tuple(subset_counts)
    direct = np.zeros((n_states, len(subset_counts)))
    mle = np.zeros_like(direct)
    rng = np.random.default_rng(seed)
    non_diagonal = [k for k in all_subsets(n_qubits) if k.m > 0]
    for i in range(n_states):
        rho = random_full_rank(n_qubits, seed * 100_003 + i)
        for j, count in enumerate(subset_counts):
            chosen = sorted(rng.choice(len(non_diagonal), count, replace=False))
            keys = [non_diagonal[c] for c in chosen]
            circuits = [c for k in keys for c in build_subset_circuits(k, schedule)]
            records = run_plan(rho, circuits, shots, NoiseSpec(), seed=seed * 7919 + i * 131 + j)
            values = direct_estimate_all(records, n_qubits, schedule)
            direct[i, j] = delta_err(values, rho, keys)
            result = mle_estimate(records, n_qubits, cfg, schedule)
            ml_values = {e: result.rho[e.row, e.col] for k in keys for e in elements_of_subset(k)}
            mle[i, j] = delta_err(ml_values, rho, keys)
    return {"direct": direct, "mle": mle}
