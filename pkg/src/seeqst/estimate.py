"""Reconstruction of density-matrix elements from measurement records."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .circuits import (
    Circuit,
    Schedule,
    build_local_circuits,
    build_subset_circuits,
    circuit_unitary,
    eigenvalue_table,
)
from .sim import MeasurementRecord
from .subsets import (
    ElementIndex,
    SubsetKey,
    _coefficient_matrix,
    _pauli_entry,
    elements_of_subset,
    observable_set,
)

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12


class Method(str, enum.Enum):
    DIRECT = "DIRECT"
    MLE = "MLE"


@dataclass
class SubsetEstimate:
    mask: SubsetKey
    values: dict
    method: Method = Method.DIRECT


# --- records -> circuits ----------------------------------------------------------


def circuit_for_record(record: MeasurementRecord, n_qubits: int, schedule: Schedule = Schedule.CHAIN) -> Circuit:
    """Rebuild the circuit that produced ``record``."""
    key = SubsetKey(record.mask, n_qubits)
    if record.label.startswith("LOCAL:"):
        built = build_local_circuits(key)
    else:
        built = build_subset_circuits(key, schedule)
    for c in built:
        if c.label == record.label:
            return c
    raise ValueError(f"record {record.name} does not match any circuit of subset {key.name}")


def pauli_expectations(records, k: SubsetKey, schedule: Schedule = Schedule.CHAIN) -> dict:
    """Expectation values of the observables of ``k`` measured by ``records``.

    Each record contributes ``<P> = sum_z lambda_P(z) f(z)`` for every P it
    measures, where ``lambda_P(z)`` is the eigenvalue of P on the state the
    circuit maps to outcome ``z``.

    Raises:
        ValueError: if a record belongs to another subset, or the records do
            not cover the whole observable set of ``k``.
    """
    n = k.n_qubits
    out = {}
    for rec in records:
        if rec.mask != k.mask:
            raise ValueError(f"record {rec.name} does not belong to subset {k.name}")
        circuit = circuit_for_record(rec, n, schedule)
        labels, table = eigenvalue_table(circuit)
        values = table @ rec.frequencies(n)
        for label, value in zip(labels, values):
            out[label] = float(value)
    missing = [p for p in observable_set(k) if p not in out]
    if missing:
        raise ValueError(f"records for {k.name} leave {len(missing)} observables unmeasured, e.g. {missing[0]}")
    return out


def direct_estimate(records, k: SubsetKey, schedule: Schedule = Schedule.CHAIN) -> SubsetEstimate:
    """Closed-form estimate ``rho[i, j] = sum_P a_P <P>`` for every member of ``k``."""
    expectations = pauli_expectations(records, k, schedule)
    labels = observable_set(k)
    vec = np.array([expectations[p] for p in labels])
    values = _coefficient_matrix(k.mask, k.n_qubits) @ vec
    return SubsetEstimate(
        k,
        {ElementIndex(r, r ^ k.mask, k.n_qubits): complex(v) for r, v in enumerate(values)},
        Method.DIRECT,
    )


def sensing_matrix(k: SubsetKey) -> np.ndarray:
    """Linear map from the subset's element vector to its Pauli expectations.

    ``A[p, r] = <c|P|r>`` for element ``(r, c = r ^ mask)``, since
    ``tr(rho P) = sum_{r,c} rho[r, c] P[c, r]`` over the subset.
    """
    n = k.n_qubits
    labels = observable_set(k)
    members = elements_of_subset(k)
    a = np.empty((len(labels), len(members)), dtype=complex)
    for p, label in enumerate(labels):
        for r, e in enumerate(members):
            a[p, r] = _pauli_entry(label, e.col, e.row, n)
    return a


def least_squares_estimate(records, k: SubsetKey, schedule: Schedule = Schedule.CHAIN) -> SubsetEstimate:
    """Solve ``min || A rho_S - d ||_2`` for the subset's elements."""
    expectations = pauli_expectations(records, k, schedule)
    d = np.array([expectations[p] for p in observable_set(k)], dtype=complex)
    solution, *_ = np.linalg.lstsq(sensing_matrix(k), d, rcond=None)
    return SubsetEstimate(
        k,
        {e: complex(v) for e, v in zip(elements_of_subset(k), solution)},
        Method.DIRECT,
    )


def group_records(records) -> dict:
    """Records keyed by subset mask."""
    groups: dict = {}
    for rec in records:
        groups.setdefault(rec.mask, []).append(rec)
    return groups


def direct_estimate_all(records, n_qubits: int, schedule: Schedule = Schedule.CHAIN, jobs: int = 1) -> dict:
    """Direct estimates for every subset present in ``records``, run in parallel.

    Returns a mapping ``ElementIndex -> complex`` over all estimated subsets.
    """
    groups = group_records(records)
    keys = [SubsetKey(mask, n_qubits) for mask in sorted(groups)]

    def work(k):
        return direct_estimate(groups[k.mask], k, schedule)

    if jobs <= 1:
        results = [work(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, keys))
    values = {}
    for est in results:
        values.update(est.values)
    return values


def assemble_matrix(values: dict, n_qubits: int) -> np.ndarray:
    """Dense matrix from element estimates; unestimated entries are NaN."""
    dim = 1 << n_qubits
    out = np.full((dim, dim), np.nan, dtype=complex)
    for e, v in values.items():
        out[e.row, e.col] = v
    return out


# --- maximum likelihood -------------------------------------------------------------


@dataclass
class MleConfig:
    max_iters: int = 2000
    learning_rate: float = 0.05
    decay: float = 0.999
    tolerance: float = 1e-9
    seed: int = 0
    minibatch: int | None = None
    init_scale: float = 1e-2

    def __post_init__(self):
        if self.max_iters < 1 or self.learning_rate <= 0 or self.tolerance <= 0:
            raise ValueError("max_iters, learning_rate and tolerance must be positive")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must lie in (0, 1]")
        if self.minibatch is not None and self.minibatch < 1:
            raise ValueError("minibatch must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class MleResult:
    rho: np.ndarray
    loss: float
    iterations: int
    converged: bool
    config: MleConfig
    history: list = field(default_factory=list)


class LikelihoodModel:
    """Negative log-likelihood of a set of records as a function of ``T``.

    ``rho = T^dagger T / tr(T^dagger T)``; outcome ``z`` of a circuit with
    unitary ``U`` has probability ``<u_z| rho |u_z>`` with ``u_z`` the
    conjugate of row ``z`` of ``U``. Stacking those rows gives ``V`` with
    ``p = diag(V rho V^dagger)``.
    """

    def __init__(self, records, n_qubits: int, schedule: Schedule = Schedule.CHAIN):
        records = list(records)
        if not records:
            raise ValueError("at least one record is required")
        self.n_qubits = n_qubits
        blocks, data, owner = [], [], []
        for i, rec in enumerate(records):
            u = circuit_unitary(circuit_for_record(rec, n_qubits, schedule))
            blocks.append(u)
            data.append(rec.frequencies(n_qubits) * rec.shots)
            owner.append(np.full(1 << n_qubits, i))
        self.rows = np.vstack(blocks)
        self.counts = np.concatenate(data)
        self.owner = np.concatenate(owner)
        self.n_records = len(records)

    def probabilities(self, rho: np.ndarray, rows=None) -> np.ndarray:
        v = self.rows if rows is None else self.rows[rows]
        return np.einsum("kd,de,ke->k", v, rho, v.conj()).real

    def loss(self, t: np.ndarray, rows=None) -> float:
        rho = rho_from_t(t)
        p = np.maximum(self.probabilities(rho, rows), PROBABILITY_FLOOR)
        d = self.counts if rows is None else self.counts[rows]
        return float(-np.sum(d * np.log(p)))

    def gradient(self, t: np.ndarray, rows=None) -> tuple[float, np.ndarray]:
        """Loss and its gradient ``dL/dRe(T) + i dL/dIm(T)``."""
        a = t.conj().T @ t
        trace = np.trace(a).real
        rho = a / trace
        v = self.rows if rows is None else self.rows[rows]
        d = self.counts if rows is None else self.counts[rows]
        p = self.probabilities(rho, rows)
        clipped = p < PROBABILITY_FLOOR
        loss = float(-np.sum(d * np.log(np.maximum(p, PROBABILITY_FLOOR))))
        w = np.where(clipped, 0.0, d / np.maximum(p, PROBABILITY_FLOOR))
        # dL = tr(G d rho) with G = -V^dagger diag(w) V
        g = -(v.conj().T * w) @ v
        h = (g - np.trace(g @ rho).real * np.eye(len(rho))) / trace
        return loss, 2 * t @ h


def rho_from_t(t: np.ndarray) -> np.ndarray:
    a = t.conj().T @ t
    a = (a + a.conj().T) / 2
    return a / np.trace(a).real


def mle_estimate(records, n_qubits: int, cfg: MleConfig | None = None, schedule: Schedule = Schedule.CHAIN) -> MleResult:
    """Maximum-likelihood state over the full density-matrix space.

    Minimizes ``-sum d_i log p_i`` over all (circuit, outcome) pairs with the
    Adam update rule on the real and imaginary parts of ``T``. The learning
    rate decays geometrically. The best iterate seen is returned, so the
    reported loss never increases.
    """
    cfg = cfg or MleConfig()
    model = LikelihoodModel(records, n_qubits, schedule)
    rng = np.random.default_rng(cfg.seed)
    dim = 1 << n_qubits
    t = np.eye(dim, dtype=complex) / math.sqrt(dim)
    t += cfg.init_scale * (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))

    total = model.counts.sum()
    m = np.zeros_like(t)
    s = np.zeros((dim, dim))
    beta1, beta2, eps = 0.9, 0.999, 1e-12
    lr = cfg.learning_rate

    best_t, best_loss = t.copy(), model.loss(t)
    history = [best_loss]
    previous = best_loss
    converged = False
    stalled = 0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        rows = None
        if cfg.minibatch is not None and cfg.minibatch < model.n_records:
            chosen = rng.choice(model.n_records, cfg.minibatch, replace=False)
            rows = np.isin(model.owner, chosen)
        _, grad = model.gradient(t, rows)
        grad = grad / total
        m = beta1 * m + (1 - beta1) * grad
        s = beta2 * s + (1 - beta2) * np.abs(grad) ** 2
        m_hat = m / (1 - beta1**it)
        s_hat = s / (1 - beta2**it)
        # elementwise Adam on the real and imaginary parts
        step = m_hat.real / (np.sqrt(s_hat) + eps) + 1j * m_hat.imag / (np.sqrt(s_hat) + eps)
        t = t - lr * step
        lr *= cfg.decay

        loss = model.loss(t)
        history.append(loss)
        if loss < best_loss:
            best_loss, best_t = loss, t.copy()
        change = (previous - loss) / max(abs(previous), 1e-300)
        stalled = stalled + 1 if 0 <= change < cfg.tolerance else 0
        previous = loss
        if stalled >= 10:
            converged = True
            break

    if not converged:
        logger.info("MLE stopped at max_iters=%d without meeting tolerance %g", cfg.max_iters, cfg.tolerance)
    return MleResult(rho_from_t(best_t), best_loss, it, converged, cfg, history)


# --- metrics ------------------------------------------------------------------------


def _clamp(w: np.ndarray) -> np.ndarray:
    # eigenvalues at rounding level are zero; their square roots would not be
    floor = len(w) * np.finfo(float).eps * max(float(np.abs(w).max()), 1e-300)
    return np.where(w > floor, w, 0.0)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    return (v * np.sqrt(_clamp(w))) @ v.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    root = _psd_sqrt(rho)
    inner = root @ sigma @ root
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    value = float(np.sum(np.sqrt(_clamp(w))) ** 2)
    return min(max(value, 0.0), 1.0)


def delta_err(estimates: dict, truth: np.ndarray, group) -> float:
    """Mean ``|rho_est - rho_true|`` over every element of the subsets in ``group``."""
    errors = []
    for k in group:
        for e in elements_of_subset(k):
            if e not in estimates:
                raise ValueError(f"no estimate for element ({e.row}, {e.col})")
            errors.append(abs(estimates[e] - truth[e.row, e.col]))
    if not errors:
        raise ValueError("empty group")
    return float(np.mean(errors))


def cnot_count_of(k: SubsetKey) -> int:
    return max(k.m - 1, 0)


def delta_err_by_cnot_count(estimates: dict, truth: np.ndarray, keys) -> dict:
    """``delta_err`` over groups of subsets that need the same number of CNOTs."""
    groups: dict = {}
    for k in keys:
        groups.setdefault(cnot_count_of(k), []).append(k)
    return {c: delta_err(estimates, truth, groups[c]) for c in sorted(groups)}


# --- empirical scaling model -----------------------------------------------------


class ScalingVariant(str, enum.Enum):
    SQ = "SQ"
    CNOT = "CNOT"


@dataclass(frozen=True)
class ScalingModel:
    """``err(N, M, S) = 2**(A(N) + B(N) M) / sqrt(S)`` with power-law A and B."""

    a0: float = -0.9177
    a1: float = -0.24734
    a2: float = 1.2529
    b1: float = 0.6358
    b2: float = -0.1168
    residual_rms: float | None = None

    def a(self, n) -> float:
        return self.a0 + self.a1 * np.power(n, self.a2)

    def b(self, n) -> float:
        return self.b1 * np.power(n, self.b2)

    def coefficients(self) -> tuple[float, ...]:
        return (self.a0, self.a1, self.a2, self.b1, self.b2)

    def to_json(self) -> dict:
        return asdict(self)


def scaling_predict(model: ScalingModel, n: int, m: int, s: float, variant: ScalingVariant = ScalingVariant.SQ) -> float:
    """Predicted mean element error at ``S`` samples.

    The entangling variant behaves like the single-qubit one at ``M = 1``
    for every ``M >= 1``.
    """
    variant = ScalingVariant(variant)
    if n < 1 or s < 1:
        raise ValueError("need N >= 1 and S >= 1")
    if not 0 <= m <= n:
        raise ValueError(f"M={m} must lie in [0, N={n}]")
    if variant is ScalingVariant.CNOT:
        m = min(m, 1)
    return float(2 ** (model.a(n) + model.b(n) * m) / math.sqrt(s))


def _log_surface(params, n, m):
    a0, a1, a2, b1, b2 = params
    return a0 + a1 * np.power(n, a2) + b1 * np.power(n, b2) * m


def fit_scaling(observations, initial: ScalingModel | None = None) -> ScalingModel:
    """Least-squares fit of ``log2(err * sqrt(S))`` to ``A(N) + B(N) M``.

    Args:
        observations: iterable of ``(N, M, S, err)``.
        initial: starting point, default coefficients if omitted.

    Returns:
        Fitted model with ``residual_rms`` set (in log2 units).
    """
    obs = np.asarray(list(observations), dtype=float)
    if obs.ndim != 2 or obs.shape[0] < 5 or obs.shape[1] != 4:
        raise ValueError("need at least 5 observations of (N, M, S, err)")
    n, m, s, err = obs.T
    if min(len(np.unique(n)), len(np.unique(m)), len(np.unique(s))) < 2:
        raise ValueError("degenerate design: need at least two distinct values of each of N, M, S")
    if np.any(err <= 0) or np.any(s <= 0) or np.any(n <= 0):
        raise ValueError("errors, sample sizes and N must be positive")
    target = np.log2(err * np.sqrt(s))
    start = np.array((initial or ScalingModel(a0=-1.0, a1=-0.2, a2=1.0, b1=0.5, b2=0.0)).coefficients())

    result = optimize.least_squares(
        lambda p: _log_surface(p, n, m) - target,
        start,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=20000,
    )
    rms = float(np.sqrt(np.mean(result.fun**2)))
    return ScalingModel(*map(float, result.x), residual_rms=rms)
