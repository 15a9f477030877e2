"""Circuit execution on reference states, with optional per-layer noise.

Two engines share one entry point, :func:`exact_probabilities`:

* statevector (1-D input, noiseless), up to ``MAX_STATEVECTOR_QUBITS``;
* density matrix (2-D input or any noise), up to ``MAX_DENSITY_QUBITS``.

Noise is applied to every qubit, idle or not, after every gate layer. The
final ``MEASURE_ALL`` layer is not followed by noise.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, apply_gate, circuit_unitary

logger = logging.getLogger(__name__)

MAX_STATEVECTOR_QUBITS = 12
MAX_DENSITY_QUBITS = 6
RNG_NAME = "numpy.PCG64"
RNG_STREAM_RULE = "SeedSequence([master_seed, sha256(circuit_name)[:8] as uint64])"


class CapacityError(RuntimeError):
    """Raised when a simulation exceeds the desk-scale engine limits."""


class NoiseKind(str, enum.Enum):
    NONE = "NONE"
    AMPLITUDE_DAMPING = "AMPLITUDE_DAMPING"
    DEPOLARIZING = "DEPOLARIZING"


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.NONE
    strength: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"noise strength must lie in [0, 1], got {self.strength}")

    @property
    def is_noiseless(self) -> bool:
        return self.kind is NoiseKind.NONE

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Parse ``none``, ``ad:<gamma>`` or ``depol:<p>``."""
        text = text.strip().lower()
        if text == "none":
            return cls()
        name, _, value = text.partition(":")
        kinds = {"ad": NoiseKind.AMPLITUDE_DAMPING, "depol": NoiseKind.DEPOLARIZING}
        if name not in kinds or not value:
            raise ValueError(f"bad noise spec {text!r}; use none, ad:<gamma> or depol:<p>")
        return cls(kinds[name], float(value))

    def __str__(self) -> str:
        if self.is_noiseless:
            return "none"
        prefix = "ad" if self.kind is NoiseKind.AMPLITUDE_DAMPING else "depol"
        return f"{prefix}:{self.strength:g}"

    def kraus(self) -> list[np.ndarray]:
        """Single-qubit Kraus operators of the channel."""
        g = self.strength
        if self.kind is NoiseKind.AMPLITUDE_DAMPING:
            return [
                np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex),
                np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex),
            ]
        if self.kind is NoiseKind.DEPOLARIZING:
            paulis = [
                np.array([[0, 1], [1, 0]], dtype=complex),
                np.array([[0, -1j], [1j, 0]], dtype=complex),
                np.array([[1, 0], [0, -1]], dtype=complex),
            ]
            return [np.sqrt(1 - g) * np.eye(2, dtype=complex)] + [np.sqrt(g / 3) * p for p in paulis]
        return [np.eye(2, dtype=complex)]


@dataclass
class MeasurementRecord:
    """Counts observed for one circuit.

    ``probabilities`` optionally carries the exact outcome distribution; when
    present, estimators use it instead of ``counts / shots``.
    """

    label: str
    mask: int
    shots: int
    counts: dict = field(default_factory=dict)
    seed: int | None = None
    probabilities: dict | None = None

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if sum(self.counts.values()) != self.shots:
            raise ValueError(f"counts sum to {sum(self.counts.values())}, expected {self.shots}")
        lengths = {len(b) for b in self.counts}
        if len(lengths) > 1:
            raise ValueError("bitstrings of differing length in counts")

    @property
    def name(self) -> str:
        return f"{self.mask}:{self.label}"

    def frequencies(self, n_qubits: int) -> np.ndarray:
        """Outcome distribution as a length ``2**n_qubits`` vector."""
        out = np.zeros(1 << n_qubits)
        if self.probabilities is not None:
            for bits, p in self.probabilities.items():
                out[int(bits, 2)] = p
            return out
        for bits, n in self.counts.items():
            if len(bits) != n_qubits:
                raise ValueError(f"bitstring {bits!r} does not have {n_qubits} bits")
            out[int(bits, 2)] = n
        return out / self.shots

    def to_json(self) -> dict:
        doc = {
            "label": self.label,
            "mask": self.mask,
            "shots": self.shots,
            "seed": self.seed,
            "counts": dict(sorted(self.counts.items())),
        }
        if self.probabilities is not None:
            doc["probabilities"] = dict(sorted(self.probabilities.items()))
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "MeasurementRecord":
        return cls(
            label=doc["label"],
            mask=int(doc["mask"]),
            shots=int(doc["shots"]),
            counts={k: int(v) for k, v in doc["counts"].items()},
            seed=doc.get("seed"),
            probabilities=doc.get("probabilities"),
        )


# --- density-matrix validation -------------------------------------------------


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"state dimension {dim} is not a power of two")
    if state.ndim == 2 and state.shape != (dim, dim):
        raise ValueError(f"density matrix must be square, got {state.shape}")
    return n


def validate_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    n_qubits_of(rho)
    if rho.ndim != 2:
        raise ValueError("density matrix must be 2-D")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix has negative eigenvalues")


# --- reference states -----------------------------------------------------------


def plus_y_vector(n_qubits: int) -> np.ndarray:
    single = np.array([1, 1j]) / np.sqrt(2)
    out = np.ones(1, dtype=complex)
    for _ in range(n_qubits):
        out = np.kron(out, single)
    return out


def ghz_minus_i_vector(n_qubits: int) -> np.ndarray:
    """``(|0...0> - i|1...1>) / sqrt(2)``."""
    out = np.zeros(1 << n_qubits, dtype=complex)
    out[0] = 1 / np.sqrt(2)
    out[-1] += -1j / np.sqrt(2)
    return out


def random_full_rank(n_qubits: int, seed) -> np.ndarray:
    """Ginibre state ``G G^dagger / tr(G G^dagger)``."""
    rng = np.random.default_rng(seed)
    dim = 1 << n_qubits
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@dataclass(frozen=True)
class StateSpec:
    """``plusy``, ``ghz-i`` or ``random:<seed>``."""

    kind: str
    seed: int | None = None

    @classmethod
    def parse(cls, text: str) -> "StateSpec":
        text = text.strip().lower()
        if text in ("plusy", "ghz-i"):
            return cls(text)
        if text.startswith("random:"):
            return cls("random", int(text.split(":", 1)[1]))
        raise ValueError(f"bad state spec {text!r}; use plusy, ghz-i or random:<seed>")

    def __str__(self) -> str:
        return f"random:{self.seed}" if self.kind == "random" else self.kind

    def vector(self, n_qubits: int) -> np.ndarray | None:
        """Statevector for pure reference states, ``None`` for mixed ones."""
        if self.kind == "plusy":
            return plus_y_vector(n_qubits)
        if self.kind == "ghz-i":
            return ghz_minus_i_vector(n_qubits)
        return None


def make_reference_state(spec, n_qubits: int) -> np.ndarray:
    """Density matrix of a reference state (``StateSpec`` or its string form)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if isinstance(spec, str):
        spec = StateSpec.parse(spec)
    vec = spec.vector(n_qubits)
    if vec is not None:
        return np.outer(vec, vec.conj())
    return random_full_rank(n_qubits, spec.seed)


# --- engines ----------------------------------------------------------------------


def _check_capacity(n: int, density: bool) -> None:
    limit = MAX_DENSITY_QUBITS if density else MAX_STATEVECTOR_QUBITS
    if n > limit:
        engine = "density-matrix" if density else "statevector"
        raise CapacityError(
            f"{n} qubits exceeds the {engine} engine limit of {limit}; "
            "use a pure reference state without noise or fewer qubits"
        )


def _apply_channel(rho_t: np.ndarray, kraus: list[np.ndarray], qubit: int, n: int) -> np.ndarray:
    out = np.zeros_like(rho_t)
    for k in kraus:
        tmp = np.moveaxis(np.tensordot(k, rho_t, axes=([1], [qubit])), 0, qubit)
        tmp = np.moveaxis(np.tensordot(k.conj(), tmp, axes=([1], [n + qubit])), 0, n + qubit)
        out += tmp
    return out


def evolve_density(rho: np.ndarray, circuit: Circuit, noise: NoiseSpec = NoiseSpec()) -> np.ndarray:
    """Final density matrix after all gate layers and their noise."""
    n = circuit.n_qubits
    dim = 1 << n
    rho_t = np.asarray(rho, dtype=complex).reshape((2,) * (2 * n))
    kraus = None if noise.is_noiseless else noise.kraus()
    for layer in circuit.gate_layers:
        for gate in layer:
            rho_t = apply_gate(rho_t, gate, n)
            rho_t = np.conj(apply_gate(np.conj(rho_t), gate, n, axes_offset=n))
        if kraus is not None:
            for q in range(n):
                rho_t = _apply_channel(rho_t, kraus, q, n)
    return rho_t.reshape(dim, dim)


def evolve_statevector(psi: np.ndarray, circuit: Circuit) -> np.ndarray:
    n = circuit.n_qubits
    psi_t = np.asarray(psi, dtype=complex).reshape((2,) * n)
    for gate in circuit.gates():
        psi_t = apply_gate(psi_t, gate, n)
    return psi_t.reshape(-1)


def exact_probabilities(state: np.ndarray, circuit: Circuit, noise: NoiseSpec = NoiseSpec()) -> np.ndarray:
    """Outcome distribution of ``circuit`` on ``state``.

    Args:
        state: statevector (1-D) or density matrix (2-D) on ``circuit.n_qubits``.
        circuit: measurement circuit.
        noise: per-layer, per-qubit channel.
    """
    state = np.asarray(state)
    n = n_qubits_of(state)
    if n != circuit.n_qubits:
        raise ValueError(f"state has {n} qubits but circuit has {circuit.n_qubits}")
    if state.ndim == 1 and noise.is_noiseless:
        _check_capacity(n, density=False)
        probs = np.abs(evolve_statevector(state, circuit)) ** 2
    else:
        _check_capacity(n, density=True)
        rho = np.outer(state, state.conj()) if state.ndim == 1 else state
        if noise.is_noiseless:
            u = circuit_unitary(circuit)
            probs = np.einsum("ij,jk,ik->i", u, rho, u.conj()).real
        else:
            probs = np.diagonal(evolve_density(rho, circuit, noise)).real
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_counts(probs, shots: int, seed: int) -> dict:
    """Multinomial draw of ``shots`` outcomes; keys are bitstrings, zero counts omitted."""
    p = np.asarray(probs, dtype=float)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if np.any(p < -1e-9):
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()}, expected 1")
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    n = max((len(p) - 1).bit_length(), 1)
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.multinomial(shots, p)
    return {format(z, f"0{n}b"): int(c) for z, c in enumerate(draws) if c}


def derive_seed(master_seed: int, name: str) -> int:
    """Per-circuit 64-bit seed from the master seed and the circuit name."""
    digest = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
    state = np.random.SeedSequence([int(master_seed), digest]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def simulate_circuit(state, circuit: Circuit, shots: int, noise: NoiseSpec, seed: int, keep_probabilities: bool = False) -> MeasurementRecord:
    probs = exact_probabilities(state, circuit, noise)
    circuit_seed = derive_seed(seed, circuit.name)
    counts = sample_counts(probs, shots, circuit_seed)
    exact = None
    if keep_probabilities:
        n = circuit.n_qubits
        exact = {format(z, f"0{n}b"): float(p) for z, p in enumerate(probs) if p > 0}
    return MeasurementRecord(circuit.label, circuit.subset.mask, shots, counts, circuit_seed, exact)


def run_plan(state, circuits, shots: int, noise: NoiseSpec = NoiseSpec(), seed: int = 0, jobs: int = 1, keep_probabilities: bool = False) -> list[MeasurementRecord]:
    """Simulate every circuit; one record per circuit, in input order.

    Circuits are independent, so they are fanned out over ``jobs`` threads.
    Seeds depend only on ``seed`` and each circuit's name, never on
    scheduling, so results are identical for any ``jobs``.
    """
    circuits = list(circuits)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if len({c.n_qubits for c in circuits}) > 1:
        raise ValueError("circuits act on different numbers of qubits")

    def work(c):
        return simulate_circuit(state, c, shots, noise, seed, keep_probabilities)

    if jobs <= 1:
        return [work(c) for c in circuits]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, circuits))
