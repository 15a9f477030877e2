"""Measurement circuits: GHZ-basis pairs, single-qubit-only variant, depths.

For a subset with off-diagonal qubits ``q_0 < q_1 < ... < q_{M-1}`` the
measurement circuit is the inverse of a GHZ preparation on those qubits:
the CNOT network of the preparation is undone in reverse order, then the
pivot ``q_0`` is rotated so that

* EVEN: ``(|p> +/- |~p>)/sqrt(2) -> |0/1>``  (``RY90DAG`` on the pivot)
* ODD:  ``(|p> +/- i|~p>)/sqrt(2) -> |0/1>`` (``RX90`` on the pivot)

after which every qubit is measured in the computational basis.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .subsets import SubsetKey, all_subsets, eo_split, observable_set, pauli_matrix


class GateKind(str, enum.Enum):
    RX90 = "RX90"
    RY90 = "RY90"
    RX90DAG = "RX90DAG"
    RY90DAG = "RY90DAG"
    H = "H"
    CNOT = "CNOT"
    MEASURE_ALL = "MEASURE_ALL"


class Schedule(str, enum.Enum):
    """How the CNOT network of the GHZ inverse is laid out."""

    CHAIN = "CHAIN"
    ALL_TO_ALL = "ALL_TO_ALL"


class Connectivity(str, enum.Enum):
    CHAIN = "CHAIN"
    ALL_TO_ALL = "ALL_TO_ALL"
    HEAVY_HEX_BOUND = "HEAVY_HEX_BOUND"


class Variant(str, enum.Enum):
    SEEQST = "SEEQST"
    LOCAL = "LOCAL"


_S = 1 / math.sqrt(2)
GATE_MATRICES = {
    # R_a(theta) = exp(-i theta sigma_a / 2) at theta = +/- pi/2
    GateKind.RX90: np.array([[1, -1j], [-1j, 1]], dtype=complex) * _S,
    GateKind.RY90: np.array([[1, -1], [1, 1]], dtype=complex) * _S,
    GateKind.RX90DAG: np.array([[1, 1j], [1j, 1]], dtype=complex) * _S,
    GateKind.RY90DAG: np.array([[1, 1], [-1, 1]], dtype=complex) * _S,
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _S,
    # control is the first (more significant) qubit of the pair
    GateKind.CNOT: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}

# rotation that maps the +1 eigenstate of a Pauli to |0>
MEASURE_BASIS_ROTATION = {"X": GateKind.RY90DAG, "Y": GateKind.RX90}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind is GateKind.CNOT:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"CNOT needs distinct control and target, got {self.qubits}")
        elif self.kind is not GateKind.MEASURE_ALL and len(self.qubits) != 1:
            raise ValueError(f"{self.kind.value} acts on one qubit, got {self.qubits}")

    def to_json(self) -> dict:
        return {"g": self.kind.value, "q": list(self.qubits)}

    @classmethod
    def from_json(cls, doc: dict) -> "Gate":
        return cls(GateKind(doc["g"]), tuple(doc["q"]))


@dataclass(frozen=True)
class Circuit:
    """Layers of gates on disjoint qubits, ending in ``MEASURE_ALL``.

    ``label`` is ``EVEN``, ``ODD``, ``DIAGONAL`` or ``LOCAL:<pattern>`` where
    the pattern has one letter from ``XYZ`` per qubit (the basis that qubit is
    read out in).
    """

    n_qubits: int
    layers: tuple[tuple[Gate, ...], ...]
    label: str
    subset: SubsetKey

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))
        if not self.layers or [g.kind for g in self.layers[-1]] != [GateKind.MEASURE_ALL]:
            raise ValueError("final layer must be a single MEASURE_ALL")
        for layer in self.layers[:-1]:
            used: list[int] = []
            for gate in layer:
                if gate.kind is GateKind.MEASURE_ALL:
                    raise ValueError("MEASURE_ALL is only allowed in the final layer")
                if any(not 0 <= q < self.n_qubits for q in gate.qubits):
                    raise ValueError(f"gate {gate} addresses a qubit outside 0..{self.n_qubits - 1}")
                used.extend(gate.qubits)
            if len(used) != len(set(used)):
                raise ValueError(f"qubit used twice in one layer: {layer}")

    @property
    def name(self) -> str:
        """Unique key of a circuit within a plan."""
        return f"{self.subset.mask}:{self.label}"

    @property
    def gate_layers(self) -> tuple[tuple[Gate, ...], ...]:
        return self.layers[:-1]

    @property
    def cnot_count(self) -> int:
        return sum(g.kind is GateKind.CNOT for layer in self.layers for g in layer)

    @property
    def two_qubit_layers(self) -> int:
        return sum(any(g.kind is GateKind.CNOT for g in layer) for layer in self.layers)

    def gates(self):
        for layer in self.gate_layers:
            yield from layer

    def unitary(self) -> np.ndarray:
        """Dense unitary of all gate layers (measurement excluded)."""
        return circuit_unitary(self)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "subset_mask": self.subset.mask,
            "label": self.label,
            "layers": [[g.to_json() for g in layer] for layer in self.layers],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Circuit":
        n = int(doc["n_qubits"])
        return cls(
            n,
            tuple(tuple(Gate.from_json(g) for g in layer) for layer in doc["layers"]),
            doc["label"],
            SubsetKey(int(doc["subset_mask"]), n),
        )


@dataclass(frozen=True)
class DepthReport:
    two_qubit_layers: int
    total_two_qubit_gates: int
    connectivity: Connectivity


def _measure_layer(n_qubits: int) -> tuple[Gate, ...]:
    return (Gate(GateKind.MEASURE_ALL, tuple(range(n_qubits))),)


# --- CNOT networks ------------------------------------------------------------


def ghz_prep_layers(qubits, schedule: Schedule = Schedule.CHAIN) -> list[list[tuple[int, int]]]:
    """CNOT layers (control, target) that spread the pivot ``qubits[0]`` over ``qubits``.

    CHAIN is the ladder ``q0->q1, q1->q2, ...``; ALL_TO_ALL doubles the set
    of entangled qubits each layer, giving ``ceil(log2 M)`` layers.
    """
    qubits = list(qubits)
    schedule = Schedule(schedule)
    if len(qubits) <= 1:
        return []
    if schedule is Schedule.CHAIN:
        return [[(qubits[i], qubits[i + 1])] for i in range(len(qubits) - 1)]
    holders = qubits[:1]
    waiting = qubits[1:]
    layers = []
    while waiting:
        layer = []
        for control in list(holders):
            if not waiting:
                break
            target = waiting.pop(0)
            layer.append((control, target))
            holders.append(target)
        layers.append(layer)
    return layers


def _ghz_inverse_layers(qubits, schedule: Schedule) -> list[tuple[Gate, ...]]:
    prep = ghz_prep_layers(qubits, schedule)
    return [tuple(Gate(GateKind.CNOT, pair) for pair in layer) for layer in reversed(prep)]


# --- builders -------------------------------------------------------------------


def diagonal_circuit(n_qubits: int) -> Circuit:
    return Circuit(n_qubits, (_measure_layer(n_qubits),), "DIAGONAL", SubsetKey(0, n_qubits))


def build_subset_circuits(k: SubsetKey, schedule: Schedule = Schedule.CHAIN) -> tuple[Circuit, ...]:
    """EVEN and ODD circuits for subset ``k``; a lone DIAGONAL circuit if M = 0."""
    n = k.n_qubits
    if k.m == 0:
        return (diagonal_circuit(n),)
    off = k.off_diagonal_qubits
    cnots = _ghz_inverse_layers(off, schedule)
    pivot = off[0]
    out = []
    for label, letter in (("EVEN", "X"), ("ODD", "Y")):
        rotation = (Gate(MEASURE_BASIS_ROTATION[letter], (pivot,)),)
        out.append(Circuit(n, (*cnots, rotation, _measure_layer(n)), label, k))
    return tuple(out)


def _local_circuit(k: SubsetKey, pattern: str) -> Circuit:
    n = k.n_qubits
    rotations = tuple(
        Gate(MEASURE_BASIS_ROTATION[letter], (q,)) for q, letter in enumerate(pattern) if letter != "Z"
    )
    layers = (rotations, _measure_layer(n)) if rotations else (_measure_layer(n),)
    return Circuit(n, layers, f"LOCAL:{pattern}", k)


def build_local_circuits(k: SubsetKey) -> list[Circuit]:
    """The ``2**M`` single-qubit-rotation circuits for subset ``k``.

    Each off-diagonal qubit is read out in X or Y, every other qubit in Z.
    """
    choices = ["XY" if k.qubit_is_off_diagonal(q) else "Z" for q in range(k.n_qubits)]
    return [_local_circuit(k, "".join(p)) for p in itertools.product(*choices)]


def circuits_for_subsets(keys, variant: Variant = Variant.SEEQST, schedule: Schedule = Schedule.CHAIN) -> list[Circuit]:
    """Circuits needed for ``keys``, deduplicated by name, in subset order."""
    variant = Variant(variant)
    seen = {}
    for k in keys:
        built = build_subset_circuits(k, schedule) if variant is Variant.SEEQST else build_local_circuits(k)
        for c in built:
            seen.setdefault(c.name, c)
    return list(seen.values())


def full_qst_plan(n_qubits: int, variant: Variant = Variant.SEEQST, schedule: Schedule = Schedule.CHAIN) -> list[Circuit]:
    """Every circuit for full tomography: ``2**(N+1) - 1`` (SEEQST) or ``3**N`` (LOCAL)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    return circuits_for_subsets(all_subsets(n_qubits), variant, schedule)


def depth_report(k: SubsetKey, connectivity: Connectivity = Connectivity.CHAIN) -> DepthReport:
    """Two-qubit depth of the GHZ inverse on the off-diagonal qubits of ``k``.

    HEAVY_HEX_BOUND is the closed-form worst case ``3 * ceil((sqrt(8M - 3) - 1) / 2)``
    (optimal heavy-hex GHZ depth times three for SWAP routing). The gate count
    is that of the logical CNOT network; routing SWAPs are not counted.
    """
    connectivity = Connectivity(connectivity)
    m = k.m
    gates = max(m - 1, 0)
    if m <= 1:
        return DepthReport(0, 0, connectivity)
    if connectivity is Connectivity.CHAIN:
        layers = m - 1
    elif connectivity is Connectivity.ALL_TO_ALL:
        layers = math.ceil(math.log2(m))
    else:
        layers = 3 * heavy_hex_ghz_depth(m)
    return DepthReport(layers, gates, connectivity)


def heavy_hex_ghz_depth(m: int) -> int:
    """Optimal GHZ depth on an infinite heavy-hex lattice for ``m`` qubits."""
    return math.ceil((math.sqrt(8 * m - 3) - 1) / 2)


# --- dense simulation helpers ------------------------------------------------


def apply_gate(state: np.ndarray, gate: Gate, n_qubits: int, axes_offset: int = 0) -> np.ndarray:
    """Apply a gate to a tensor whose axes ``offset..offset+n-1`` are qubits."""
    mat = GATE_MATRICES[gate.kind]
    k = len(gate.qubits)
    axes = [axes_offset + q for q in gate.qubits]
    op = mat.reshape((2,) * (2 * k))
    out = np.tensordot(op, state, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    return _circuit_unitary(circuit).copy()


@lru_cache(maxsize=1024)
def _circuit_unitary(circuit: Circuit) -> np.ndarray:
    n = circuit.n_qubits
    dim = 1 << n
    u = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    for gate in circuit.gates():
        u = apply_gate(u, gate, n)
    u = u.reshape(dim, dim)
    u.setflags(write=False)
    return u


# --- Pauli conjugation through Clifford gates ---------------------------------


def _pauli_from_matrix(mat: np.ndarray, n: int) -> tuple[int, str]:
    for letters in itertools.product("IXYZ", repeat=n):
        label = "".join(letters)
        overlap = np.trace(pauli_matrix(label).conj().T @ mat) / (1 << n)
        if abs(abs(overlap) - 1) < 1e-9:
            sign = int(round(overlap.real))
            if sign in (1, -1) and abs(overlap.imag) < 1e-9:
                return sign, label
    raise ValueError("matrix is not a Hermitian Pauli string up to sign")


@lru_cache(maxsize=None)
def _conjugation_table(kind: GateKind) -> dict:
    """Map Pauli label -> (sign, label) for ``G P G^dagger``."""
    mat = GATE_MATRICES[kind]
    n = 2 if kind is GateKind.CNOT else 1
    table = {}
    for letters in itertools.product("IXYZ", repeat=n):
        label = "".join(letters)
        table[label] = _pauli_from_matrix(mat @ pauli_matrix(label) @ mat.conj().T, n)
    return table


def conjugate_pauli(circuit: Circuit, label: str) -> tuple[int, str]:
    """Return ``(sign, label')`` with ``U P U^dagger = sign * P'`` for the circuit unitary U."""
    letters = list(label)
    sign = 1
    for gate in circuit.gates():
        table = _conjugation_table(gate.kind)
        key = "".join(letters[q] for q in gate.qubits)
        s, new = table[key]
        sign *= s
        for q, letter in zip(gate.qubits, new):
            letters[q] = letter
    return sign, "".join(letters)


def measured_observables(circuit: Circuit) -> tuple[str, ...]:
    """Pauli strings of the circuit's subset that the circuit measures."""
    k = circuit.subset
    if circuit.label == "DIAGONAL":
        return tuple(observable_set(k))
    if circuit.label == "EVEN":
        return eo_split(k).even
    if circuit.label == "ODD":
        return eo_split(k).odd
    if circuit.label.startswith("LOCAL:"):
        pattern = circuit.label.split(":", 1)[1]
        return tuple(p for p in observable_set(k) if all(a == b or a == "I" for a, b in zip(p, pattern)))
    raise ValueError(f"unknown circuit label {circuit.label!r}")


def eigenvalue_table(circuit: Circuit) -> tuple[tuple[str, ...], np.ndarray]:
    """Eigenvalues of each measured observable on each outcome.

    Returns ``(labels, table)`` with ``table[p, z] = +/-1``, the eigenvalue of
    ``labels[p]`` on the pre-image of bitstring ``z`` under the circuit.
    """
    return _eigenvalue_table(circuit)


@lru_cache(maxsize=4096)
def _eigenvalue_table(circuit: Circuit):
    n = circuit.n_qubits
    labels = measured_observables(circuit)
    outcomes = np.arange(1 << n)
    table = np.empty((len(labels), 1 << n), dtype=np.int8)
    for p, label in enumerate(labels):
        sign, image = conjugate_pauli(circuit, label)
        if any(c in "XY" for c in image):
            raise ValueError(f"{circuit.name} does not diagonalize {label} (maps to {image})")
        zmask = int("".join("1" if c == "Z" else "0" for c in image), 2)
        parity = np.array([bin(z & zmask).count("1") & 1 for z in outcomes])
        table[p] = sign * (1 - 2 * parity)
    table.setflags(write=False)
    return labels, table


# --- eigenstates used by the correctness contract -----------------------------


def ghz_eigenstates(k: SubsetKey, kind: str) -> list[np.ndarray]:
    """Common eigenstates of the EVEN or ODD observables of ``k``.

    States ``(|p> + s * phase |~p>)|q>/sqrt(2)`` on the off-diagonal register
    with the pivot bit of ``p`` fixed to 0; ordered by ``p`` ascending, ``+``
    before ``-``, then ``q``. ``phase`` is 1 for EVEN and ``i`` for ODD.
    """
    n = k.n_qubits
    off = k.off_diagonal_qubits
    diag = k.diagonal_qubits
    phase = 1 if kind == "EVEN" else 1j
    m = len(off)
    states = []
    for rest in itertools.product((0, 1), repeat=m - 1):
        p = (0, *rest)
        pbar = tuple(1 - b for b in p)
        for s in (1, -1):
            for q in itertools.product((0, 1), repeat=len(diag)):
                vec = np.zeros(1 << n, dtype=complex)
                for bits, amp in ((p, 1.0), (pbar, s * phase)):
                    full = [0] * n
                    for qubit, b in zip(off, bits):
                        full[qubit] = b
                    for qubit, b in zip(diag, q):
                        full[qubit] = b
                    vec[int("".join(map(str, full)), 2)] += amp / math.sqrt(2)
                states.append(vec)
    return states
