"""Parity classes of density-matrix elements and their Pauli observables.

Qubit 0 is the most significant bit of a row/column index, so the label
``"XZ"`` acts with X on qubit 0 and Z on qubit 1, and a subset mask is
simply ``row ^ col``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

PAULI_LETTERS = "IXYZ"

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class ElementIndex:
    """Position (row, col) of a density-matrix element on ``n_qubits``."""

    row: int
    col: int
    n_qubits: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        dim = 1 << self.n_qubits
        if not (0 <= self.row < dim and 0 <= self.col < dim):
            raise ValueError(
                f"element ({self.row}, {self.col}) out of range for {self.n_qubits} qubits"
            )

    @classmethod
    def parse(cls, text: str, n_qubits: int) -> "ElementIndex":
        """Parse the ``row:col`` syntax."""
        try:
            row, col = (int(part) for part in text.strip().split(":"))
        except ValueError as exc:
            raise ValueError(f"bad element {text!r}, expected row:col") from exc
        return cls(row, col, n_qubits)


@dataclass(frozen=True, order=True)
class SubsetKey:
    """One of the ``2**n_qubits`` parity classes, identified by ``row ^ col``."""

    mask: int
    n_qubits: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if not 0 <= self.mask < (1 << self.n_qubits):
            raise ValueError(f"mask {self.mask} out of range for {self.n_qubits} qubits")

    @property
    def m(self) -> int:
        """Number of off-diagonal qubits."""
        return bin(self.mask).count("1")

    @property
    def off_diagonal_qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if self.qubit_is_off_diagonal(q))

    @property
    def diagonal_qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if not self.qubit_is_off_diagonal(q))

    @property
    def name(self) -> str:
        # 1-based so that S_1 is the diagonal subset
        return f"S_{self.mask + 1}"

    def qubit_is_off_diagonal(self, qubit: int) -> bool:
        return bool((self.mask >> (self.n_qubits - 1 - qubit)) & 1)

    def bits(self) -> str:
        return format(self.mask, f"0{self.n_qubits}b")


@dataclass(frozen=True)
class ObservableSplit:
    even: tuple[str, ...]
    odd: tuple[str, ...]


@dataclass(frozen=True)
class ProjectorDecomposition:
    """Pauli expansion of ``|col><row|``; ``rho[row, col] = sum(a_P <P>)``."""

    element: ElementIndex
    terms: dict = field(default_factory=dict)

    def matrix(self) -> np.ndarray:
        dim = 1 << self.element.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for label, coeff in self.terms.items():
            out += coeff * pauli_matrix(label)
        return out


# --- Pauli helpers --------------------------------------------------------


def pauli_matrix(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string (first letter = most significant qubit)."""
    out = np.ones((1, 1), dtype=complex)
    for letter in label:
        out = np.kron(out, PAULI_MATRICES[letter])
    return out


def symplectic(label: str) -> tuple[np.ndarray, np.ndarray]:
    """Return the (x, z) bit vectors of a Pauli string."""
    x = np.array([c in "XY" for c in label], dtype=np.uint8)
    z = np.array([c in "ZY" for c in label], dtype=np.uint8)
    return x, z


def symplectic_product(a: str, b: str) -> int:
    """0 if the two Pauli strings commute, 1 if they anti-commute."""
    xa, za = symplectic(a)
    xb, zb = symplectic(b)
    return int((np.dot(xa, zb) + np.dot(za, xb)) % 2)


def commutes(a: str, b: str) -> bool:
    return symplectic_product(a, b) == 0


def restrict(label: str, qubits) -> str:
    return "".join(label[q] for q in qubits)


def y_count(label: str) -> int:
    return label.count("Y")


# --- subset operations ------------------------------------------------------


def subset_of_element(e: ElementIndex) -> SubsetKey:
    return SubsetKey(e.row ^ e.col, e.n_qubits)


def elements_of_subset(k: SubsetKey) -> list[ElementIndex]:
    """All ``2**N`` members ``(r, r ^ mask)``, ordered by row."""
    return [ElementIndex(r, r ^ k.mask, k.n_qubits) for r in range(1 << k.n_qubits)]


@lru_cache(maxsize=None)
def _observable_set(mask: int, n_qubits: int) -> tuple[str, ...]:
    key = SubsetKey(mask, n_qubits)
    choices = ["XY" if key.qubit_is_off_diagonal(q) else "IZ" for q in range(n_qubits)]
    return tuple("".join(p) for p in itertools.product(*choices))


def observable_set(k: SubsetKey) -> list[str]:
    """The ``2**N`` Pauli strings that carry information about subset ``k``.

    Off-diagonal qubits take {X, Y}, the rest take {I, Z}.
    """
    return list(_observable_set(k.mask, k.n_qubits))


def eo_split(k: SubsetKey) -> ObservableSplit:
    """Split ``observable_set(k)`` by the parity of the number of Y letters.

    For the diagonal subset nothing contains Y, so every string lands in
    ``even`` and ``odd`` is empty.
    """
    labels = _observable_set(k.mask, k.n_qubits)
    even = tuple(p for p in labels if y_count(p) % 2 == 0)
    odd = tuple(p for p in labels if y_count(p) % 2 == 1)
    return ObservableSplit(even, odd)


def _pauli_entry(label: str, row: int, col: int, n_qubits: int) -> complex:
    """<row| P |col> as a product of single-qubit entries."""
    value = 1 + 0j
    for q, letter in enumerate(label):
        shift = n_qubits - 1 - q
        value *= PAULI_MATRICES[letter][(row >> shift) & 1, (col >> shift) & 1]
        if value == 0:
            return 0j
    return value


def decompose_projector(e: ElementIndex) -> ProjectorDecomposition:
    """Expand ``|col><row|`` over the observables of its subset.

    The coefficient of P is ``tr(|col><row| P) / 2**N = <row|P|col> / 2**N``.
    Strings outside the subset's observable set have zero overlap, so only
    those ``2**N`` strings are listed.
    """
    n = e.n_qubits
    scale = 1.0 / (1 << n)
    terms = {
        label: _pauli_entry(label, e.row, e.col, n) * scale
        for label in _observable_set(e.row ^ e.col, n)
    }
    return ProjectorDecomposition(e, terms)


def coefficient_matrix(k: SubsetKey) -> np.ndarray:
    """Matrix ``A[r, p]`` of projector coefficients for row ``r`` of subset ``k``.

    Columns follow ``observable_set(k)``; row ``r`` corresponds to the element
    ``(r, r ^ mask)``.
    """
    return _coefficient_matrix(k.mask, k.n_qubits).copy()


@lru_cache(maxsize=64)
def _coefficient_matrix(mask: int, n_qubits: int) -> np.ndarray:
    labels = _observable_set(mask, n_qubits)
    dim = 1 << n_qubits
    out = np.empty((dim, len(labels)), dtype=complex)
    for r in range(dim):
        c = r ^ mask
        for p, label in enumerate(labels):
            out[r, p] = _pauli_entry(label, r, c, n_qubits) / dim
    out.setflags(write=False)
    return out


def _uniform_n(elements) -> int:
    elements = list(elements)
    if not elements:
        raise ValueError("no elements requested")
    sizes = {e.n_qubits for e in elements}
    if len(sizes) != 1:
        raise ValueError(f"mixed n_qubits in element list: {sorted(sizes)}")
    return sizes.pop()


def plan_subsets(elements) -> list[SubsetKey]:
    """Deduplicated subsets covering ``elements``, ascending by mask."""
    n = _uniform_n(elements)
    return [SubsetKey(mask, n) for mask in sorted({e.row ^ e.col for e in elements})]


def all_elements(n_qubits: int) -> list[ElementIndex]:
    dim = 1 << n_qubits
    return [ElementIndex(r, c, n_qubits) for r in range(dim) for c in range(dim)]


def all_subsets(n_qubits: int) -> list[SubsetKey]:
    return [SubsetKey(mask, n_qubits) for mask in range(1 << n_qubits)]


def threshold_plan(diagonal, elements, t: float) -> list[SubsetKey]:
    """Drop subsets whose requested elements are all predicted negligible.

    A subset survives if at least one requested member ``(i, j)`` has
    ``sqrt(p_i * p_j) >= t``, where ``p`` are measured diagonal populations.

    Args:
        diagonal: ``2**N`` populations summing to one.
        elements: requested :class:`ElementIndex` values.
        t: significance threshold, ``t >= 0``.
    """
    n = _uniform_n(elements)
    p = np.asarray(diagonal, dtype=float)
    if p.shape != (1 << n,):
        raise ValueError(f"diagonal must have {1 << n} entries, got {p.shape}")
    if np.any(p < 0):
        raise ValueError("diagonal populations must be non-negative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"diagonal populations sum to {p.sum()}, expected 1")
    if t < 0:
        raise ValueError("threshold must be non-negative")

    keep = set()
    for e in elements:
        mask = e.row ^ e.col
        if mask == 0 or np.sqrt(p[e.row] * p[e.col]) >= t:
            keep.add(mask)
    return [SubsetKey(mask, n) for mask in sorted(keep)]


def plan_to_json(keys) -> dict:
    keys = list(keys)
    n = keys[0].n_qubits if keys else 0
    return {
        "n_qubits": n,
        "subsets": [{"mask": k.mask, "observables": observable_set(k)} for k in keys],
    }


def plan_from_json(doc: dict) -> list[SubsetKey]:
    n = int(doc["n_qubits"])
    return [SubsetKey(int(s["mask"]), n) for s in doc["subsets"]]
