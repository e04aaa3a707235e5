"""Two-mode bosonic polarization algebra with a hard photon-number cap.

Everything downstream (detector POVMs, the intercept-resend attack, the
removal-fraction bounds) runs on one finite Hilbert space: the symmetric
subspace of n indistinguishable photons distributed over two polarization
modes, for n = 0 .. max_photons.  A basis ket |n, j> means "n photons total,
j of them in the vertical (bit-1) mode"; the space has dimension
(M+1)(M+2)/2 for cap M, so dense complex matrices are cheap for any sane cap
(dimension 66 at M = 10).

Conventions
-----------
* The computational (Z) frame is the storage frame.  X-frame objects are
  obtained with the photon-wise Hadamard rotation, see ``hadamard_frame``.
* All constructors return unit vectors (norm error < 1e-10).
* Randomness is counter-based (Philox) and keyed by (seed, domain, index),
  so independent substreams can be handed out per pulse / per restart and
  runs replay exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    CopiesExceedCap,
    InvalidPovm,
    NotHermitian,
    ParamOutOfRange,
    SpaceMismatch,
)

if TYPE_CHECKING:  # pragma: no cover
    from .detector import Povm, OutcomeLabel

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PROB_TOL = 1e-8

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class Basis(Enum):
    """Measurement basis: Z is the computational frame, X its Hadamard twin."""

    Z = "Z"
    X = "X"

    def other(self) -> "Basis":
        return Basis.X if self is Basis.Z else Basis.Z


class StateLabel(Enum):
    """The four single-photon signal polarizations of the protocol."""

    Z0 = "z0"
    Z1 = "z1"
    X0 = "x0"
    X1 = "x1"

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (StateLabel.Z0, StateLabel.Z1) else Basis.X

    @property
    def bit(self) -> int:
        return 0 if self in (StateLabel.Z0, StateLabel.X0) else 1

    @property
    def polarization(self) -> tuple[complex, complex]:
        """Single-photon amplitudes (alpha, beta) in the Z frame."""
        return _POLARIZATIONS[self]

    @staticmethod
    def from_choice(basis: Basis, bit: int) -> "StateLabel":
        return _LABEL_TABLE[(basis, int(bit))]


_POLARIZATIONS = {
    StateLabel.Z0: (1.0 + 0j, 0.0 + 0j),
    StateLabel.Z1: (0.0 + 0j, 1.0 + 0j),
    StateLabel.X0: (_INV_SQRT2 + 0j, _INV_SQRT2 + 0j),
    StateLabel.X1: (_INV_SQRT2 + 0j, -_INV_SQRT2 + 0j),
}

_LABEL_TABLE = {
    (Basis.Z, 0): StateLabel.Z0,
    (Basis.Z, 1): StateLabel.Z1,
    (Basis.X, 0): StateLabel.X0,
    (Basis.X, 1): StateLabel.X1,
}


@dataclass(frozen=True)
class HilbertSpec:
    """Photon-number-capped symmetric space; cap M must be >= 1."""

    max_photons: int

    def __post_init__(self):
        if self.max_photons < 1:
            raise ParamOutOfRange(f"max_photons must be >= 1, got {self.max_photons}")

    @property
    def dimension(self) -> int:
        m = self.max_photons
        return (m + 1) * (m + 2) // 2

    def offset(self, n: int) -> int:
        """Flat index of |n, 0>."""
        return n * (n + 1) // 2

    def block(self, n: int) -> slice:
        """Index range of the n-photon block (dimension n + 1)."""
        if not 0 <= n <= self.max_photons:
            raise ParamOutOfRange(f"photon number {n} outside 0..{self.max_photons}")
        start = self.offset(n)
        return slice(start, start + n + 1)

    def index(self, n: int, j: int) -> int:
        if not 0 <= j <= n:
            raise ParamOutOfRange(f"mode occupation {j} outside 0..{n}")
        return self.offset(n) + j


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit vector over the |n, j> basis of a HilbertSpec."""

    space: HilbertSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.space.dimension,):
            raise SpaceMismatch(
                f"amplitude length {amp.shape} != space dimension {self.space.dimension}"
            )
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise ParamOutOfRange(f"state norm {norm} deviates from 1 by > {NORM_TOL}")
        amp = amp.copy()
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    def photon_number(self, tol: float = 1e-12) -> int | None:
        """Total photon number if sharply defined, else None."""
        weights = self.block_weights()
        n = int(np.argmax(weights))
        return n if abs(weights[n] - 1.0) <= tol else None

    def block_weights(self) -> np.ndarray:
        """Probability of finding each total photon number."""
        out = np.empty(self.space.max_photons + 1)
        for n in range(self.space.max_photons + 1):
            blk = self.amplitudes[self.space.block(n)]
            out[n] = float(np.vdot(blk, blk).real)
        return out


@dataclass(frozen=True, eq=False)
class HermitianOp:
    """Hermitian matrix tied to a HilbertSpec (POVM-element carrier)."""

    space: HilbertSpec
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.space.dimension
        if mat.shape != (d, d):
            raise SpaceMismatch(f"matrix shape {mat.shape} != ({d}, {d})")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise NotHermitian("matrix deviates from Hermitian by > 1e-10")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)


def vacuum_state(space: HilbertSpec) -> StateVector:
    amp = np.zeros(space.dimension, dtype=complex)
    amp[0] = 1.0
    return StateVector(space, amp)


def product_state(
    space: HilbertSpec, alpha: complex, beta: complex, copies: int
) -> StateVector:
    """n identical photons, each polarized alpha|0> + beta|1> (Z frame).

    In occupation amplitudes the n-fold product is
    c_j = sqrt(C(n, j)) alpha^(n-j) beta^j on |n, j>.
    """
    if copies < 1:
        raise ParamOutOfRange(f"copies must be >= 1, got {copies}")
    if copies > space.max_photons:
        raise CopiesExceedCap(
            f"{copies} copies exceed photon cap {space.max_photons}"
        )
    norm = math.hypot(abs(alpha), abs(beta))
    if norm == 0.0:
        raise ParamOutOfRange("polarization amplitudes are both zero")
    a, b = alpha / norm, beta / norm
    amp = np.zeros(space.dimension, dtype=complex)
    for j in range(copies + 1):
        amp[space.index(copies, j)] = (
            math.sqrt(math.comb(copies, j)) * a ** (copies - j) * b**j
        )
    return StateVector(space, amp)


def basis_state(space: HilbertSpec, label: StateLabel, copies: int = 1) -> StateVector:
    """|k>^(x n) for a signal label k, in the Z-frame occupation encoding."""
    alpha, beta = label.polarization
    return product_state(space, alpha, beta, copies)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugating the first argument."""
    if a.space != b.space:
        raise SpaceMismatch("states live on different spaces")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def expectation(op: HermitianOp, psi: StateVector) -> float:
    """Born-rule expectation <psi|op|psi> (real for Hermitian op)."""
    if op.space != psi.space:
        raise SpaceMismatch("operator and state live on different spaces")
    v = psi.amplitudes
    return float(np.vdot(v, op.matrix @ v).real)


def symmetric_unitary(space: HilbertSpec, u2: np.ndarray) -> np.ndarray:
    """Lift a one-photon unitary to the full symmetric space (block diagonal).

    Uses the creation-operator expansion: with a_k' = sum_l u[l,k] a_l, the
    n-photon block element is

      <n,i|U|n,j> = sqrt(i!(n-i)!/(j!(n-j)!)) *
                    sum_{p+q=i} C(n-j,p) C(j,q) u00^(n-j-p) u10^p u01^(j-q) u11^q
    """
    u2 = np.asarray(u2, dtype=complex)
    if u2.shape != (2, 2):
        raise ParamOutOfRange("one-photon unitary must be 2x2")
    d = space.dimension
    out = np.zeros((d, d), dtype=complex)
    u00, u01, u10, u11 = u2[0, 0], u2[0, 1], u2[1, 0], u2[1, 1]
    out[0, 0] = 1.0
    for n in range(1, space.max_photons + 1):
        off = space.offset(n)
        for j in range(n + 1):
            for i in range(n + 1):
                acc = 0.0 + 0j
                for p in range(max(0, i - j), min(n - j, i) + 1):
                    q = i - p
                    acc += (
                        math.comb(n - j, p)
                        * math.comb(j, q)
                        * u00 ** (n - j - p)
                        * u10**p
                        * u01 ** (j - q)
                        * u11**q
                    )
                scale = math.sqrt(
                    math.factorial(i)
                    * math.factorial(n - i)
                    / (math.factorial(j) * math.factorial(n - j))
                )
                out[off + i, off + j] = scale * acc
    return out


def hadamard_frame(space: HilbertSpec) -> np.ndarray:
    """Photon-wise Hadamard rotation mapping the Z frame to the X frame."""
    h = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) * _INV_SQRT2
    return symmetric_unitary(space, h)


def reduced_polarization(psi: StateVector) -> np.ndarray:
    """One-photon reduced density matrix (2x2) of a fixed-photon-number state.

    For a product state |chi>^(x n) this is |chi><chi| exactly, which is how
    the split-and-measure filter recovers the per-photon polarization.
    """
    n = psi.photon_number(tol=1e-9)
    if n is None or n == 0:
        raise ParamOutOfRange("state has no sharp nonzero photon number")
    c = psi.amplitudes[psi.space.block(n)]
    rho = np.zeros((2, 2), dtype=complex)
    js = np.arange(n + 1)
    rho[0, 0] = np.sum(np.abs(c) ** 2 * (n - js)) / n
    rho[1, 1] = np.sum(np.abs(c) ** 2 * js) / n
    cross = sum(
        np.conj(c[j]) * c[j + 1] * math.sqrt((j + 1) * (n - j)) for j in range(n)
    )
    rho[0, 1] = cross / n
    rho[1, 0] = np.conj(rho[0, 1])
    return rho


def random_state(
    space: HilbertSpec, rng: np.random.Generator, block: int | None = None
) -> StateVector:
    """Haar-ish random unit state, optionally confined to one photon block."""
    amp = np.zeros(space.dimension, dtype=complex)
    if block is None:
        raw = rng.normal(size=space.dimension) + 1j * rng.normal(size=space.dimension)
        amp[:] = raw
    else:
        blk = space.block(block)
        k = blk.stop - blk.start
        amp[blk] = rng.normal(size=k) + 1j * rng.normal(size=k)
    amp /= np.linalg.norm(amp)
    return StateVector(space, amp)


def sample_outcome(
    povm: "Povm", psi: StateVector, rng: np.random.Generator
) -> "OutcomeLabel":
    """Draw one detector outcome by the Born rule; deterministic given rng state."""
    labels, probs = outcome_distribution(povm, psi)
    u = rng.random()
    acc = 0.0
    for label, p in zip(labels, probs):
        acc += p
        if u < acc:
            return label
    return labels[-1]


def outcome_distribution(povm: "Povm", psi: StateVector):
    """Labels and Born probabilities for a POVM, renormalized within 1e-8."""
    labels = list(povm.elements)
    probs = np.array([expectation(povm.elements[o], psi) for o in labels])
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if abs(total - 1.0) > PROB_TOL:
        raise InvalidPovm(f"outcome probabilities sum to {total}, not 1")
    return labels, probs / total


# Substream domains: one Philox key space per consumer so streams never collide.
DOMAIN_PULSE = 0
DOMAIN_SIFT = 1
DOMAIN_TOMOGRAPHY = 2
DOMAIN_OPTIMIZER = 3
DOMAIN_PROBES = 4

_MASK64 = (1 << 64) - 1


def substream(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Independent counter-based stream for (seed, domain, index).

    Philox is a counter-based generator: distinct keys give statistically
    independent streams, so per-pulse / per-restart substreams can be created
    in any order (or in parallel) and replay bit-identically.
    """
    key = np.array(
        [seed & _MASK64, ((domain & 0xFF) << 56) | (index & ((1 << 56) - 1))],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
