"""Detector models as per-basis POVMs with a first-class no-click outcome.

A detector here is a pair of four-outcome POVMs (one per measurement basis).
The no-click outcome is an ordinary positive operator, so "the detector
stayed silent" gets the same Born-rule treatment as any click pattern; that
is what makes the removal-fraction analysis in :mod:`bb84sim.analysis`
possible, and what the tomography below reconstructs from count data.

Built-in models route each photon through a polarizing splitter in the
measurement basis onto two threshold arms.  With per-photon miss
probability t = 1 - eta per arm and dark-count probability d per arm, the
outcome probabilities for a basis-frame ket |n, j> factorize:

  P(arm0 silent) = t0^(n-j) (1-d),   P(arm1 silent) = t1^j (1-d)

and NoClick / Click0 / Click1 / DoubleClick are the four silent/fired
combinations.  The elements are diagonal in the basis frame; the X-basis
POVM is the Hadamard rotation of its diagonal profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    EmptyCounts,
    IncompleteProbeSet,
    InvalidPovm,
    ParamOutOfRange,
    SpaceMismatch,
)
from .qcore import (
    Basis,
    DOMAIN_PROBES,
    DOMAIN_TOMOGRAPHY,
    HermitianOp,
    HilbertSpec,
    StateLabel,
    StateVector,
    basis_state,
    expectation,
    hadamard_frame,
    outcome_distribution,
    product_state,
    random_state,
    substream,
    vacuum_state,
)

PSD_TOL = 1e-8
COMPLETENESS_TOL = 1e-8


class OutcomeLabel(Enum):
    """The four macroscopically distinct detector events."""

    NO_CLICK = "no_click"
    CLICK0 = "click0"
    CLICK1 = "click1"
    DOUBLE_CLICK = "double_click"


OUTCOME_ORDER = (
    OutcomeLabel.NO_CLICK,
    OutcomeLabel.CLICK0,
    OutcomeLabel.CLICK1,
    OutcomeLabel.DOUBLE_CLICK,
)


@dataclass(frozen=True, eq=False)
class Povm:
    """Positive operators, one per outcome label, summing to the identity."""

    space: HilbertSpec
    elements: Mapping[OutcomeLabel, HermitianOp]

    def __post_init__(self):
        elems = dict(self.elements)
        missing = [o for o in OUTCOME_ORDER if o not in elems]
        if missing:
            raise InvalidPovm(f"missing outcome elements: {missing}")
        total = np.zeros((self.space.dimension,) * 2, dtype=complex)
        for label, op in elems.items():
            if op.space != self.space:
                raise SpaceMismatch(f"element {label} lives on a different space")
            if np.linalg.eigvalsh(op.matrix).min() < -PSD_TOL:
                raise InvalidPovm(f"element {label} has eigenvalue < -{PSD_TOL}")
            total += op.matrix
        if np.max(np.abs(total - np.eye(self.space.dimension))) > COMPLETENESS_TOL:
            raise InvalidPovm("elements do not sum to the identity within 1e-8")
        object.__setattr__(self, "elements", elems)


@dataclass(frozen=True, eq=False)
class DetectorModel:
    """One POVM per measurement basis, on a common space."""

    space: HilbertSpec
    povm_z: Povm
    povm_x: Povm
    description: str = ""

    def __post_init__(self):
        if self.povm_z.space != self.space or self.povm_x.space != self.space:
            raise SpaceMismatch("per-basis POVMs live on different spaces")

    def povm(self, basis: Basis) -> Povm:
        return self.povm_z if basis is Basis.Z else self.povm_x


def _arm_outcome_probs(n, j, t0, t1, dark):
    """(no-click, click0, click1, double-click) for a basis-frame |n, j>."""
    silent0 = t0 ** (n - j) * (1.0 - dark)
    silent1 = t1**j * (1.0 - dark)
    return (
        silent0 * silent1,
        (1.0 - silent0) * silent1,
        silent0 * (1.0 - silent1),
        (1.0 - silent0) * (1.0 - silent1),
    )


def _threshold_povm(space, t0, t1, dark, frame=None):
    """Build the four elements from their diagonal basis-frame profiles.

    `frame` rotates the diagonal profile out of the Z frame (used for X).
    """
    d = space.dimension
    diags = {o: np.zeros(d) for o in OUTCOME_ORDER}
    for n in range(space.max_photons + 1):
        off = space.offset(n)
        for j in range(n + 1):
            probs = _arm_outcome_probs(n, j, t0, t1, dark)
            for o, p in zip(OUTCOME_ORDER, probs):
                diags[o][off + j] = p
    elements = {}
    for o in OUTCOME_ORDER:
        mat = np.diag(diags[o]).astype(complex)
        if frame is not None:
            mat = frame @ mat @ frame.conj().T
        elements[o] = HermitianOp(space, mat)
    return Povm(space, elements)


def make_threshold_detector(
    space: HilbertSpec, eta_z: float, eta_x: float, dark_count: float = 0.0
) -> DetectorModel:
    """Per-basis threshold detector: every photon seen with the basis's
    efficiency, plus optional per-arm dark counts."""
    for name, v in (("eta_z", eta_z), ("eta_x", eta_x), ("dark_count", dark_count)):
        if not 0.0 <= v <= 1.0:
            raise ParamOutOfRange(f"{name}={v} outside [0, 1]")
    u = hadamard_frame(space)
    return DetectorModel(
        space,
        povm_z=_threshold_povm(space, 1.0 - eta_z, 1.0 - eta_z, dark_count),
        povm_x=_threshold_povm(space, 1.0 - eta_x, 1.0 - eta_x, dark_count, frame=u),
        description=f"threshold eta_z={eta_z} eta_x={eta_x} dark={dark_count}",
    )


def make_ideal_detector(space: HilbertSpec) -> DetectorModel:
    """Unit-efficiency detector: silent only on vacuum."""
    det = make_threshold_detector(space, 1.0, 1.0, 0.0)
    return DetectorModel(space, det.povm_z, det.povm_x, description="ideal")


def make_arm_mismatch_detector(
    space: HilbertSpec, eta_arm0: float, eta_arm1: float, dark_count: float = 0.0
) -> DetectorModel:
    """Two physical arms with unequal efficiencies, shared by both bases.

    The overall loss averaged over the four signal states is the same in
    either basis, yet the no-click rate of an individual state is
    basis-dependent (with state-dependent sign) -- the classic efficiency
    mismatch that leaves a nonzero adversarial-removal bound.
    """
    for name, v in (
        ("eta_arm0", eta_arm0),
        ("eta_arm1", eta_arm1),
        ("dark_count", dark_count),
    ):
        if not 0.0 <= v <= 1.0:
            raise ParamOutOfRange(f"{name}={v} outside [0, 1]")
    u = hadamard_frame(space)
    t0, t1 = 1.0 - eta_arm0, 1.0 - eta_arm1
    return DetectorModel(
        space,
        povm_z=_threshold_povm(space, t0, t1, dark_count),
        povm_x=_threshold_povm(space, t0, t1, dark_count, frame=u),
        description=f"arm-mismatch eta0={eta_arm0} eta1={eta_arm1} dark={dark_count}",
    )


def efficiency(det: DetectorModel, basis: Basis, psi: StateVector) -> float:
    """Click probability 1 - <psi|E_noclick|psi> for the given basis."""
    if psi.space != det.space:
        raise SpaceMismatch("state lives on a different space than the detector")
    value = 1.0 - expectation(det.povm(basis).elements[OutcomeLabel.NO_CLICK], psi)
    return min(1.0, max(0.0, value))


# ---------------------------------------------------------------------------
# No-click characterization: probe campaign, linear inversion, PSD clipping
# ---------------------------------------------------------------------------

BASIS_ORDER = (Basis.Z, Basis.X)


@dataclass(frozen=True, eq=False)
class CountTable:
    """Outcome counts per (basis, probe), plus the probe catalog itself.

    counts has shape (2, n_probes, 4) with axes ordered by BASIS_ORDER and
    OUTCOME_ORDER.
    """

    space: HilbertSpec
    probes: tuple[StateVector, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        expected = (len(BASIS_ORDER), len(self.probes), len(OUTCOME_ORDER))
        if counts.shape != expected:
            raise ParamOutOfRange(f"counts shape {counts.shape} != {expected}")
        if np.any(counts < 0):
            raise ParamOutOfRange("counts must be nonnegative")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "probes", tuple(self.probes))

    def shots(self, basis_index: int, probe_index: int) -> int:
        return int(self.counts[basis_index, probe_index].sum())

    def frequencies(self) -> np.ndarray:
        """Empirical outcome frequencies, shape (2, n_probes, 4)."""
        totals = self.counts.sum(axis=2, keepdims=True)
        if np.any(totals == 0):
            raise EmptyCounts("some (basis, probe) cell has zero recorded shots")
        return self.counts / totals

    def save(self, counts_path, probes_path) -> None:
        """Counts as `basis,probe_index,outcome,count` lines; probes as JSON
        amplitude lists.  Round-trips bit-exactly."""
        lines = ["basis,probe_index,outcome,count"]
        for bi, basis in enumerate(BASIS_ORDER):
            for pi in range(len(self.probes)):
                for oi, outcome in enumerate(OUTCOME_ORDER):
                    lines.append(
                        f"{basis.value},{pi},{outcome.value},{int(self.counts[bi, pi, oi])}"
                    )
        with open(counts_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        payload = {
            "max_photons": self.space.max_photons,
            "probes": [
                [[float(a.real), float(a.imag)] for a in p.amplitudes]
                for p in self.probes
            ],
        }
        with open(probes_path, "w") as fh:
            json.dump(payload, fh)

    @staticmethod
    def load(counts_path, probes_path) -> "CountTable":
        with open(probes_path) as fh:
            payload = json.load(fh)
        space = HilbertSpec(payload["max_photons"])
        probes = tuple(
            StateVector(space, np.array([complex(re, im) for re, im in amps]))
            for amps in payload["probes"]
        )
        basis_idx = {b.value: i for i, b in enumerate(BASIS_ORDER)}
        outcome_idx = {o.value: i for i, o in enumerate(OUTCOME_ORDER)}
        counts = np.zeros((len(BASIS_ORDER), len(probes), len(OUTCOME_ORDER)), dtype=np.int64)
        with open(counts_path) as fh:
            header = fh.readline().strip()
            if header != "basis,probe_index,outcome,count":
                raise ParamOutOfRange(f"unexpected counts header: {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                b, pi, o, c = line.split(",")
                counts[basis_idx[b], int(pi), outcome_idx[o]] = int(c)
        return CountTable(space, probes, counts)


# Six per-photon polarizations: Z/X eigenstates plus the circular pair.
_PROBE_POLARIZATIONS = (
    (1.0, 0.0),
    (0.0, 1.0),
    (_s2 := 1.0 / math.sqrt(2.0), _s2),
    (_s2, -_s2),
    (_s2, 1j * _s2),
    (_s2, -1j * _s2),
)


def default_probe_catalog(space: HilbertSpec, seed: int = 0) -> list[StateVector]:
    """Vacuum + per-block product probes, padded with random symmetric states
    until every block's projector set spans its operator space."""
    rng = substream(seed, DOMAIN_PROBES)
    probes: list[StateVector] = [vacuum_state(space)]
    for n in range(1, space.max_photons + 1):
        block_probes = [
            product_state(space, a, b, n) for a, b in _PROBE_POLARIZATIONS
        ]
        needed = (n + 1) ** 2
        attempts = 0
        while _block_design_rank(space, n, block_probes) < needed:
            block_probes.append(random_state(space, rng, block=n))
            attempts += 1
            if attempts > 20 * needed:  # pragma: no cover - rank always reached
                raise IncompleteProbeSet(f"could not complete block {n}")
        probes.extend(block_probes)
    return probes


def _block_rho(space, n, probe):
    c = probe.amplitudes[space.block(n)]
    return np.outer(c, c.conj())


def _design_row(rho):
    """Real coefficient row so that row @ params == tr(E rho) for Hermitian E
    parametrized as [diag, sqrt2*Re(upper), sqrt2*Im(upper)]."""
    d = rho.shape[0]
    row = np.empty(d * d)
    row[:d] = np.diag(rho).real
    k = d
    s2 = math.sqrt(2.0)
    for p in range(d):
        for q in range(p + 1, d):
            row[k] = s2 * rho[p, q].real
            row[k + 1] = s2 * rho[p, q].imag
            k += 2
    # ordering above interleaves re/im; rebuild contiguously
    return row


def _params_to_hermitian(x, d):
    mat = np.zeros((d, d), dtype=complex)
    mat[np.diag_indices(d)] = x[:d]
    k = d
    s2 = math.sqrt(2.0)
    for p in range(d):
        for q in range(p + 1, d):
            re, im = x[k] / s2, x[k + 1] / s2
            mat[p, q] = re + 1j * im
            mat[q, p] = re - 1j * im
            k += 2
    return mat


def _block_design_rank(space, n, probes):
    rows = [_design_row(_block_rho(space, n, p)) for p in probes]
    return np.linalg.matrix_rank(np.array(rows), tol=1e-9)


def simulate_counts(
    det: DetectorModel, probes: Iterable[StateVector], shots: int, seed: int = 0
) -> CountTable:
    """Run the probe campaign against a detector and tally outcomes."""
    if shots < 1:
        raise ParamOutOfRange("shots must be >= 1")
    probes = tuple(probes)
    counts = np.zeros((len(BASIS_ORDER), len(probes), len(OUTCOME_ORDER)), dtype=np.int64)
    for bi, basis in enumerate(BASIS_ORDER):
        povm = det.povm(basis)
        for pi, probe in enumerate(probes):
            labels, probs = outcome_distribution(povm, probe)
            rng = substream(seed, DOMAIN_TOMOGRAPHY, bi * len(probes) + pi)
            drawn = rng.multinomial(shots, probs)
            for label, c in zip(labels, drawn):
                counts[bi, pi, OUTCOME_ORDER.index(label)] = c
    return CountTable(det.space, probes, counts)


@dataclass(frozen=True, eq=False)
class NoClickEstimate:
    """Least-squares no-click operators with fit diagnostics."""

    space: HilbertSpec
    operators: Mapping[Basis, HermitianOp]
    residual_norm: Mapping[Basis, float]
    probe_deviation: Mapping[Basis, np.ndarray]


def reconstruct_no_click(
    space: HilbertSpec,
    probes: Iterable[StateVector],
    no_click_freq: np.ndarray,
) -> NoClickEstimate:
    """Linear-inversion least squares of p_i = <psi_i|E|psi_i>, per photon
    block, followed by eigenvalue clipping onto 0 <= E <= 1.

    `no_click_freq` has shape (2, n_probes): the observed no-click fraction
    for each basis and probe.  Exact frequencies give exact recovery; the
    clipping step is the Frobenius projection onto the admissible spectral
    box, so it never hurts the fit on exact data.
    """
    probes = tuple(probes)
    freq = np.asarray(no_click_freq, dtype=float)
    if freq.shape != (len(BASIS_ORDER), len(probes)):
        raise ParamOutOfRange(f"frequency array has shape {freq.shape}")
    # group probes by photon-number block
    block_members: dict[int, list[int]] = {}
    for i, probe in enumerate(probes):
        n = probe.photon_number(tol=1e-9)
        if n is None:
            raise IncompleteProbeSet(
                f"probe {i} has no sharp photon number; block inversion undefined"
            )
        block_members.setdefault(n, []).append(i)
    operators, residuals, deviations = {}, {}, {}
    for bi, basis in enumerate(BASIS_ORDER):
        full = np.zeros((space.dimension,) * 2, dtype=complex)
        dev = np.zeros(len(probes))
        res_sq = 0.0
        for n, members in sorted(block_members.items()):
            d = n + 1
            rows = np.array(
                [_design_row(_block_rho(space, n, probes[i])) for i in members]
            )
            if np.linalg.matrix_rank(rows, tol=1e-9) < d * d:
                raise IncompleteProbeSet(
                    f"probes for block {n} span rank {np.linalg.matrix_rank(rows, tol=1e-9)}"
                    f" < {d * d}"
                )
            y = freq[bi, members]
            x, *_ = np.linalg.lstsq(rows, y, rcond=None)
            est = _params_to_hermitian(x, d)
            vals, vecs = np.linalg.eigh(est)
            est = (vecs * np.clip(vals, 0.0, 1.0)) @ vecs.conj().T
            blk = space.block(n)
            full[blk, blk] = est
            for i in members:
                pred = float(
                    np.real(np.trace(est @ _block_rho(space, n, probes[i])))
                )
                dev[i] = pred - freq[bi, i]
                res_sq += dev[i] ** 2
        operators[basis] = HermitianOp(space, full)
        residuals[basis] = math.sqrt(res_sq)
        deviations[basis] = dev
    return NoClickEstimate(space, operators, residuals, deviations)


def characterize_no_click(counts: CountTable) -> NoClickEstimate:
    """Estimate the per-basis no-click operator from a measured count table."""
    freq = counts.frequencies()[:, :, OUTCOME_ORDER.index(OutcomeLabel.NO_CLICK)]
    return reconstruct_no_click(counts.space, counts.probes, freq)


def trace_distance(a: HermitianOp, b: HermitianOp) -> float:
    """(1/2) ||A - B||_1."""
    if a.space != b.space:
        raise SpaceMismatch("operators live on different spaces")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))
