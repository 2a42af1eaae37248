"""Statevector simulation of the quantum smoothing pipeline and QNN spectra.

Register layout: data qubits occupy the low bits of the amplitude index and
ancillas the high bits; qubit ``j`` is bit ``j`` of the index, matching the
packed bitstring convention of :mod:`spectra.group_core`.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from .config import CONFIG, guard_override
from .errors import DuplicatesCollapsed, GuardError, ZeroSuccessProbability
from .group_core import DenseFunction, GroupSpec, Spectrum, weights
from .spectral_models import Dataset

H_GATE = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def ry(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True, eq=False)
class StateVector:
    n_data: int
    n_anc: int
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.amps, dtype=complex)
        if a.shape != (2 ** (self.n_data + self.n_anc),):
            raise ValueError(f"expected {2 ** (self.n_data + self.n_anc)} amplitudes, got {a.shape}")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > CONFIG.state_norm_tol:
            raise ValueError(f"state is not normalized (norm {norm!r})")
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_anc

    def to_json(self) -> list[list[float]]:
        """Amplitudes as ``[re, im]`` pairs in index order (debug dumps)."""
        return [[float(z.real), float(z.imag)] for z in self.amps]


@dataclass(frozen=True, eq=False)
class PostselectReport:
    success_prob: float
    state_after: StateVector


def _qubit_guard(n: int, limit: int | None = None) -> None:
    cap = limit if limit is not None else (CONFIG.max_qubits_override if guard_override() else CONFIG.max_qubits)
    if n > cap:
        raise GuardError(f"{n} qubits exceed the simulation limit of {cap}")


# -- gate application ------------------------------------------------------------


def apply_1q(amps: np.ndarray, gate: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Apply a 2x2 gate to one qubit of a flat amplitude vector."""
    psi = np.asarray(amps, dtype=complex).reshape((2,) * n_qubits)
    axis = n_qubits - 1 - qubit
    psi = np.moveaxis(np.tensordot(gate, psi, axes=([1], [axis])), 0, axis)
    return psi.reshape(-1)


def apply_controlled_1q(amps: np.ndarray, gate: np.ndarray, control: int, target: int, n_qubits: int) -> np.ndarray:
    """Apply ``gate`` to ``target`` on the branch where ``control`` is 1."""
    psi = np.array(amps, dtype=complex).reshape((2,) * n_qubits)
    c_axis = n_qubits - 1 - control
    t_axis = n_qubits - 1 - target
    sel = [slice(None)] * n_qubits
    sel[c_axis] = 1
    branch = psi[tuple(sel)]
    # the control axis is gone in `branch`; shift target axis if it came after
    t_b = t_axis - (1 if t_axis > c_axis else 0)
    psi[tuple(sel)] = np.moveaxis(np.tensordot(gate, branch, axes=([1], [t_b])), 0, t_b)
    return psi.reshape(-1)


# -- pipeline ---------------------------------------------------------------------


def prepare_superposition(X: Dataset) -> StateVector:
    """Uniform superposition over the distinct training bitstrings."""
    _qubit_guard(X.n)
    idx = X.indices()
    uniq = np.unique(idx)
    if uniq.size < idx.size:
        warnings.warn(
            f"{idx.size - uniq.size} duplicate samples merged in the superposition",
            DuplicatesCollapsed,
            stacklevel=2,
        )
    amps = np.zeros(2**X.n, dtype=complex)
    amps[uniq] = 1.0 / math.sqrt(uniq.size)
    return StateVector(X.n, 0, amps)


def walsh_qft(s: StateVector) -> StateVector:
    """Hadamard on every data qubit."""
    amps = s.amps
    for q in range(s.n_data):
        amps = apply_1q(amps, H_GATE, q, s.n_qubits)
    return StateVector(s.n_data, s.n_anc, amps)


def cyclic_qft(s: StateVector, inverse: bool = False) -> StateVector:
    """DFT over Z_{2^n}: ``|x> -> 2^{-n/2} sum_k exp(2 pi i k x / 2^n) |k>``."""
    if s.n_anc:
        raise ValueError("cyclic QFT acts on data-only states")
    _qubit_guard(s.n_data, CONFIG.max_qft_qubits)
    if inverse:
        out = np.fft.fft(s.amps, norm="ortho")
    else:
        out = np.fft.ifft(s.amps, norm="ortho")
    return StateVector(s.n_data, 0, out)


def dft_matrix(n_qubits: int) -> np.ndarray:
    """Dense unitary of :func:`cyclic_qft` (for verification at small sizes)."""
    d = 2**n_qubits
    k = np.arange(d)
    return np.exp(2j * np.pi * np.outer(k, k) / d) / math.sqrt(d)


def _postselect_zero(amps: np.ndarray, qubit: int, n_qubits: int) -> tuple[np.ndarray, float]:
    """Project ``qubit`` on |0>, drop it, return the unnormalized branch and its weight."""
    psi = amps.reshape((2,) * n_qubits)
    branch = np.take(psi, 0, axis=n_qubits - 1 - qubit).reshape(-1)
    return branch, float(np.vdot(branch, branch).real)


def ancilla_decay_filter(s: StateVector, theta: float, mode: str = "sequential") -> PostselectReport:
    """Postselected ancilla filter ``psi(k) -> (1-2 theta)^|k| psi(k)``, renormalized.

    Each data qubit j controls a rotation RY(2 arccos(1 - 2 theta)) on its own
    ancilla, initialised in |0>; all ancillas are then postselected on |0>. A
    data 1-bit thus picks up the factor cos(arccos(1 - 2 theta)) = 1 - 2 theta.

    ``mode="register"`` allocates all n ancillas at once (2n qubits).
    ``mode="sequential"`` allocates, rotates and postselects one ancilla per
    data qubit in turn; the ancillas are never touched again after their
    rotation, so the early projections give the same branch and the same
    success probability with only n + 1 qubits in memory.
    """
    if s.n_anc:
        raise ValueError("input state already carries ancillas")
    if not 0.0 <= theta <= 0.5:
        raise ValueError(f"theta={theta} outside [0, 1/2]")
    n = s.n_data
    gate = ry(2.0 * math.acos(1.0 - 2.0 * theta))
    if mode == "register":
        _qubit_guard(2 * n, CONFIG.max_qubits)
        amps = np.kron(np.eye(2**n, 1, dtype=complex).ravel(), s.amps)
        for j in range(n):
            amps = apply_controlled_1q(amps, gate, j, n + j, 2 * n)
            if abs(np.linalg.norm(amps) - 1.0) > CONFIG.unitary_tol:
                raise AssertionError("controlled rotation broke normalization")
        branch = amps[: 2**n]
        success = float(np.vdot(branch, branch).real)
    elif mode == "sequential":
        _qubit_guard(n)
        branch = s.amps.copy()
        for j in range(n):
            # fresh ancilla at bit n (high bit), amplitude vector of n+1 qubits
            amps = np.concatenate([branch, np.zeros_like(branch)])
            amps = apply_controlled_1q(amps, gate, j, n, n + 1)
            if abs(np.linalg.norm(amps) - np.linalg.norm(branch)) > CONFIG.unitary_tol:
                raise AssertionError("controlled rotation broke normalization")
            branch, _ = _postselect_zero(amps, n, n + 1)
        success = float(np.vdot(branch, branch).real)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if success < CONFIG.min_success_prob:
        raise ZeroSuccessProbability(f"postselection success probability {success:.3e}")
    return PostselectReport(success, StateVector(n, 0, branch / math.sqrt(success)))


def decay_success_probability(psi_hat: np.ndarray, theta: float) -> float:
    """Closed form ``sum_k |psi(k)|^2 (1 - 2 theta)^{2|k|}``."""
    n = int(round(math.log2(len(psi_hat))))
    w = weights(GroupSpec.boolean(n))
    return float(np.sum(np.abs(psi_hat) ** 2 * np.power(1.0 - 2.0 * theta, 2 * w)))


def born_distribution(s: StateVector) -> DenseFunction:
    if s.n_anc:
        raise ValueError("trace out or postselect ancillas first")
    p = np.abs(s.amps) ** 2
    return DenseFunction(GroupSpec.boolean(s.n_data), p / p.sum())


def quantum_smooth(X: Dataset, theta: float, mode: str = "sequential") -> tuple[DenseFunction, float]:
    """prepare -> Hadamards -> ancilla filter -> Hadamards -> Born rule."""
    psi = prepare_superposition(X)
    report = ancilla_decay_filter(walsh_qft(psi), theta, mode=mode)
    return born_distribution(walsh_qft(report.state_after)), report.success_prob


def autoconvolution_spectrum(psi_hat: Spectrum) -> Spectrum:
    """Walsh spectrum of the Born distribution from the amplitude spectrum.

    ``phat(k) = 2^{-n/2} sum_s psihat(s) conj(psihat(s + k))``.
    """
    if not psi_hat.group.is_boolean:
        raise ValueError("autoconvolution is implemented for Z_2^n")
    a = psi_hat.values
    size = a.shape[0]
    s = np.arange(size)
    out = np.empty(size, dtype=complex)
    for k in range(size):
        out[k] = np.dot(a, a[s ^ k].conj())
    return Spectrum(psi_hat.group, out / math.sqrt(size))


# -- quantum neural networks --------------------------------------------------------


@dataclass(frozen=True)
class QnnEncodingSpec:
    """Eigenvalue lists of the encoding generators, one list per gate."""

    gates: tuple

    def __post_init__(self):
        gates = tuple(tuple(float(v) for v in g) for g in self.gates)
        for g in gates:
            if not g:
                raise ValueError("every encoding gate needs at least one eigenvalue")
            if not all(math.isfinite(v) for v in g):
                raise ValueError("eigenvalues must be finite")
        object.__setattr__(self, "gates", gates)


@dataclass(frozen=True)
class FrequencySet:
    frequencies: tuple
    integer_spectrum: bool

    def __iter__(self):
        return iter(self.frequencies)

    def __contains__(self, k):
        return any(abs(k - f) <= CONFIG.integer_tol for f in self.frequencies)


def _round_set(values, tol: float) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def qnn_frequency_set(spec: QnnEncodingSpec) -> FrequencySet:
    """All differences ``Lambda_i - Lambda_j`` of eigenvalue sums (one per gate).

    Built by iterated sumsets so the cost grows with the number of distinct
    sums, not with the product of the gate sizes.
    """
    tol = CONFIG.integer_tol
    sums = [0.0]
    for eigs in spec.gates:
        sums = _round_set((a + b for a in sums for b in eigs), tol)
    diffs = _round_set((a - b for a in sums for b in sums), tol)
    integer = all(abs(d - round(d)) <= tol for d in diffs)
    if integer:
        return FrequencySet(tuple(sorted({int(round(d)) for d in diffs})), True)
    return FrequencySet(tuple(diffs), False)


def qnn_frequency_set_bruteforce(spec: QnnEncodingSpec) -> set:
    """Exhaustive enumeration over all index tuples (oracle, tiny specs only)."""
    lams = [sum(c) for c in itertools.product(*spec.gates)] if spec.gates else [0.0]
    return {Fraction(a - b).limit_denominator(10**6) for a in lams for b in lams}


def _check_hermitian(m: np.ndarray, what: str) -> None:
    if np.max(np.abs(m - m.conj().T)) > CONFIG.unitary_tol:
        raise ValueError(f"{what} is not Hermitian")


def _check_unitary(m: np.ndarray, what: str) -> None:
    if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > CONFIG.unitary_tol:
        raise ValueError(f"{what} is not unitary")


@dataclass(frozen=True, eq=False)
class QnnModel:
    """``f(x) = <psi_x|O|psi_x>`` with ``|psi_x> = W_L E_L(x) ... W_1 E_1(x) W_0 |0>``.

    ``encoding`` lists ``(qubit, generator)`` pairs, each applied as
    ``exp(i x H)`` on one qubit. ``trainables`` holds ``len(encoding) + 1``
    full-register unitaries (``None`` means identity).
    """

    n: int
    encoding: tuple
    trainables: tuple
    observable: np.ndarray = field(repr=False)
    _eig: tuple = field(init=False, repr=False)

    def __post_init__(self):
        dim = 2**self.n
        if dim > CONFIG.max_qnn_dim:
            raise GuardError(f"QNN dimension {dim} exceeds {CONFIG.max_qnn_dim}")
        enc = tuple((int(q), np.asarray(h, dtype=complex)) for q, h in self.encoding)
        tr = tuple(self.trainables) if self.trainables else (None,) * (len(enc) + 1)
        if len(tr) != len(enc) + 1:
            raise ValueError("need one trainable block before, between and after encodings")
        tr = tuple(None if u is None else np.asarray(u, dtype=complex) for u in tr)
        obs = np.asarray(self.observable, dtype=complex)
        if obs.shape != (dim, dim):
            raise ValueError(f"observable must be {dim}x{dim}")
        _check_hermitian(obs, "observable")
        eig = []
        for q, h in enc:
            if not 0 <= q < self.n:
                raise ValueError(f"encoding qubit {q} out of range")
            if h.shape != (2, 2):
                raise ValueError("encoding generators act on a single qubit")
            _check_hermitian(h, "encoding generator")
            eig.append(np.linalg.eigh(h))
        for u in tr:
            if u is not None:
                if u.shape != (dim, dim):
                    raise ValueError(f"trainable blocks must be {dim}x{dim}")
                _check_unitary(u, "trainable block")
        object.__setattr__(self, "encoding", enc)
        object.__setattr__(self, "trainables", tr)
        object.__setattr__(self, "observable", obs)
        object.__setattr__(self, "_eig", tuple(eig))

    def encoding_spec(self) -> QnnEncodingSpec:
        return QnnEncodingSpec(tuple(tuple(vals) for vals, _ in self._eig))


def qnn_evaluate(m: QnnModel, x: float) -> float:
    psi = np.zeros(2**m.n, dtype=complex)
    psi[0] = 1.0
    if m.trainables[0] is not None:
        psi = m.trainables[0] @ psi
    for (q, _), (vals, vecs), w in zip(m.encoding, m._eig, m.trainables[1:]):
        gate = (vecs * np.exp(1j * x * vals)) @ vecs.conj().T
        psi = apply_1q(psi, gate, q, m.n)
        if w is not None:
            psi = w @ psi
    return float(np.vdot(psi, m.observable @ psi).real)


def qnn_extract_spectrum(m: QnnModel, k_max: int) -> dict[int, complex]:
    """Fourier-series coefficients ``c_k`` of ``f(x) = sum_k c_k e^{ikx}``, |k| <= k_max.

    Samples 4 k_max + 1 equispaced points on [0, 2 pi) so that any energy above
    k_max aliases into visible out-of-band coefficients.
    """
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    size = 4 * k_max + 1
    xs = 2 * np.pi * np.arange(size) / size
    fx = np.array([qnn_evaluate(m, x) for x in xs])
    c = np.fft.fft(fx) / size
    return {k: complex(c[k % size]) for k in range(-k_max, k_max + 1)}


def pauli_encoding_model(n: int, rng: np.random.Generator, generator: np.ndarray | None = None, observable: np.ndarray | None = None) -> QnnModel:
    """n qubits, one encoding per qubit, Haar-random trainable blocks around them."""
    dim = 2**n
    h = PAULI_X / 2 if generator is None else generator
    enc = tuple((q, h) for q in range(n))
    tr = tuple(unitary_group.rvs(dim, random_state=rng) for _ in range(n + 1))
    if observable is None:
        observable = PAULI_Z
        for _ in range(n - 1):
            observable = np.kron(np.eye(2), observable)
    return QnnModel(n, enc, tr, observable)
