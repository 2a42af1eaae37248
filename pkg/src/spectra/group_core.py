"""Finite Abelian groups (Z_2^n and Z_d^N), their characters and Fourier transforms.

Elements and frequencies are addressed by a packed little-endian mixed-radix
index: coordinate ``j`` contributes ``coords[j] * d**j``. For the Boolean cube
this means bit ``j`` of the index is coordinate ``j``. The text form of a
bitstring is the binary numeral of its index (most significant coordinate
first), so ``"01"`` is index 1 and has coordinate 0 set.

Both transform directions use the balanced ``1/sqrt(|G|)`` prefactor and the
forward transform carries the conjugated character::

    fhat(k) = |G|^{-1/2} sum_g f(g) conj(chi_k(g))
    f(g)    = |G|^{-1/2} sum_k chi_k(g) fhat(k)

with ``chi_k(x) = exp(2 pi i <k, x> / d)``, which is ``(-1)^{k.x}`` for d = 2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import CONFIG
from .errors import GuardError, InvalidKernel


@dataclass(frozen=True)
class GroupSpec:
    """Z_2^n (``kind="boolean"``) or Z_d^N (``kind="cyclic"``)."""

    kind: str
    d: int
    N: int

    def __post_init__(self):
        if self.kind not in ("boolean", "cyclic"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.kind == "boolean" and self.d != 2:
            raise ValueError("boolean groups have d = 2")
        if self.N < 1:
            raise ValueError("group needs at least one dimension")
        if self.d < 2:
            raise ValueError("cyclic modulus must be >= 2")

    @classmethod
    def boolean(cls, n: int) -> "GroupSpec":
        return cls("boolean", 2, int(n))

    @classmethod
    def cyclic(cls, d: int, N: int = 1) -> "GroupSpec":
        return cls("cyclic", int(d), int(N))

    @property
    def is_boolean(self) -> bool:
        return self.kind == "boolean"

    @property
    def n(self) -> int:
        return self.N

    @property
    def order(self) -> int:
        return self.d**self.N

    def check_dense(self) -> None:
        if self.order > CONFIG.max_dense_order:
            raise GuardError(
                f"group of order {self.order} exceeds the dense limit {CONFIG.max_dense_order}"
            )

    def __str__(self):
        if self.is_boolean:
            return f"Z2^{self.N}"
        return f"Z{self.d}^{self.N}"


# -- element encoding ---------------------------------------------------------


def pack(group: GroupSpec, coords: Sequence[int]) -> int:
    """Mixed-radix index of a coordinate vector (coordinate 0 least significant)."""
    if len(coords) != group.N:
        raise ValueError(f"expected {group.N} coordinates, got {len(coords)}")
    index = 0
    for j in reversed(range(group.N)):
        c = int(coords[j])
        if not 0 <= c < group.d:
            raise ValueError(f"coordinate {c} out of range for {group}")
        index = index * group.d + c
    return index


def unpack(group: GroupSpec, index: int) -> tuple[int, ...]:
    if not 0 <= index < group.order:
        raise ValueError(f"index {index} out of range for {group}")
    coords = []
    for _ in range(group.N):
        index, c = divmod(index, group.d)
        coords.append(c)
    return tuple(coords)


def bits_to_str(index: int, n: int) -> str:
    return format(index, f"0{n}b") if n > 0 else ""


def str_to_bits(s: str) -> int:
    return int(s, 2)


def order_weight(group: GroupSpec, k: int | Sequence[int]) -> int:
    """Number of nonzero coordinates of a frequency (Hamming weight for Z_2^n)."""
    if isinstance(k, (int, np.integer)):
        if group.is_boolean:
            return int(k).bit_count()
        k = unpack(group, int(k))
    return sum(1 for c in k if c != 0)


def _as_index(group: GroupSpec, x) -> int:
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < group.order:
            raise ValueError(f"index {x} out of range for {group}")
        return int(x)
    return pack(group, x)


def all_coords(group: GroupSpec) -> np.ndarray:
    """(order, N) array of the coordinates of every element, in index order."""
    idx = np.arange(group.order)
    out = np.empty((group.order, group.N), dtype=np.int64)
    for j in range(group.N):
        out[:, j] = (idx // group.d**j) % group.d
    return out


def weights(group: GroupSpec) -> np.ndarray:
    """Order weight of every frequency, in index order."""
    return np.count_nonzero(all_coords(group), axis=1)


# -- characters ---------------------------------------------------------------


def dot_mod2(x: int | Sequence[int], k: int | Sequence[int], n: int | None = None) -> int:
    """Inner product of two bitstrings modulo 2.

    Accepts either packed integers or bit sequences; sequences must have the
    same length.
    """
    if isinstance(x, (int, np.integer)) and isinstance(k, (int, np.integer)):
        if n is not None and (x >> n or k >> n):
            raise ValueError(f"bitstrings longer than n={n}")
        return (int(x) & int(k)).bit_count() & 1
    if isinstance(x, (int, np.integer)) or isinstance(k, (int, np.integer)):
        raise TypeError("mix of packed and sequence bitstrings")
    if len(x) != len(k):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(k)}")
    return sum(int(a) * int(b) for a, b in zip(x, k)) % 2


def character(group: GroupSpec, k, x) -> complex:
    """chi_k(x): ``(-1)^{k.x}`` on Z_2^n, ``exp(2 pi i <k,x>/d)`` on Z_d^N."""
    ki = unpack(group, _as_index(group, k))
    xi = unpack(group, _as_index(group, x))
    if group.is_boolean:
        return complex((-1) ** (sum(a * b for a, b in zip(ki, xi)) % 2))
    phase = sum(a * b for a, b in zip(ki, xi)) % group.d
    return complex(np.exp(2j * np.pi * phase / group.d))


def character_table(group: GroupSpec) -> np.ndarray:
    """Dense matrix ``T[k, x] = chi_k(x)``; only for small groups (tests, oracles)."""
    c = all_coords(group)
    phase = (c @ c.T) % group.d
    if group.is_boolean:
        return np.where(phase == 0, 1.0, -1.0).astype(complex)
    return np.exp(2j * np.pi * phase / group.d)


# -- functions and spectra ------------------------------------------------------


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DenseFunction:
    """Complex function on a group, indexed by packed element index."""

    group: GroupSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1 or vals.shape[0] != self.group.order:
            raise ValueError(f"expected {self.group.order} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("function values must be finite")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def real(self) -> np.ndarray:
        return self.values.real.copy()

    def __getitem__(self, x) -> complex:
        return self.values[_as_index(self.group, x)]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients indexed by packed dual-group index."""

    group: GroupSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1 or vals.shape[0] != self.group.order:
            raise ValueError(f"expected {self.group.order} coefficients, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "values", _frozen(vals))

    def __getitem__(self, k) -> complex:
        return self.values[_as_index(self.group, k)]

    def sparse(self, atol: float = 0.0) -> list[tuple[int, complex]]:
        """Nonzero coefficients as ``(frequency index, value)`` pairs."""
        nz = np.flatnonzero(np.abs(self.values) > atol)
        return [(int(k), complex(self.values[k])) for k in nz]

    @classmethod
    def from_sparse(cls, group: GroupSpec, entries: Iterable[tuple]) -> "Spectrum":
        group.check_dense()
        vals = np.zeros(group.order, dtype=complex)
        for k, v in entries:
            vals[_as_index(group, k)] += v
        return cls(group, vals)


# -- transforms ---------------------------------------------------------------


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform by the radix-2 butterfly.

    Runs in O(n 2^n); the returned array is a new buffer, the input is untouched.
    """
    a = np.array(values, dtype=np.result_type(values, float), copy=True)
    size = a.shape[0]
    if size & (size - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < size:
        view = a.reshape(-1, 2, h)
        top = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = top - view[:, 1, :]
        h *= 2
    return a


def _axes_shape(group: GroupSpec) -> tuple[int, ...]:
    return (group.d,) * group.N


def _forward(group: GroupSpec, values: np.ndarray) -> np.ndarray:
    group.check_dense()
    if group.is_boolean:
        return fwht(values) / math.sqrt(group.order)
    cube = np.asarray(values, dtype=complex).reshape(_axes_shape(group))
    return np.fft.fftn(cube, norm="ortho").reshape(-1)


def _inverse(group: GroupSpec, values: np.ndarray) -> np.ndarray:
    group.check_dense()
    if group.is_boolean:
        return fwht(values) / math.sqrt(group.order)
    cube = np.asarray(values, dtype=complex).reshape(_axes_shape(group))
    return np.fft.ifftn(cube, norm="ortho").reshape(-1)


def fourier(f: DenseFunction) -> Spectrum:
    """Balanced forward transform (FWHT on Z_2^n, per-axis FFT on Z_d^N)."""
    return Spectrum(f.group, _forward(f.group, f.values))


def inverse_fourier(s: Spectrum) -> DenseFunction:
    return DenseFunction(s.group, _inverse(s.group, s.values))


def naive_fourier(f: DenseFunction) -> Spectrum:
    """Direct O(|G|^2) character sum; reference for the fast paths."""
    table = character_table(f.group)
    return Spectrum(f.group, table.conj() @ f.values / math.sqrt(f.group.order))


def naive_inverse_fourier(s: Spectrum) -> DenseFunction:
    table = character_table(s.group)
    return DenseFunction(s.group, table.T @ s.values / math.sqrt(s.group.order))


# -- probability helpers --------------------------------------------------------


def check_probability(p: DenseFunction, tol: float = CONFIG.prob_sum_tol) -> np.ndarray:
    vals = p.values
    if np.any(np.abs(vals.imag) > tol):
        raise ValueError("probability vector has imaginary part")
    real = vals.real
    if np.any(real < -tol):
        raise ValueError("probability vector has negative entries")
    if abs(real.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {real.sum()!r}, not 1")
    return real


def expected_parity(p: DenseFunction, k) -> float:
    """Normalised expected parity ``2^{-n/2} E_p[(-1)^{k.x}]``; equals ``fourier(p)[k]``."""
    if not p.group.is_boolean:
        raise ValueError("expected parities are defined on Z_2^n")
    check_probability(p)
    return float(fourier(p)[k].real)


def to_spin_moments(p: DenseFunction) -> dict[int, float]:
    """Mixed moments ``E[prod_{i in k} xbar_i]`` of the spins ``xbar_i = (-1)^{x_i}``."""
    if not p.group.is_boolean:
        raise ValueError("spin moments are defined on Z_2^n")
    check_probability(p)
    spec = fourier(p).values.real * math.sqrt(p.group.order)
    return {k: float(v) for k, v in enumerate(spec)}


def interaction_effect(f: DenseFunction, subset) -> float:
    """Interaction effect L(S) of a bit subset, by nested conditional differences.

    ``subset`` is a frequency (packed index or bit sequence) whose 1-bits select
    the variables. ``L({i})`` sums ``f(x_i=1) - f(x_i=0)`` over all settings of
    the other bits; each additional variable takes the difference of the
    conditional effects at 1 and 0. The empty subset returns ``sum_x f(x)``.
    """
    group = f.group
    if not group.is_boolean:
        raise ValueError("interaction effects are defined on Z_2^n")
    k = _as_index(group, subset)
    if np.any(np.abs(f.values.imag) > 0):
        raise ValueError("interaction effects need a real response function")
    table = f.values.real.reshape((2,) * group.N)
    # axis a of the C-order reshape is coordinate N-1-a
    for j in range(group.N):
        axis = group.N - 1 - j
        if k >> j & 1:
            diff = np.take(table, 1, axis=axis) - np.take(table, 0, axis=axis)
            table = np.expand_dims(diff, axis)
    return float(table.sum())


# -- convolution & kernels -----------------------------------------------------


def _same_group(f, g):
    if f.group != g.group:
        raise ValueError(f"group mismatch: {f.group} vs {g.group}")


def subtract_indices(group: GroupSpec) -> np.ndarray:
    """Matrix ``D[x, y] = index(x - y)``."""
    c = all_coords(group)
    diff = (c[:, None, :] - c[None, :, :]) % group.d
    return diff @ (group.d ** np.arange(group.N))


def convolve_direct(f: DenseFunction, g: DenseFunction) -> DenseFunction:
    """``(f * g)(x) = sum_y f(x - y) g(y)`` by the O(|G|^2) double sum."""
    _same_group(f, g)
    D = subtract_indices(f.group)
    return DenseFunction(f.group, f.values[D] @ g.values)


def convolve(f: DenseFunction, g: DenseFunction, method: str = "spectral") -> DenseFunction:
    """Group convolution. The spectral path is ``F^{-1}(sqrt|G| * fhat * ghat)``."""
    _same_group(f, g)
    if method == "direct":
        return convolve_direct(f, g)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    scale = math.sqrt(f.group.order)
    prod = scale * fourier(f).values * fourier(g).values
    return inverse_fourier(Spectrum(f.group, prod))


def translate(f: DenseFunction, a) -> DenseFunction:
    """``(T_a f)(x) = f(x - a)``."""
    group = f.group
    shift = np.array(unpack(group, _as_index(group, a)))
    c = (all_coords(group) - shift) % group.d
    idx = c @ (group.d ** np.arange(group.N))
    return DenseFunction(group, f.values[idx])


def delta(group: GroupSpec, x=0) -> DenseFunction:
    vals = np.zeros(group.order)
    vals[_as_index(group, x)] = 1.0
    return DenseFunction(group, vals)


def uniform(group: GroupSpec) -> DenseFunction:
    return DenseFunction(group, np.full(group.order, 1.0 / group.order))


def noise_kernel_fn(n: int, theta: float) -> DenseFunction:
    """One-argument noise kernel ``phi(z) = theta^|z| (1-theta)^(n-|z|)`` on Z_2^n."""
    group = GroupSpec.boolean(n)
    w = weights(group)
    # numpy gives 0.0**0 == 1.0, which is the convention needed at theta in {0, 1}
    return DenseFunction(group, np.power(theta, w) * np.power(1.0 - theta, n - w))


def mmd_squared(p: DenseFunction, q: DenseFunction, kernel_fn: DenseFunction, method: str = "spectral") -> float:
    """Squared MMD with the stationary kernel ``k(g, g') = phi(g - g')``.

    The spectral form is ``sqrt|G| * sum_k |phat(k) - qhat(k)|^2 * phihat(k)``;
    ``method="direct"`` evaluates the double sum instead.
    """
    _same_group(p, q)
    _same_group(p, kernel_fn)
    check_probability(p)
    check_probability(q)
    phi_hat = fourier(kernel_fn).values
    if np.any(phi_hat.real < -CONFIG.prob_sum_tol):
        warnings.warn("kernel has a negative spectrum; MMD is not a metric", InvalidKernel, stacklevel=2)
    delta_vals = p.values - q.values
    if method == "direct":
        D = subtract_indices(p.group)
        return float(np.real(delta_vals.conj() @ kernel_fn.values[D] @ delta_vals))
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    d_hat = fourier(DenseFunction(p.group, delta_vals)).values
    return float(math.sqrt(p.group.order) * np.real(np.sum(np.abs(d_hat) ** 2 * phi_hat)))


# -- spectral inspection ----------------------------------------------------------


def _shell(group: GroupSpec) -> np.ndarray:
    if group.is_boolean:
        return weights(group)
    c = all_coords(group)
    return np.minimum(c, group.d - c).max(axis=1)


def smoothness_decay_profile(f: DenseFunction) -> list[tuple[int, float]]:
    """Maximum ``|fhat|`` per Hamming weight (Z_2^n) or per max-|k| shell (Z_d^N)."""
    mags = np.abs(fourier(f).values)
    shell = _shell(f.group)
    return [(int(s), float(mags[shell == s].max())) for s in np.unique(shell)]


def count_bandlimited_frequencies(n: int, b: int) -> int:
    """Number of frequencies of Hamming weight at most ``b`` in Z_2^n."""
    if not 0 <= b <= n:
        raise ValueError(f"band {b} outside [0, {n}]")
    return sum(math.comb(n, m) for m in range(b + 1))
