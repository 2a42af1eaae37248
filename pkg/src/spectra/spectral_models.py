"""Empirical smoothing of bitstring data in Walsh-Fourier space.

The pipeline is: empirical distribution -> Walsh transform -> per-frequency
filter -> inverse transform -> sample. The order-decay filter
``(1 - 2 theta)^|k|`` is the same as convolving with the noise kernel, which
gives a sampler that never builds a table (:func:`kde_sample`). Bandlimited
models keep only frequencies up to a Hamming weight and support probability,
marginal and autoregressive evaluation without a dense table.

Sample arrays are ``(count, n)`` uint8 matrices whose column ``j`` is
coordinate ``j`` (bit ``j`` of the packed index).
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence, Union

import numpy as np

from .config import CONFIG
from .errors import GuardError, NegativeConditional, NegativeMass, NormalizationError
from .group_core import (
    DenseFunction,
    GroupSpec,
    Spectrum,
    bits_to_str,
    count_bandlimited_frequencies,
    fourier,
    inverse_fourier,
    weights,
)


# -- data ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Multiset of n-bit samples stored as a ``(m, n)`` bit matrix."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.shape[0] == 0:
            raise ValueError("dataset must be a nonempty (m, n) bit matrix")
        if b.shape[1] < 1:
            raise ValueError("samples need at least one bit")
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("dataset entries must be 0 or 1")
        b = b.astype(np.uint8)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def n(self) -> int:
        return self.bits.shape[1]

    def __len__(self):
        return self.bits.shape[0]

    @classmethod
    def from_strings(cls, lines: Sequence[str]) -> "Dataset":
        """Parse bitstrings written as binary numerals (coordinate 0 is the last character)."""
        if not lines:
            raise ValueError("empty dataset")
        n = len(lines[0])
        rows = []
        for s in lines:
            if len(s) != n or set(s) - {"0", "1"}:
                raise ValueError(f"bad sample {s!r}")
            rows.append([int(c) for c in reversed(s)])
        return cls(np.array(rows, dtype=np.uint8))

    @classmethod
    def from_indices(cls, indices: Sequence[int], n: int) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return cls(((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8))

    def indices(self) -> np.ndarray:
        """Packed indices of the samples (requires n <= 62)."""
        if self.n > 62:
            raise GuardError("packed indices need n <= 62")
        return self.bits.astype(np.int64) @ (np.int64(1) << np.arange(self.n, dtype=np.int64))

    def to_strings(self) -> list[str]:
        return ["".join(str(b) for b in row[::-1]) for row in self.bits]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.n}:".encode())
        h.update(np.ascontiguousarray(self.bits).tobytes())
        return h.hexdigest()


def _check_dense_n(n: int) -> GroupSpec:
    group = GroupSpec.boolean(n)
    group.check_dense()
    return group


def empirical_distribution(X: Dataset) -> DenseFunction:
    """Empirical measure: ``count(x) / |X|`` (duplicates counted)."""
    group = _check_dense_n(X.n)
    counts = np.bincount(X.indices(), minlength=group.order)
    return DenseFunction(group, counts / len(X))


def _pow2_half(n: int) -> float:
    # 2^{-n/2} without overflow for large n
    return math.ldexp(1.0 if n % 2 == 0 else math.sqrt(0.5), -(n // 2))


def _support(k, n: int) -> np.ndarray:
    if isinstance(k, (int, np.integer)):
        k = int(k)
        if k < 0 or k >> n:
            raise ValueError(f"frequency {k} outside {n} bits")
        return np.array([j for j in range(n) if k >> j & 1], dtype=np.int64)
    k = np.asarray(k)
    if k.shape != (n,):
        raise ValueError(f"frequency must have {n} bits")
    return np.flatnonzero(k)


def empirical_coefficient(X: Dataset, k) -> float:
    """``(2^n)^{-1/2} |X|^{-1} sum_{x in X} (-1)^{k.x}`` in O(|X| n), no table."""
    S = _support(k, X.n)
    parity = X.bits[:, S].sum(axis=1) & 1
    return float((1.0 - 2.0 * parity).mean() * _pow2_half(X.n))


# -- filters --------------------------------------------------------------------


@dataclass(frozen=True)
class OrderDecay:
    """Multiply the coefficient at frequency k by ``(1 - 2 theta)^|k|``."""

    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta={self.theta} outside [0, 1]")

    def order_weights(self, n: int) -> np.ndarray:
        # 0**0 == 1 keeps k = 0 at theta = 1/2
        return np.power(1.0 - 2.0 * self.theta, np.arange(n + 1, dtype=float))


@dataclass(frozen=True)
class PerOrder:
    """Explicit multiplier per Hamming weight 0..n."""

    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not all(math.isfinite(v) for v in w):
            raise ValueError("per-order weights must be finite")
        object.__setattr__(self, "weights", w)

    def order_weights(self, n: int) -> np.ndarray:
        if len(self.weights) != n + 1:
            raise ValueError(f"need {n + 1} per-order weights, got {len(self.weights)}")
        return np.array(self.weights)


@dataclass(frozen=True)
class PerFrequency:
    """Explicit multiplier per packed frequency; frequencies not listed get 0."""

    mapping: Mapping[int, complex]

    def __post_init__(self):
        object.__setattr__(self, "mapping", {int(k): complex(v) for k, v in dict(self.mapping).items()})

    def weight(self, k: int) -> complex:
        return self.mapping.get(int(k), 0.0)

    def __hash__(self):
        return hash(tuple(sorted(self.mapping.items(), key=lambda kv: kv[0])))


FilterSpec = Union[OrderDecay, PerOrder, PerFrequency]


def filter_multipliers(g: FilterSpec, n: int) -> np.ndarray:
    """Dense vector of multipliers indexed by packed frequency."""
    group = _check_dense_n(n)
    if isinstance(g, PerFrequency):
        out = np.zeros(group.order, dtype=complex)
        for k, v in g.mapping.items():
            if not 0 <= k < group.order:
                raise ValueError(f"frequency {k} outside {n} bits")
            out[k] = v
        return out
    return g.order_weights(n)[weights(group)]


def filter_weight(g: FilterSpec, k: int, n: int) -> complex:
    if isinstance(g, PerFrequency):
        return g.weight(k)
    return g.order_weights(n)[int(k).bit_count()]


def apply_filter(s: Spectrum, g: FilterSpec) -> Spectrum:
    if not s.group.is_boolean:
        raise ValueError("filters act on Walsh spectra")
    return Spectrum(s.group, s.values * filter_multipliers(g, s.group.n))


# -- dense model -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SmoothedModel:
    n: int
    filter: FilterSpec
    signed_values: np.ndarray = field(repr=False)
    spectrum: Spectrum = field(repr=False)
    provenance: str = ""

    @property
    def distribution(self) -> np.ndarray:
        return as_distribution(self)


def smooth(X: Dataset, g: FilterSpec) -> SmoothedModel:
    """Filter the empirical Walsh spectrum and transform back.

    Raises NormalizationError if the filter changes the k = 0 coefficient. For
    ``OrderDecay`` the result is a convolution with the noise kernel and must be
    nonnegative; this is asserted.
    """
    p_hat = fourier(empirical_distribution(X))
    filtered = apply_filter(p_hat, g)
    if abs(filtered.values[0] - p_hat.values[0]) > CONFIG.prob_sum_tol * abs(p_hat.values[0]):
        raise NormalizationError(f"filter {g!r} changes the k=0 coefficient (total mass)")
    signed = inverse_fourier(filtered).values
    if np.max(np.abs(signed.imag)) > CONFIG.prob_sum_tol:
        raise NormalizationError(f"filter {g!r} produced a complex-valued model")
    signed = signed.real.copy()
    if isinstance(g, OrderDecay) and signed.min() < -CONFIG.nonneg_tol:
        raise AssertionError(f"order-decay model has negative entry {signed.min()!r}")
    signed.setflags(write=False)
    return SmoothedModel(X.n, g, signed, filtered, X.digest())


def as_distribution(m: SmoothedModel) -> np.ndarray:
    """Probability vector of a model; tiny float negatives are clipped.

    Raises NegativeMass when the negative entries exceed the clipping budget.
    """
    vals = np.asarray(m.signed_values, dtype=float)
    neg = -vals[vals < 0].sum()
    if neg > CONFIG.clip_budget:
        raise NegativeMass(float(neg), m.filter)
    p = np.clip(vals, 0.0, None)
    p = p / p.sum()
    p.setflags(write=False)
    return p


def _draw_indices(p: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(count), side="right")


def sample_table(p: np.ndarray, n: int, rng_seed: int, count: int) -> np.ndarray:
    """i.i.d. draws from a probability table over Z_2^n by inverse CDF."""
    rng = np.random.default_rng(rng_seed)
    idx = _draw_indices(np.asarray(p, dtype=float), rng, count)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def exact_sample(m: SmoothedModel, rng_seed: int, count: int) -> np.ndarray:
    """i.i.d. draws by inverse CDF over the full table."""
    return sample_table(as_distribution(m), m.n, rng_seed, count)


def noise_kernel(x, y, theta: float) -> float:
    """``theta^{d_H(x,y)} (1 - theta)^{n - d_H(x,y)}`` for two bit vectors."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError("bitstrings have different lengths")
    dist = int(np.count_nonzero(x != y))
    n = x.shape[0]
    return float(theta**dist * (1.0 - theta) ** (n - dist))


def kde_sample(X: Dataset, theta: float, rng_seed: int, count: int) -> np.ndarray:
    """Pick a training point uniformly and flip each bit with probability theta."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta={theta} outside [0, 1]")
    rng = np.random.default_rng(rng_seed)
    rows = X.bits[rng.integers(0, len(X), size=count)]
    flips = (rng.random((count, X.n)) < theta).astype(np.uint8)
    return rows ^ flips


def kde_density(X: Dataset, theta: float) -> np.ndarray:
    """Dense kernel-density table ``sum_y p_X(y) kappa(x, y)`` by direct summation."""
    group = _check_dense_n(X.n)
    xs = np.arange(group.order)
    out = np.zeros(group.order)
    for y in X.indices():
        dist = np.array([int(v).bit_count() for v in xs ^ y])
        out += theta**dist * (1.0 - theta) ** (X.n - dist)
    return out / len(X)


# -- bandlimited (sparse) model ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SparseModel:
    """Filtered empirical coefficients for every frequency of weight <= band.

    ``supports[m]`` is a ``(C(n, m), m)`` array of the 1-bit positions of the
    retained frequencies of order m, and ``coefficients[m]`` their values.
    """

    n: int
    band: int
    filter: FilterSpec
    supports: tuple = field(repr=False)
    coefficients: tuple = field(repr=False)
    provenance: str = ""

    @property
    def size(self) -> int:
        return sum(len(c) for c in self.coefficients)

    def retained(self) -> list[tuple[int, complex]]:
        """``(packed frequency, coefficient)`` pairs, frequencies as Python ints."""
        out = []
        for sup, coef in zip(self.supports, self.coefficients):
            for row, c in zip(sup, coef):
                out.append((sum(1 << int(j) for j in row), complex(c)))
        return out


def _sign_sums(bits: np.ndarray, supports: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
    """For each support row, ``sum_samples (-1)^{parity of bits on the support}``."""
    if supports.shape[1] == 0:
        return np.full(supports.shape[0], float(bits.shape[0]))
    out = np.empty(supports.shape[0])
    step = max(1, chunk // max(1, bits.shape[0]))
    for start in range(0, supports.shape[0], step):
        sup = supports[start:start + step]
        parity = bits[:, sup].sum(axis=2) & 1
        out[start:start + step] = (1.0 - 2.0 * parity).sum(axis=0)
    return out


def sparse_model(X: Dataset, g: FilterSpec, band: int, budget: int | None = None) -> SparseModel:
    """Bandlimited model built from empirical coefficients, no dense table."""
    n = X.n
    if not 0 <= band <= n:
        raise ValueError(f"band {band} outside [0, {n}]")
    budget = CONFIG.sparse_budget if budget is None else budget
    count = count_bandlimited_frequencies(n, band)
    if count > budget:
        raise GuardError(
            f"bandlimited model needs {count} coefficients "
            f"(count_bandlimited_frequencies({n}, {band})), budget is {budget}"
        )
    norm = _pow2_half(n) / len(X)
    if isinstance(g, OrderDecay):
        order_w = g.order_weights(n)
    elif isinstance(g, PerOrder):
        order_w = g.order_weights(n)
    else:
        order_w = None
    supports, coefficients = [], []
    for m in range(band + 1):
        # colex order == increasing packed frequency value
        combos = sorted(itertools.combinations(range(n), m), key=lambda c: c[::-1])
        sup = np.array(combos, dtype=np.int64).reshape(len(combos), m)
        emp = _sign_sums(X.bits, sup) * norm
        if order_w is not None:
            coef = emp * order_w[m]
        else:
            w = np.array([g.weight(sum(1 << int(j) for j in row)) for row in sup], dtype=complex)
            coef = emp * w
        sup.setflags(write=False)
        supports.append(sup)
        coefficients.append(np.asarray(coef))
    if abs(coefficients[0][0] - _pow2_half(n)) > CONFIG.prob_sum_tol * _pow2_half(n):
        raise NormalizationError(f"filter {g!r} changes the k=0 coefficient (total mass)")
    return SparseModel(n, band, g, tuple(supports), tuple(coefficients), X.digest())


def _truncated_sum(m: SparseModel, prefixes: np.ndarray, length: int) -> np.ndarray:
    """``sum_{k supported in the first `length` bits} c_k (-1)^{k.prefix}`` per row."""
    total = np.zeros(prefixes.shape[0], dtype=complex)
    for sup, coef in zip(m.supports, m.coefficients):
        if sup.shape[1] == 0:
            total += coef[0]
            continue
        keep = sup.max(axis=1) < length
        if not np.any(keep):
            continue
        sel = sup[keep]
        parity = prefixes[:, sel].sum(axis=2) & 1
        total += (1.0 - 2.0 * parity) @ coef[keep]
    return total


def sparse_prob(m: SparseModel, x) -> float:
    """Truncated character sum at one point; may be negative for aggressive truncation."""
    if isinstance(x, (int, np.integer)):
        x = [int(x) >> j & 1 for j in range(m.n)]
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (m.n,):
        raise ValueError(f"point must have {m.n} bits")
    val = _truncated_sum(m, x[None, :], m.n)[0] * _pow2_half(m.n)
    return float(val.real)


def sparse_marginal(m: SparseModel, prefix_bits: Sequence[int]) -> float:
    """Probability that coordinates ``0..len(prefix)-1`` equal ``prefix_bits``.

    Only frequencies supported inside the prefix survive the sum over free bits;
    each contributes ``2^{n-m}`` times its character value.
    """
    prefix = np.asarray(prefix_bits, dtype=np.uint8).reshape(1, -1)
    return float(_marginal_batch(m, prefix)[0])


def _marginal_batch(m: SparseModel, prefixes: np.ndarray) -> np.ndarray:
    length = prefixes.shape[1]
    if length > m.n:
        raise ValueError("prefix longer than the model")
    total = _truncated_sum(m, prefixes, length)
    # 2^{n-m} / sqrt(2^n) = 2^{n/2 - m}
    scale = math.ldexp(1.0 if m.n % 2 == 0 else math.sqrt(2.0), m.n // 2 - length)
    return (total * scale).real


def autoregressive_sample(m: SparseModel, rng_seed: int, count: int) -> np.ndarray:
    """Bit-by-bit sampling from conditionals of the truncated series.

    Bits are drawn in coordinate order 0, 1, ..., n-1.
    """
    rng = np.random.default_rng(rng_seed)
    out = np.zeros((count, m.n), dtype=np.uint8)
    marg = np.ones(count)
    tol = CONFIG.clip_budget
    for j in range(m.n):
        trial = out[:, : j + 1].copy()
        trial[:, j] = 0
        p0 = _marginal_batch(m, trial)
        trial[:, j] = 1
        p1 = _marginal_batch(m, trial)
        for p in (p0, p1):
            bad = np.flatnonzero(p < -tol * np.maximum(marg, 1e-300))
            if bad.size:
                raise NegativeConditional(out[bad[0], :j])
        p0 = np.clip(p0, 0.0, None)
        p1 = np.clip(p1, 0.0, None)
        tot = p0 + p1
        if np.any(tot <= 0):
            raise NegativeConditional(out[np.flatnonzero(tot <= 0)[0], :j])
        bit = rng.random(count) * tot >= p0
        out[:, j] = bit
        marg = np.where(bit, p1, p0)
    return out


def sparse_dense_values(m: SparseModel) -> np.ndarray:
    """Evaluate the truncated series at every point (small n only)."""
    group = _check_dense_n(m.n)
    xs = ((np.arange(group.order)[:, None] >> np.arange(m.n)) & 1).astype(np.uint8)
    return (_truncated_sum(m, xs, m.n) * _pow2_half(m.n)).real


# -- likelihood and fitting ----------------------------------------------------------


class LogLikelihood(NamedTuple):
    value: float
    n_zero: int


def log_likelihood(m, X: Dataset, floor: float | None = None) -> LogLikelihood:
    """``sum_{x in X} ln p(x)``; zero-probability points give ``-inf`` and are counted.

    ``floor`` replaces probabilities below it (for numerically stable fitting).
    """
    if X.n != m.n:
        raise ValueError("dataset and model disagree on n")
    if isinstance(m, SmoothedModel):
        probs = as_distribution(m)[X.indices()]
    elif isinstance(m, SparseModel):
        probs = np.array([sparse_prob(m, row) for row in X.bits])
    else:
        raise TypeError(f"unsupported model {type(m).__name__}")
    zero = probs <= 0
    if floor is not None:
        probs = np.maximum(probs, floor)
        zero = probs <= 0
    n_zero = int(zero.sum())
    if n_zero:
        return LogLikelihood(-math.inf, n_zero)
    return LogLikelihood(float(np.log(probs).sum()), 0)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def fit_theta(train: Dataset, valid: Dataset, grid: int, refine_iters: int = 40, floor: float | None = None):
    """Held-out likelihood search for the order-decay theta on [0, 1/2].

    A uniform grid locates the best point; golden-section search then refines
    inside the neighbouring grid cells. Returns ``(theta_star, curve)`` where
    ``curve`` lists every ``(theta, loglik)`` evaluated, sorted by theta.
    """
    if grid < 3:
        raise ValueError("grid must have at least 3 points")
    _check_dense_n(train.n)
    seen: dict[float, float] = {}

    def ll(theta: float) -> float:
        theta = min(max(theta, 0.0), 0.5)
        if theta not in seen:
            seen[theta] = log_likelihood(smooth(train, OrderDecay(theta)), valid, floor).value
        return seen[theta]

    thetas = np.linspace(0.0, 0.5, grid)
    values = [ll(float(t)) for t in thetas]
    best = int(np.argmax(values))
    a = float(thetas[max(best - 1, 0)])
    b = float(thetas[min(best + 1, grid - 1)])
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    for _ in range(refine_iters):
        if ll(c) >= ll(d):
            b = d
        else:
            a = c
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
    theta_star = max(seen, key=lambda t: (seen[t], -t))
    curve = sorted(seen.items())
    return theta_star, curve


def model_bitstrings(n: int) -> list[str]:
    return [bits_to_str(i, n) for i in range(2**n)]
