"""Harmonic analysis on the symmetric group S_n at desk scale.

Permutations are one-line tuples over ``1..n``; ``compose(a, b)(i) = a(b(i))``.
Functions on S_n are vectors indexed by the lexicographic order of one-line
tuples (the order of :func:`itertools.permutations`). Irreducible
representations use Young's orthogonal form, so every ``sigma(pi)`` is a real
orthogonal matrix and ``sigma(pi)^dagger = sigma(pi)^T``.

Transform convention (balanced)::

    fhat(lam) = (n!)^{-1/2} sum_pi f(pi) sigma_lam(pi)^T
    f(pi)     = (n!)^{-1/2} sum_lam d_lam tr(fhat(lam) sigma_lam(pi))

With ``(f * g)(pi) = sum_tau f(pi tau^{-1}) g(tau)`` the convolution theorem
reads ``(f * g)^(lam) = sqrt(n!) * ghat(lam) @ fhat(lam)``: the right operand's
coefficient comes first.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Mapping, Sequence, Union

import numpy as np

from .config import CONFIG, guard_override
from .errors import GuardError, ZeroPosteriorMass

Permutation = tuple
Partition = tuple


# -- permutations ---------------------------------------------------------------


def check_permutation(a: Sequence[int]) -> Permutation:
    a = tuple(int(v) for v in a)
    if sorted(a) != list(range(1, len(a) + 1)):
        raise ValueError(f"{a} is not a permutation of 1..{len(a)}")
    return a


def identity(n: int) -> Permutation:
    return tuple(range(1, n + 1))


def compose(a: Permutation, b: Permutation) -> Permutation:
    """``(a o b)(i) = a(b(i))``."""
    if len(a) != len(b):
        raise ValueError(f"size mismatch: {len(a)} vs {len(b)}")
    return tuple(a[j - 1] for j in b)


def inverse(a: Permutation) -> Permutation:
    out = [0] * len(a)
    for i, v in enumerate(a, start=1):
        out[v - 1] = i
    return tuple(out)


def enumerate_perms(n: int) -> list[Permutation]:
    """All permutations of 1..n in lexicographic one-line order."""
    return list(itertools.permutations(range(1, n + 1)))


def perm_index(a: Permutation) -> int:
    """Rank of ``a`` in :func:`enumerate_perms` (Lehmer code)."""
    n = len(a)
    rank = 0
    for i in range(n):
        smaller = sum(1 for j in range(i + 1, n) if a[j] < a[i])
        rank += smaller * math.factorial(n - 1 - i)
    return rank


def _rank_rows(P: np.ndarray) -> np.ndarray:
    """Vectorized Lehmer rank of every row of a (m, n) array of permutations."""
    n = P.shape[1]
    rank = np.zeros(P.shape[0], dtype=np.int64)
    for i in range(n):
        smaller = (P[:, i + 1:] < P[:, i:i + 1]).sum(axis=1)
        rank += smaller * math.factorial(n - 1 - i)
    return rank


def inversions(a: Permutation) -> int:
    return sum(1 for i in range(len(a)) for j in range(i + 1, len(a)) if a[i] > a[j])


def sign(a: Permutation) -> int:
    return -1 if inversions(a) % 2 else 1


def cycle_type(a: Permutation) -> Partition:
    seen = [False] * len(a)
    lengths = []
    for start in range(len(a)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = a[j] - 1
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths, reverse=True))


def transposition(n: int, i: int, j: int) -> Permutation:
    p = list(range(1, n + 1))
    p[i - 1], p[j - 1] = p[j - 1], p[i - 1]
    return tuple(p)


# -- partitions -----------------------------------------------------------------


def check_partition(lam: Sequence[int], n: int | None = None) -> Partition:
    lam = tuple(int(v) for v in lam)
    if not lam or any(v <= 0 for v in lam) or any(a < b for a, b in zip(lam, lam[1:])):
        raise ValueError(f"{lam} is not a partition")
    if n is not None and sum(lam) != n:
        raise ValueError(f"{lam} is not a partition of {n}")
    return lam


def partitions(n: int) -> list[Partition]:
    """Partitions of n in reverse lexicographic order, starting with ``(n,)``."""
    out: list[Partition] = []

    def rec(remaining, largest, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for part in range(min(remaining, largest), 0, -1):
            rec(remaining - part, part, prefix + [part])

    rec(n, n, [])
    return out


class Dominance(Enum):
    DOMINATES = "dominates"
    DOMINATED_BY = "dominated_by"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def dominance(lam: Partition, mu: Partition) -> Dominance:
    """Compare two partitions of the same n by their partial sums."""
    lam = check_partition(lam)
    mu = check_partition(mu)
    if sum(lam) != sum(mu):
        raise ValueError("partitions of different n")
    if lam == mu:
        return Dominance.EQUAL
    size = max(len(lam), len(mu))
    a = np.cumsum(list(lam) + [0] * (size - len(lam)))
    b = np.cumsum(list(mu) + [0] * (size - len(mu)))
    if np.all(a >= b):
        return Dominance.DOMINATES
    if np.all(a <= b):
        return Dominance.DOMINATED_BY
    return Dominance.INCOMPARABLE


# -- Young's orthogonal representation --------------------------------------------


@lru_cache(maxsize=None)
def standard_tableaux(lam: Partition) -> tuple:
    """Standard Young tableaux of shape lam, each as a tuple ``(row, col)`` per entry 1..n.

    Order is deterministic (entries placed 1, 2, ... into rows top to bottom).
    """
    lam = check_partition(lam)
    n = sum(lam)
    out = []

    def rec(k, filled, pos):
        if k > n:
            out.append(tuple(pos))
            return
        for r in range(len(lam)):
            c = filled[r]
            if c < lam[r] and (r == 0 or filled[r - 1] > c):
                filled[r] += 1
                pos.append((r, c))
                rec(k + 1, filled, pos)
                pos.pop()
                filled[r] -= 1

    rec(1, [0] * len(lam), [])
    return tuple(out)


def dimension(lam: Partition) -> int:
    return len(standard_tableaux(check_partition(lam)))


@lru_cache(maxsize=None)
def _generators(lam: Partition) -> tuple:
    """YOR matrices of the adjacent transpositions s_1 .. s_{n-1}."""
    tabs = standard_tableaux(lam)
    index = {t: i for i, t in enumerate(tabs)}
    n = sum(lam)
    d = len(tabs)
    gens = []
    for i in range(1, n):
        m = np.zeros((d, d))
        for col, t in enumerate(tabs):
            (r1, c1), (r2, c2) = t[i - 1], t[i]
            axial = (c2 - r2) - (c1 - r1)
            m[col, col] = 1.0 / axial
            if abs(axial) > 1:
                swapped = list(t)
                swapped[i - 1], swapped[i] = t[i], t[i - 1]
                row = index[tuple(swapped)]
                m[row, col] = math.sqrt(1.0 - 1.0 / axial**2)
        m.setflags(write=False)
        gens.append(m)
    return tuple(gens)


def reduced_word(a: Permutation) -> list[int]:
    """Indices i with ``a = s_{i_1} o s_{i_2} o ... o s_{i_k}`` (k = inversions)."""
    a = list(a)
    word = []
    while True:
        for i in range(len(a) - 1):
            if a[i] > a[i + 1]:
                # a = (a o s_i) o s_i and a o s_i has one inversion fewer
                a[i], a[i + 1] = a[i + 1], a[i]
                word.append(i + 1)
                break
        else:
            break
    return word[::-1]


def young_orthogonal_irrep(lam: Partition, pi: Permutation) -> np.ndarray:
    """Young's orthogonal matrix ``sigma_lam(pi)``."""
    lam = check_partition(lam)
    pi = check_permutation(pi)
    if sum(lam) != len(pi):
        raise ValueError("partition and permutation sizes differ")
    gens = _generators(lam)
    out = np.eye(dimension(lam))
    for i in reduced_word(pi):
        out = out @ gens[i - 1]
    return out


@lru_cache(maxsize=None)
def _irrep_table(lam: Partition) -> np.ndarray:
    """``(n!, d, d)`` array of irrep matrices in enumeration order, built by
    extending ``sigma(a o s_i) = sigma(a) sigma(s_i)`` over the enumeration."""
    n = sum(lam)
    gens = _generators(lam)
    d = dimension(lam)
    perms = enumerate_perms(n)
    table = np.empty((len(perms), d, d))
    done = np.zeros(len(perms), dtype=bool)
    table[0] = np.eye(d)
    done[0] = True
    for idx, a in enumerate(perms):
        if done[idx]:
            continue
        for i in range(n - 1):
            if a[i] > a[i + 1]:
                b = list(a)
                b[i], b[i + 1] = b[i + 1], b[i]
                j = perm_index(tuple(b))
                # b precedes a lexicographically, so it is already filled
                table[idx] = table[j] @ gens[i]
                done[idx] = True
                break
    table.setflags(write=False)
    return table


def _transform_guard(n: int) -> None:
    cap = CONFIG.sn_transform_override_max if guard_override() else CONFIG.sn_transform_max
    if n > cap:
        raise GuardError(f"S_{n} transforms are limited to n <= {cap} (set SPECTRA_GUARD_OVERRIDE=1)")
    if n > CONFIG.sn_transform_max:
        warnings.warn(f"S_{n} transforms cache an (n!, d, d) table per irrep; expect high memory use", ResourceWarning, stacklevel=3)


# -- functions and transforms -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SnFunction:
    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1 or self.n > CONFIG.sn_hard_max:
            raise GuardError(f"S_n functions are limited to 1 <= n <= {CONFIG.sn_hard_max}")
        v = np.array(self.values)
        if v.shape != (math.factorial(self.n),):
            raise ValueError(f"expected {math.factorial(self.n)} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, pi) -> complex:
        return self.values[perm_index(check_permutation(pi))]

    @classmethod
    def from_callable(cls, n: int, fn) -> "SnFunction":
        return cls(n, np.array([fn(p) for p in enumerate_perms(n)]))


SnSpectrum = dict


def sn_delta(n: int, pi: Permutation | None = None) -> SnFunction:
    vals = np.zeros(math.factorial(n))
    vals[perm_index(pi if pi is not None else identity(n))] = 1.0
    return SnFunction(n, vals)


def sn_uniform(n: int) -> SnFunction:
    size = math.factorial(n)
    return SnFunction(n, np.full(size, 1.0 / size))


def sn_fourier(f: SnFunction) -> dict[Partition, np.ndarray]:
    """Matrix-valued coefficients for every partition of n."""
    _transform_guard(f.n)
    scale = 1.0 / math.sqrt(math.factorial(f.n))
    out = {}
    for lam in partitions(f.n):
        table = _irrep_table(lam)
        # sum_pi f(pi) sigma(pi)^T
        out[lam] = np.einsum("p,pij->ji", f.values, table) * scale
    return out


def sn_inverse_fourier(s: Mapping[Partition, np.ndarray], n: int | None = None) -> SnFunction:
    if n is None:
        n = sum(next(iter(s)))
    _transform_guard(n)
    missing = [lam for lam in partitions(n) if lam not in s]
    if missing:
        raise ValueError(f"spectrum lacks partitions {missing}")
    scale = 1.0 / math.sqrt(math.factorial(n))
    vals = 0
    for lam in partitions(n):
        coef = np.asarray(s[lam])
        d = dimension(lam)
        if coef.shape != (d, d):
            raise ValueError(f"coefficient for {lam} must be {d}x{d}")
        # tr(coef @ sigma(pi)) = sum_ij coef_ij sigma(pi)_ji
        vals = vals + d * np.einsum("ij,pji->p", coef, _irrep_table(lam))
    vals = np.asarray(vals) * scale
    if np.all(np.abs(np.imag(vals)) == 0):
        vals = np.real(vals)
    return SnFunction(n, vals)


def plancherel_norm(s: Mapping[Partition, np.ndarray]) -> float:
    """``sum_lam d_lam ||fhat(lam)||_F^2``."""
    return float(sum(dimension(lam) * np.sum(np.abs(m) ** 2) for lam, m in s.items()))


# -- convolution -------------------------------------------------------------------


@lru_cache(maxsize=None)
def _perm_array(n: int) -> np.ndarray:
    arr = np.array(enumerate_perms(n), dtype=np.int64) - 1
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=4)
def _quotient_table(n: int) -> np.ndarray:
    """``Q[x, y] = index(x o y^{-1})``."""
    P = _perm_array(n)
    inv = np.argsort(P, axis=1)
    # (x o y^{-1})(i) = x(y^{-1}(i))
    comp = P[:, inv]  # comp[x, y, i] = P[x, inv[y, i]]
    size = P.shape[0]
    Q = _rank_rows(comp.reshape(size * size, n)).reshape(size, size)
    Q.setflags(write=False)
    return Q


def sn_convolve(f: SnFunction, g: SnFunction) -> SnFunction:
    """``(f * g)(pi) = sum_tau f(pi tau^{-1}) g(tau)`` by direct summation."""
    if f.n != g.n:
        raise ValueError(f"size mismatch: S_{f.n} vs S_{g.n}")
    _transform_guard(f.n)
    Q = _quotient_table(f.n)
    return SnFunction(f.n, f.values[Q] @ g.values)


def sn_convolve_spectral(f: SnFunction, g: SnFunction) -> SnFunction:
    """Convolution through the transforms: ``sqrt(n!) * ghat @ fhat`` per irrep."""
    if f.n != g.n:
        raise ValueError(f"size mismatch: S_{f.n} vs S_{g.n}")
    fh, gh = sn_fourier(f), sn_fourier(g)
    scale = math.sqrt(math.factorial(f.n))
    return sn_inverse_fourier({lam: scale * gh[lam] @ fh[lam] for lam in fh}, f.n)


# -- class functions ---------------------------------------------------------------


def is_class_function(f: SnFunction, atol: float = 1e-12) -> bool:
    classes: dict[Partition, complex] = {}
    for p, v in zip(enumerate_perms(f.n), f.values):
        ct = cycle_type(p)
        if ct in classes:
            if abs(classes[ct] - v) > atol:
                return False
        else:
            classes[ct] = v
    return True


def class_diagonality_check(f: SnFunction) -> float:
    """Largest deviation of any Fourier coefficient from ``(tr/d) * I``."""
    worst = 0.0
    for lam, m in sn_fourier(f).items():
        d = m.shape[0]
        target = np.trace(m) / d * np.eye(d)
        worst = max(worst, float(np.max(np.abs(m - target))))
    return worst


@lru_cache(maxsize=None)
def character_table(n: int) -> tuple[tuple, dict]:
    """Characters of every irrep on every cycle type, via traces of YOR matrices."""
    types = sorted({cycle_type(p) for p in itertools.permutations(range(1, n + 1))}, reverse=True)
    reps = {}
    for ct in types:
        # representative: consecutive cycles 1..a, a+1..a+b, ...
        p = []
        start = 1
        for length in ct:
            block = list(range(start, start + length))
            p.extend(block[1:] + block[:1])
            start += length
        reps[ct] = tuple(p)
    chars = {
        lam: {ct: float(np.trace(young_orthogonal_irrep(lam, reps[ct]))) for ct in types}
        for lam in partitions(n)
    }
    return tuple(types), chars


# -- diffusion / conditioning Markov model --------------------------------------------


def diffusion_kernel(n: int, p: float) -> SnFunction:
    """``q(e) = p``, ``q(tau) = (1 - p) / C(n, 2)`` on transpositions, 0 elsewhere."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    perms = enumerate_perms(n)
    vals = np.zeros(len(perms))
    pairs = math.comb(n, 2)
    for idx, pi in enumerate(perms):
        ct = cycle_type(pi)
        if all(c == 1 for c in ct):
            vals[idx] = p
        elif ct[0] == 2 and all(c == 1 for c in ct[1:]):
            vals[idx] = (1.0 - p) / pairs
    return SnFunction(n, vals)


def diffusion_scalars(n: int, p: float) -> dict[Partition, float]:
    """Per-irrep factor applied to a spectrum by one diffusion step.

    ``(f * q)^ = sqrt(n!) qhat @ fhat`` with ``qhat = (n!)^{-1/2} c I`` and
    ``c = p + (1 - p) chi_lam(tau) / d_lam``.
    """
    if n == 1:
        return {(1,): 1.0}
    _, chars = character_table(n)
    tau_type = (2,) + (1,) * (n - 2)
    return {lam: p + (1.0 - p) * chars[lam][tau_type] / dimension(lam) for lam in partitions(n)}


def condition(prior: SnFunction, likelihood: SnFunction) -> SnFunction:
    """Pointwise Bayesian update, renormalized."""
    if prior.n != likelihood.n:
        raise ValueError("size mismatch")
    if np.any(np.real(likelihood.values) < 0):
        raise ValueError("likelihood must be nonnegative")
    post = prior.values * likelihood.values
    total = float(np.real(post.sum()))
    if total <= 0:
        raise ZeroPosteriorMass("likelihood has no overlap with the prior")
    return SnFunction(prior.n, post / total)


@dataclass(frozen=True)
class Diffuse:
    p: float


@dataclass(frozen=True, eq=False)
class Condition:
    likelihood: SnFunction


Step = Union[Diffuse, Condition]


def markov_model(n: int, steps: Sequence[Step], method: str = "spectral") -> SnFunction:
    """Start at the identity and apply diffusion and conditioning steps in order.

    ``method="spectral"`` keeps the model in Fourier space and scales each
    coefficient by the diffusion scalar; a run of only ``Diffuse`` steps is
    evaluated through characters and works up to n = 8. ``method="direct"``
    convolves in direct space.
    """
    steps = list(steps)
    if method == "direct":
        f = sn_delta(n)
        for st in steps:
            if isinstance(st, Diffuse):
                f = sn_convolve(f, diffusion_kernel(n, st.p))
            else:
                f = condition(f, st.likelihood)
        return f
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    if all(isinstance(st, Diffuse) for st in steps):
        return _diffuse_from_identity(n, [st.p for st in steps])
    f = sn_delta(n)
    spec = None
    for st in steps:
        if isinstance(st, Diffuse):
            if spec is None:
                spec = sn_fourier(f)
            scal = diffusion_scalars(n, st.p)
            spec = {lam: scal[lam] * m for lam, m in spec.items()}
        else:
            if spec is not None:
                f = sn_inverse_fourier(spec, n)
                spec = None
            f = condition(SnFunction(n, np.real(f.values)), st.likelihood)
    if spec is not None:
        f = sn_inverse_fourier(spec, n)
    return SnFunction(n, np.real(f.values))


def _diffuse_from_identity(n: int, ps: Sequence[float]) -> SnFunction:
    """delta_e has ``fhat(lam) = I / sqrt(n!)``, so after diffusion
    ``f(pi) = (1/n!) sum_lam d_lam a_lam chi_lam(pi)`` with ``a_lam`` the product
    of the diffusion scalars."""
    if n > CONFIG.sn_hard_max:
        raise GuardError(f"S_n functions are limited to n <= {CONFIG.sn_hard_max}")
    if n == 1:
        return SnFunction(1, np.ones(1))
    types, chars = character_table(n)
    amp = {lam: 1.0 for lam in partitions(n)}
    for p in ps:
        scal = diffusion_scalars(n, p)
        amp = {lam: amp[lam] * scal[lam] for lam in amp}
    per_type = {
        ct: sum(dimension(lam) * amp[lam] * chars[lam][ct] for lam in amp) / math.factorial(n)
        for ct in types
    }
    return SnFunction(n, np.array([per_type[cycle_type(p)] for p in enumerate_perms(n)]))


# -- patterns and lifting ---------------------------------------------------------------


def _parse_pattern(n: int, pattern) -> list[tuple[frozenset, frozenset]]:
    items = pattern.items() if isinstance(pattern, Mapping) else pattern
    blocks = []
    used_obj: set = set()
    used_pos: set = set()
    for objs, poss in items:
        objs = frozenset(int(o) for o in objs)
        poss = frozenset(int(p) for p in poss)
        if not objs or len(objs) != len(poss):
            raise ValueError("pattern blocks need equal, nonzero sizes")
        if not all(1 <= v <= n for v in objs | poss):
            raise ValueError(f"pattern entries must lie in 1..{n}")
        if objs & used_obj or poss & used_pos:
            raise ValueError("pattern blocks overlap")
        used_obj |= objs
        used_pos |= poss
        blocks.append((objs, poss))
    return blocks


def pattern_indicator(n: int, pattern) -> SnFunction:
    """1 where pi maps each object set onto its position set, else 0."""
    blocks = _parse_pattern(n, pattern)
    vals = [
        float(all({pi[o - 1] for o in objs} == poss for objs, poss in blocks))
        for pi in enumerate_perms(n)
    ]
    return SnFunction(n, np.array(vals))


def marginal_pattern(p: SnFunction, pattern) -> float:
    """Probability that pi maps every object set onto its position set.

    ``pattern`` is a mapping (or list of pairs) ``objects -> positions``.
    """
    ind = pattern_indicator(p.n, pattern)
    return float(np.real(np.dot(p.values, ind.values)))


def lift(f: Sequence[float], base_point: int) -> SnFunction:
    """``f_up(pi) = f(pi(base_point))`` for f given on positions 1..n."""
    f = np.asarray(f)
    n = f.shape[0]
    if n < 2:
        raise ValueError("lifting needs n >= 2")
    if not 1 <= base_point <= n:
        raise ValueError(f"base point {base_point} outside 1..{n}")
    P = _perm_array(n)
    return SnFunction(n, f[P[:, base_point - 1]])


def stabilizer(n: int, point: int) -> list[Permutation]:
    return [p for p in enumerate_perms(n) if p[point - 1] == point]
