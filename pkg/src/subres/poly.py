"""Truncated polynomial maps between graded coordinate spaces.

A :class:`GradedSpace` is R^D split into ordered blocks; the fast flag
``V^k`` is the span of the first k blocks' coordinates.  A
:class:`PolyMap` stores a polynomial map between two such spaces as a
canonical dictionary of monomial coefficients, truncated at a total
degree.  Everything downstream (germs, homological solves, verification)
is built from the handful of exact operations here: evaluation,
truncated composition, formal inversion, differentiation, resonance
classification and splitting, flag tests, and two-sided norm bounds.

Monomial order: graded lexicographic over block-major coordinates
(serialized tag ``grlex-blockmajor-v1``).  All iteration follows that
order, which makes every floating point accumulation order-independent
of scheduling.
"""
from __future__ import annotations

import enum
import math
from collections import namedtuple
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spectral import Spectrum, is_sub_resonant

MONOMIAL_ORDER_TAG = "grlex-blockmajor-v1"


class PolyError(ValueError):
    """Dimension mismatch, singular linear part, or malformed coefficients."""


@dataclass(frozen=True)
class GradedSpace:
    """R^D with an ordered block splitting; block k spans coordinates
    [offset_k, offset_k + dim_k)."""

    block_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.block_dims)
        object.__setattr__(self, "block_dims", dims)
        if len(dims) < 1 or any(d < 1 for d in dims):
            raise PolyError("block dimensions must be positive")

    @property
    def n_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def dim(self) -> int:
        return sum(self.block_dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for d in self.block_dims[:-1]:
            out.append(out[-1] + d)
        return tuple(out)

    def block_of(self, coord: int) -> int:
        """1-based block index of a coordinate."""
        if not 0 <= coord < self.dim:
            raise PolyError(f"coordinate {coord} out of range")
        acc = 0
        for i, d in enumerate(self.block_dims, start=1):
            acc += d
            if coord < acc:
                return i
        raise PolyError("unreachable")

    def block_slice(self, block: int) -> slice:
        """Coordinate slice of a 1-based block."""
        off = self.offsets[block - 1]
        return slice(off, off + self.block_dims[block - 1])

    def type_of(self, alpha: tuple[int, ...]) -> tuple[int, ...]:
        """Block-degree vector of a monomial exponent."""
        if len(alpha) != self.dim:
            raise PolyError("exponent length does not match space dimension")
        s = [0] * self.n_blocks
        c = 0
        for b, d in enumerate(self.block_dims):
            s[b] = sum(alpha[c : c + d])
            c += d
        return tuple(s)

    def flag_level(self, s: tuple[int, ...]) -> int:
        """Largest 1-based block index with s_j > 0 (0 for the zero type)."""
        level = 0
        for j, sj in enumerate(s, start=1):
            if sj > 0:
                level = j
        return level


def _grlex_key(alpha):
    return (sum(alpha), alpha)


class PolyMap:
    """Polynomial map stored as {(target coord, exponent tuple): coefficient}.

    Coefficients are canonical: exponents in fixed coordinate order, exact
    zeros dropped, keys kept in (target, grlex) order.  Instances are
    immutable; operations return new maps.
    """

    __slots__ = ("source", "target", "max_degree", "coeffs", "_pow_cache", "_prod_cache")

    def __init__(self, source: GradedSpace, target: GradedSpace, max_degree: int, coeffs):
        if max_degree < 0:
            raise PolyError("max_degree must be >= 0")
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        clean = {}
        dim = source.dim
        tdim = target.dim
        for key_or_triple in items:
            if isinstance(coeffs, dict):
                (t, alpha), c = key_or_triple
            else:
                t, alpha, c = key_or_triple
            alpha = tuple(int(a) for a in alpha)
            t = int(t)
            c = float(c)
            if not 0 <= t < tdim:
                raise PolyError(f"target index {t} out of range")
            if len(alpha) != dim:
                raise PolyError("exponent length does not match source dimension")
            if any(a < 0 for a in alpha):
                raise PolyError("exponents must be non-negative")
            if sum(alpha) > max_degree:
                raise PolyError(
                    f"term degree {sum(alpha)} exceeds max_degree {max_degree}"
                )
            if not math.isfinite(c):
                raise PolyError("coefficients must be finite")
            if c == 0.0:
                continue
            clean[(t, alpha)] = clean.get((t, alpha), 0.0) + c
        ordered = dict(
            sorted(
                ((k, v) for k, v in clean.items() if v != 0.0),
                key=lambda kv: (kv[0][0], _grlex_key(kv[0][1])),
            )
        )
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "max_degree", int(max_degree))
        object.__setattr__(self, "coeffs", ordered)
        object.__setattr__(self, "_pow_cache", {})
        object.__setattr__(self, "_prod_cache", {})

    def __setattr__(self, *_):
        raise AttributeError("PolyMap is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, source, target, max_degree=1):
        return cls(source, target, max_degree, {})

    @classmethod
    def identity(cls, space, max_degree=1):
        dim = space.dim
        coeffs = {}
        for c in range(dim):
            alpha = tuple(1 if j == c else 0 for j in range(dim))
            coeffs[(c, alpha)] = 1.0
        return cls(space, space, max_degree, coeffs)

    @classmethod
    def from_linear(cls, source, target, matrix, max_degree=1, constant=None):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (target.dim, source.dim):
            raise PolyError(f"matrix shape {m.shape} does not match spaces")
        coeffs = {}
        if constant is not None:
            const = np.asarray(constant, dtype=float)
            zero = (0,) * source.dim
            for t in range(target.dim):
                coeffs[(t, zero)] = float(const[t])
        for t in range(target.dim):
            for c in range(source.dim):
                alpha = tuple(1 if j == c else 0 for j in range(source.dim))
                coeffs[(t, alpha)] = float(m[t, c])
        return cls(source, target, max_degree, coeffs)

    # -- views -------------------------------------------------------------

    def terms(self):
        """Iterate (target index, exponents, coefficient) in canonical order."""
        for (t, alpha), c in self.coeffs.items():
            yield t, alpha, c

    def is_zero(self) -> bool:
        return not self.coeffs

    def degrees(self):
        return sorted({sum(alpha) for (_, alpha) in self.coeffs})

    def has_constant_term(self) -> bool:
        return any(sum(alpha) == 0 for (_, alpha) in self.coeffs)

    def constant_vector(self) -> np.ndarray:
        out = np.zeros(self.target.dim)
        zero = (0,) * self.source.dim
        for t in range(self.target.dim):
            out[t] = self.coeffs.get((t, zero), 0.0)
        return out

    def linear_matrix(self) -> np.ndarray:
        out = np.zeros((self.target.dim, self.source.dim))
        for (t, alpha), c in self.coeffs.items():
            if sum(alpha) == 1:
                out[t, alpha.index(1)] = c
        return out

    def homogeneous_part(self, n: int) -> "PolyMap":
        coeffs = {k: v for k, v in self.coeffs.items() if sum(k[1]) == n}
        return PolyMap(self.source, self.target, max(n, 0), coeffs)

    def truncate(self, cap: int) -> "PolyMap":
        coeffs = {k: v for k, v in self.coeffs.items() if sum(k[1]) <= cap}
        return PolyMap(self.source, self.target, cap, coeffs)

    def with_max_degree(self, cap: int) -> "PolyMap":
        if cap < max((sum(a) for (_, a) in self.coeffs), default=0):
            raise PolyError("cap below an existing term degree")
        return PolyMap(self.source, self.target, cap, dict(self.coeffs))

    def drop_constant(self) -> "PolyMap":
        coeffs = {k: v for k, v in self.coeffs.items() if sum(k[1]) > 0}
        return PolyMap(self.source, self.target, self.max_degree, coeffs)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "PolyMap") -> "PolyMap":
        if other.source != self.source or other.target != self.target:
            raise PolyError("cannot add maps between different spaces")
        coeffs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs.get(k, 0.0) + v
        return PolyMap(
            self.source, self.target, max(self.max_degree, other.max_degree), coeffs
        )

    def __sub__(self, other: "PolyMap") -> "PolyMap":
        return self + other.scale(-1.0)

    def scale(self, factor: float) -> "PolyMap":
        coeffs = {k: factor * v for k, v in self.coeffs.items()}
        return PolyMap(self.source, self.target, self.max_degree, coeffs)

    def evaluate(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.source.dim,):
            raise PolyError(
                f"vector shape {v.shape} does not match source dimension {self.source.dim}"
            )
        out = np.zeros(self.target.dim)
        for (t, alpha), c in self.coeffs.items():
            term = c
            for coord, e in enumerate(alpha):
                if e:
                    term *= v[coord] ** e
            out[t] += term
        return out

    def max_abs_coeff(self, min_degree=0, max_degree=None) -> float:
        hi = self.max_degree if max_degree is None else max_degree
        vals = [
            abs(c)
            for (_, alpha), c in self.coeffs.items()
            if min_degree <= sum(alpha) <= hi
        ]
        return max(vals, default=0.0)

    # -- internal scalar-poly caches for composition ------------------------

    def _component(self, t: int) -> dict:
        comp = {}
        for (tt, alpha), c in self.coeffs.items():
            if tt == t:
                comp[alpha] = c
        return comp

    def _power(self, coord: int, e: int, cap: int) -> dict:
        key = (coord, e, cap)
        hit = self._pow_cache.get(key)
        if hit is not None:
            return hit
        if e == 1:
            out = {a: c for a, c in self._component(coord).items() if sum(a) <= cap}
        else:
            half = self._power(coord, e // 2, cap)
            out = _poly_mul(half, half, cap)
            if e % 2:
                out = _poly_mul(out, self._power(coord, 1, cap), cap)
        self._pow_cache[key] = out
        return out

    def _monomial_sub(self, alpha: tuple, cap: int) -> dict:
        """Scalar polynomial of (self substituted into the monomial x^alpha)."""
        key = (alpha, cap)
        hit = self._prod_cache.get(key)
        if hit is not None:
            return hit
        out = None
        for coord, e in enumerate(alpha):
            if not e:
                continue
            p = self._power(coord, e, cap)
            out = p if out is None else _poly_mul(out, p, cap)
            if not out:
                break
        if out is None:  # constant monomial
            out = {(0,) * self.source.dim: 1.0}
        self._prod_cache[key] = out
        return out

    def __repr__(self):
        return (
            f"PolyMap({self.source.block_dims}->{self.target.block_dims}, "
            f"deg<={self.max_degree}, {len(self.coeffs)} terms)"
        )


def _poly_mul(a: dict, b: dict, cap: int) -> dict:
    out = {}
    bitems = [(kb, sum(kb), vb) for kb, vb in b.items()]
    for ka, va in a.items():
        da = sum(ka)
        for kb, db, vb in bitems:
            if da + db > cap:
                continue
            k = tuple(x + y for x, y in zip(ka, kb))
            out[k] = out.get(k, 0.0) + va * vb
    return out


def compose_truncated(outer: PolyMap, inner: PolyMap, cap: int) -> PolyMap:
    """Coefficients of outer(inner(t)) exactly up to total degree cap.

    inner may carry a constant term; all contributions of total degree
    <= cap in t are kept, higher ones discarded.
    """
    if inner.target != outer.source:
        raise PolyError("inner target must equal outer source")
    if cap < 0:
        raise PolyError("cap must be >= 0")
    acc = {}
    for t, alpha, c in outer.terms():
        sub = inner._monomial_sub(alpha, cap)
        for a, v in sub.items():
            key = (t, a)
            acc[key] = acc.get(key, 0.0) + c * v
    return PolyMap(inner.source, outer.target, cap, acc)


def _is_flag_triangular(space: GradedSpace, matrix: np.ndarray) -> bool:
    for t in range(space.dim):
        for c in range(space.dim):
            if space.block_of(t) > space.block_of(c) and matrix[t, c] != 0.0:
                return False
    return True


def invert_flag_linear(space: GradedSpace, matrix: np.ndarray) -> np.ndarray:
    """Inverse of a flag-preserving linear map by block back-substitution.

    Keeps the structurally zero blocks exactly zero, which downstream
    resonance projections rely on.
    """
    l = space.n_blocks
    inv = np.zeros_like(matrix, dtype=float)
    diag_inv = []
    for b in range(1, l + 1):
        sl = space.block_slice(b)
        diag_inv.append(np.linalg.inv(matrix[sl, sl]))
    for b in range(1, l + 1):
        sl = space.block_slice(b)
        inv[sl, sl] = diag_inv[b - 1]
    # entries above the block diagonal, outermost band first
    for span in range(1, l):
        for b in range(1, l - span + 1):
            rows = space.block_slice(b)
            cols = space.block_slice(b + span)
            acc = np.zeros((space.block_dims[b - 1], space.block_dims[b + span - 1]))
            for mid in range(b + 1, b + span + 1):
                msl = space.block_slice(mid)
                acc += matrix[rows, msl] @ inv[msl, cols]
            inv[rows, cols] = -diag_inv[b - 1] @ acc
    return inv


def invert_formal(p: PolyMap, cap: int) -> PolyMap:
    """Formal inverse jet q with p(q(t)) = q(p(t)) = t up to degree cap.

    Requires p(0) = 0 and an invertible linear part.  The linear part of
    a flag-preserving map is inverted block-structurally so its zero
    blocks stay exactly zero.
    """
    if p.source.dim != p.target.dim:
        raise PolyError("formal inversion needs equal source and target dimensions")
    if p.has_constant_term():
        raise PolyError("formal inversion requires p(0) = 0")
    a = p.linear_matrix()
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(a)
    if not math.isfinite(cond) or cond > 1e14:
        raise PolyError(f"singular linear part (condition number {cond:.3e})")
    if p.source.block_dims == p.target.block_dims and _is_flag_triangular(p.source, a):
        a_inv = invert_flag_linear(p.source, a)
    else:
        a_inv = np.linalg.inv(a)
    q = PolyMap.from_linear(p.target, p.source, a_inv, max_degree=cap)
    ident = PolyMap.identity(p.source, max_degree=cap)
    a_inv_map = PolyMap.from_linear(p.target, p.source, a_inv, max_degree=1)
    for n in range(2, cap + 1):
        defect = (compose_truncated(q, p, n) - ident).homogeneous_part(n)
        if defect.is_zero():
            continue
        correction = compose_truncated(defect, a_inv_map, n)
        q = q - correction.with_max_degree(cap)
    return q.with_max_degree(cap)


def derivative_at(p: PolyMap, v) -> PolyMap:
    """Jacobian of p at v, returned as a degree-1 map (no constant term)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (p.source.dim,):
        raise PolyError("vector does not match source dimension")
    jac = np.zeros((p.target.dim, p.source.dim))
    for (t, alpha), c in p.coeffs.items():
        for coord, e in enumerate(alpha):
            if not e:
                continue
            term = c * e
            for cc, ee in enumerate(alpha):
                power = ee - 1 if cc == coord else ee
                if power:
                    term *= v[cc] ** power
            jac[t, coord] += term
    return PolyMap.from_linear(p.source, p.target, jac)


class TermClass(enum.Enum):
    SUB_RESONANT = "sub_resonant"
    NON_RESONANT = "non_resonant"


@lru_cache(maxsize=65536)
def _classify_cached(spec: Spectrum, target_block: int, s: tuple) -> TermClass:
    if is_sub_resonant(spec, target_block, s):
        return TermClass.SUB_RESONANT
    return TermClass.NON_RESONANT


def classify_term(spec: Spectrum, target_block: int, s: tuple[int, ...]) -> TermClass:
    """Resonance class of a term of homogeneity type s into 1-based block i.

    Constant terms (s = 0) classify sub-resonant by convention; callers
    that care about constants handle them separately.
    """
    if sum(s) == 0:
        return TermClass.SUB_RESONANT
    return _classify_cached(spec, target_block, tuple(int(x) for x in s))


def subres_split(p: PolyMap, spec: Spectrum) -> tuple[PolyMap, PolyMap]:
    """Coefficientwise split p = s_part + n_part along the resonance classes."""
    s_coeffs = {}
    n_coeffs = {}
    for (t, alpha), c in p.coeffs.items():
        block = p.target.block_of(t)
        s = p.source.type_of(alpha)
        if classify_term(spec, block, s) is TermClass.SUB_RESONANT:
            s_coeffs[(t, alpha)] = c
        else:
            n_coeffs[(t, alpha)] = c
    s_part = PolyMap(p.source, p.target, p.max_degree, s_coeffs)
    n_part = PolyMap(p.source, p.target, p.max_degree, n_coeffs)
    return s_part, n_part


def flag_violation(p: PolyMap) -> float:
    """Largest |coefficient| breaking fast-flag preservation.

    A term of type s into 1-based block m respects the flag iff
    m <= max{j : s_j > 0}.  Constant terms always violate; strip them
    first when they are meaningful (transition maps).
    """
    if p.source.n_blocks != p.target.n_blocks:
        raise PolyError("flag test needs equal block counts")
    worst = 0.0
    for (t, alpha), c in p.coeffs.items():
        s = p.source.type_of(alpha)
        level = p.source.flag_level(s)
        m = p.target.block_of(t)
        if level == 0 or m > level:
            worst = max(worst, abs(c))
    return worst


def preserves_flag(p: PolyMap) -> bool:
    """True iff p maps every flag subspace V^k into V^k (symbolically)."""
    return flag_violation(p) == 0.0


NormInterval = namedtuple("NormInterval", "lower upper")


def _halton(index: int, base: int) -> float:
    f = 1.0
    r = 0.0
    i = index
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


@lru_cache(maxsize=64)
def sphere_points(dim: int, n_face: int = 8) -> tuple:
    """Deterministic sample of the max-norm unit sphere in R^dim.

    Corners of the cube plus low-discrepancy points on each face.
    """
    pts = []
    if dim == 1:
        return ((1.0,), (-1.0,))
    if dim <= 6:
        import itertools

        for corner in itertools.product((-1.0, 1.0), repeat=dim):
            pts.append(corner)
    for coord in range(dim):
        for sign in (1.0, -1.0):
            for k in range(n_face):
                v = [0.0] * dim
                j = 0
                for other in range(dim):
                    if other == coord:
                        continue
                    v[other] = 2.0 * _halton(k + 1, _PRIMES[j % len(_PRIMES)]) - 1.0
                    j += 1
                v[coord] = sign
                pts.append(tuple(v))
    return tuple(pts)


def poly_norm(p: PolyMap) -> NormInterval:
    """Two-sided bracket of sup{ |p(v)|_inf : |v|_inf = 1 }.

    upper: per-component sum of absolute coefficients, maximized over
    components (sound for any degree).  lower: maximum over a
    deterministic sphere sample.  Contraction certificates must use the
    sound side only (upper for the object being bounded).
    """
    if not p.coeffs:
        return NormInterval(0.0, 0.0)
    sums = {}
    for (t, _), c in p.coeffs.items():
        sums[t] = sums.get(t, 0.0) + abs(c)
    upper = max(sums.values())
    lower = 0.0
    for v in sphere_points(p.source.dim):
        val = float(np.max(np.abs(p.evaluate(np.asarray(v)))))
        lower = max(lower, val)
    return NormInterval(lower, upper)


def recenter(p: PolyMap, v, cap: int | None = None) -> PolyMap:
    """Expansion of t -> p(v + t) - p(v); the constant term is dropped
    structurally so the result fixes 0 exactly."""
    v = np.asarray(v, dtype=float)
    dim = p.source.dim
    if v.shape != (dim,):
        raise PolyError("center does not match source dimension")
    cap = p.max_degree if cap is None else cap
    shift = PolyMap.from_linear(
        p.source, p.source, np.eye(dim), max_degree=cap, constant=v
    )
    moved = compose_truncated(p, shift, cap)
    return moved.drop_constant()


def max_coeff_delta(p: PolyMap, q: PolyMap, min_degree=0, max_degree=None) -> float:
    """Largest coefficientwise difference over the given degree window."""
    hi = max(p.max_degree, q.max_degree) if max_degree is None else max_degree
    keys = set(p.coeffs) | set(q.coeffs)
    worst = 0.0
    for k in keys:
        deg = sum(k[1])
        if not min_degree <= deg <= hi:
            continue
        worst = max(worst, abs(p.coeffs.get(k, 0.0) - q.coeffs.get(k, 0.0)))
    return worst


@lru_cache(maxsize=4096)
def monomials_of_degree(dim: int, n: int) -> tuple:
    """All exponent tuples of total degree n, ascending tuple order."""
    if dim == 1:
        return ((n,),)
    out = []
    for first in range(n + 1):
        for rest in monomials_of_degree(dim - 1, n - first):
            out.append((first,) + rest)
    out.sort()
    return tuple(out)


@lru_cache(maxsize=4096)
def degree_slots(spec: Spectrum, source_dims: tuple, target_dims: tuple, n: int):
    """Ordered (sub_resonant, non_resonant) slot lists at homogeneous degree n.

    A slot is (target coordinate, exponent tuple).
    """
    source = GradedSpace(source_dims)
    target = GradedSpace(target_dims)
    subs = []
    nons = []
    for t in range(target.dim):
        block = target.block_of(t)
        for alpha in monomials_of_degree(source.dim, n):
            s = source.type_of(alpha)
            if classify_term(spec, block, s) is TermClass.SUB_RESONANT:
                subs.append((t, alpha))
            else:
                nons.append((t, alpha))
    subs.sort(key=lambda k: (k[0], _grlex_key(k[1])))
    nons.sort(key=lambda k: (k[0], _grlex_key(k[1])))
    return tuple(subs), tuple(nons)
