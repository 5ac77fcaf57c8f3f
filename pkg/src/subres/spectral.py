"""Band spectra, sub-resonance relations, and derived contraction constants.

A spectrum here is a finite ordered family of contraction bands
``(lambda_i, mu_i)`` on a log scale, all negative.  The narrow band
condition ``mu_i + mu_l < lambda_i`` guarantees that only finitely many
integer relations ``lambda_i <= sum_j s_j * mu_j`` can hold; those
relations select the polynomial terms that cannot be eliminated from a
normal form, and they drive every constant used by the solver: the degree
bound ``d``, the slack budget ``epsilon``, and the contraction margin
``k'`` of the high-degree stage.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

# Relative tolerance for resonance comparisons.  Ties resolve toward
# sub-resonant: keeping a term is always safe, dropping one is not.
REL_TOL = 1e-12


class SpectrumError(ValueError):
    """Malformed spectrum data or inconsistent relation arguments."""


class NarrowBandError(SpectrumError):
    """An operation required the narrow band condition and it failed."""


def _leq_tol(a: float, b: float) -> bool:
    """a <= b up to REL_TOL, ties counting as true."""
    return a <= b + REL_TOL * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class Spectrum:
    """Ordered contraction bands ``(lambda_i, mu_i)``, log scale, negative.

    Invariants (checked at construction):
    lambda_1 <= mu_1 < lambda_2 <= mu_2 < ... < lambda_l <= mu_l < 0,
    all entries finite.
    """

    bands: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bands = tuple((float(a), float(b)) for a, b in self.bands)
        object.__setattr__(self, "bands", bands)
        if len(bands) < 1:
            raise SpectrumError("spectrum needs at least one band")
        for lam, mu in bands:
            if not (math.isfinite(lam) and math.isfinite(mu)):
                raise SpectrumError("spectrum entries must be finite")
        if bands[-1][1] >= 0.0:
            raise SpectrumError("spectrum must be negative (mu_l < 0)")
        prev_mu = None
        for i, (lam, mu) in enumerate(bands, start=1):
            if lam > mu:
                raise SpectrumError(
                    f"band {i}: lambda_{i}={lam!r} exceeds mu_{i}={mu!r}"
                )
            if prev_mu is not None and prev_mu >= lam:
                raise SpectrumError(
                    f"band {i}: mu_{i - 1}={prev_mu!r} must be < lambda_{i}={lam!r}"
                )
            prev_mu = mu

    @property
    def l(self) -> int:
        return len(self.bands)

    @property
    def lambdas(self) -> tuple[float, ...]:
        return tuple(b[0] for b in self.bands)

    @property
    def mus(self) -> tuple[float, ...]:
        return tuple(b[1] for b in self.bands)

    @property
    def lambda_1(self) -> float:
        return self.bands[0][0]

    @property
    def mu_l(self) -> float:
        return self.bands[-1][1]

    def __str__(self):
        inner = ", ".join(f"[{lam!r}, {mu!r}]" for lam, mu in self.bands)
        return f"Spectrum({inner})"


@dataclass(frozen=True)
class SubResonanceRelation:
    """A relation ``lambda_i <= sum_j s_j mu_j`` identified by (i, s).

    ``target_block`` is 1-based.  The degree is ``sum(s)``.
    """

    target_block: int
    type_vector: tuple[int, ...]

    def __post_init__(self):
        tv = tuple(int(s) for s in self.type_vector)
        object.__setattr__(self, "type_vector", tv)
        if any(s < 0 for s in tv):
            raise SpectrumError("type vector entries must be non-negative")
        if not 1 <= self.target_block <= len(tv):
            raise SpectrumError("target block out of range")

    @property
    def degree(self) -> int:
        return sum(self.type_vector)

    def __str__(self):
        s = ",".join(str(x) for x in self.type_vector)
        return f"({self.target_block};({s}))"


@dataclass(frozen=True)
class EpsilonBudget:
    """A slack value valid for all homogeneity degrees up to ``max_degree``.

    The defining property (checked by :func:`validate_epsilon`): for every
    non-sub-resonant pair (i, s) with 2 <= sum(s) <= max_degree,
    lambda_i > sum_j s_j mu_j + (sum(s) + 2) * epsilon, strictly.
    """

    epsilon: float
    max_degree: int

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise SpectrumError("epsilon must be positive and finite")
        if self.max_degree < 2:
            raise SpectrumError("epsilon budget needs max_degree >= 2")


def is_narrow_band(spec: Spectrum) -> bool:
    """True iff mu_i + mu_l < lambda_i for every band i."""
    mu_l = spec.mu_l
    return all(mu + mu_l < lam for lam, mu in spec.bands)


def require_narrow_band(spec: Spectrum) -> None:
    mu_l = spec.mu_l
    for i, (lam, mu) in enumerate(spec.bands, start=1):
        if not mu + mu_l < lam:
            raise NarrowBandError(
                f"narrow band violated at band {i}: "
                f"mu_{i} + mu_l = {mu + mu_l!r} is not < lambda_{i} = {lam!r}"
            )


def degree_bound(spec: Spectrum) -> int:
    """Largest possible degree of a sub-resonance relation, floor(lambda_1/mu_l).

    The ratio is positive (both entries negative).  A ratio within 1e-12 of
    an integer rounds to that integer before the floor.
    """
    require_narrow_band(spec)
    ratio = spec.lambda_1 / spec.mu_l
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-12 * max(1.0, abs(ratio)):
        return int(nearest)
    return math.floor(ratio)


def type_weight(spec: Spectrum, s: tuple[int, ...]) -> float:
    """sum_j s_j mu_j for a homogeneity type s."""
    if len(s) != spec.l:
        raise SpectrumError("type vector length does not match spectrum")
    return sum(sj * mu for sj, mu in zip(s, spec.mus))


def is_sub_resonant(spec: Spectrum, target_block: int, s: tuple[int, ...]) -> bool:
    """Whether lambda_i <= sum_j s_j mu_j holds (tolerance: ties sub-resonant)."""
    if not 1 <= target_block <= spec.l:
        raise SpectrumError("target block out of range")
    return _leq_tol(spec.lambdas[target_block - 1], type_weight(spec, s))


def _type_vectors(l: int, max_total: int, min_total: int = 0):
    """All s in N^l with min_total <= sum(s) <= max_total, ascending tuple order."""
    for s in itertools.product(range(max_total + 1), repeat=l):
        if min_total <= sum(s) <= max_total:
            yield s


def enumerate_relations(spec: Spectrum) -> list[SubResonanceRelation]:
    """Exhaustive list of sub-resonance relations, ordered by (i, s).

    The search box is finite: sum(s) <= floor(lambda_1/mu_l) and s_j = 0
    for j < i (both forced by the inequality itself, the second because
    mu_j < lambda_i for j < i).
    """
    require_narrow_band(spec)
    d = degree_bound(spec)
    out = []
    for i in range(1, spec.l + 1):
        tail_len = spec.l - (i - 1)
        for tail in _type_vectors(tail_len, d, min_total=1):
            s = (0,) * (i - 1) + tail
            if is_sub_resonant(spec, i, s):
                out.append(SubResonanceRelation(i, s))
    out.sort(key=lambda r: (r.target_block, r.type_vector))
    return out


def is_subordinate(r1: SubResonanceRelation, r2: SubResonanceRelation) -> bool:
    """Partial order on equal-degree relations.

    (m; s') is subordinate to (i; s) iff m <= i and every prefix sum of s'
    is <= the matching prefix sum of s.
    """
    if len(r1.type_vector) != len(r2.type_vector):
        raise SpectrumError("subordination compares relations of equal length")
    if r1.degree != r2.degree:
        raise SpectrumError(
            f"subordination needs equal degrees, got {r1.degree} and {r2.degree}"
        )
    if r1.target_block > r2.target_block:
        return False
    acc1 = 0
    acc2 = 0
    for a, b in zip(r1.type_vector, r2.type_vector):
        acc1 += a
        acc2 += b
        if acc1 > acc2:
            return False
    return True


def choose_epsilon(spec: Spectrum, max_degree: int) -> EpsilonBudget:
    """Pick the largest convenient slack for all degrees 2..max_degree.

    epsilon = min over non-sub-resonant (i, s), 2 <= sum(s) = n <= max_degree,
    of (lambda_i - sum_j s_j mu_j) / (n + 3), additionally capped at
    (lambda_{i+1} - mu_i) / 4 over the band gaps.  The divisor n + 3 leaves
    the strict margin (n + 2) * eps < gap needed by the twist contraction
    while keeping epsilon as large as possible.
    """
    require_narrow_band(spec)
    if max_degree < 2:
        raise SpectrumError("choose_epsilon needs max_degree >= 2")
    candidates = []
    for i in range(1, spec.l + 1):
        lam = spec.lambdas[i - 1]
        for s in _type_vectors(spec.l, max_degree, min_total=2):
            if is_sub_resonant(spec, i, s):
                continue
            n = sum(s)
            gap = lam - type_weight(spec, s)
            candidates.append(gap / (n + 3))
    for i in range(spec.l - 1):
        candidates.append((spec.lambdas[i + 1] - spec.mus[i]) / 4.0)
    if not candidates:
        raise SpectrumError("cannot select epsilon: no constraints available")
    eps = min(candidates)
    budget = EpsilonBudget(eps, max_degree)
    validate_epsilon(spec, budget)
    return budget


def validate_epsilon(spec: Spectrum, budget: EpsilonBudget) -> None:
    """Check the budget invariant strictly, for all degrees 2..max_degree."""
    eps = budget.epsilon
    for i in range(1, spec.l + 1):
        lam = spec.lambdas[i - 1]
        for s in _type_vectors(spec.l, budget.max_degree, min_total=2):
            if is_sub_resonant(spec, i, s):
                continue
            n = sum(s)
            if not lam > type_weight(spec, s) + (n + 2) * eps:
                raise SpectrumError(
                    f"epsilon budget violated at (i={i}, s={s}): "
                    f"lambda_i={lam!r} vs bound {type_weight(spec, s) + (n + 2) * eps!r}"
                )


def contraction_margin(spec: Spectrum, N: int, eps) -> float:
    """k' = exp((N mu_l - lambda_1) + (N + 1) eps) for the degree-N stage.

    Requires N > degree_bound(spec), which makes N mu_l < lambda_1 and k'
    genuinely a contraction factor for small eps.  ``eps`` may be an
    EpsilonBudget or a bare float.
    """
    d = degree_bound(spec)
    if N <= d:
        raise SpectrumError(
            f"N must exceed sub-resonance degree bound (N={N}, d={d})"
        )
    e = eps.epsilon if isinstance(eps, EpsilonBudget) else float(eps)
    if not (math.isfinite(e) and e >= 0.0):
        raise SpectrumError("eps must be finite and non-negative")
    return math.exp((N * spec.mu_l - spec.lambda_1) + (N + 1) * e)
