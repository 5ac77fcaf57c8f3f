"""Degree-by-degree construction of non-stationary polynomial normal forms.

For each homogeneity degree n = 2..N the conjugacy equation reduces to a
twisted affine fixed-point problem on the non-resonant coefficient slots:

    Hbar_k = twist_k(Hbar_{k+1}) + Qbar_k,   twist_k(R) = A_k^{-1} o R o A_k

projected to the non-resonant complement, where A_k is the germ's linear
part and Qbar_k collects the already-constructed lower-degree data.  The
twist contracts by at least exp(-eps) on those slots, so the problem has
a unique bounded solution: a backward sweep with a certified geometric
tail bound (series mode), or an exact linear solve around the cycle
(periodic mode).  The coordinate-change jet H_k keeps zero coefficients
on every sub-resonant slot; that normalization makes the atlas canonical
in fixed coordinates.  The polynomial dynamics P_k is then read off
degree by degree and is sub-resonant by construction.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .poly import (
    GradedSpace,
    PolyMap,
    compose_truncated,
    degree_slots,
    invert_flag_linear,
    max_coeff_delta,
    poly_norm,
    subres_split,
)
from .spectral import EpsilonBudget, Spectrum, choose_epsilon, degree_bound
from .systems import GermOrbit

TAIL_TARGET = 1e-12


class EngineError(RuntimeError):
    """Solver preconditions violated or a post-hoc invariant failed."""


@dataclass(frozen=True)
class DegreeDiagnostics:
    degree: int
    sup_q_upper: float
    tail_depth: int
    dropped_non_resonant: float
    contraction_rate: float = 0.0


@dataclass(frozen=True)
class NormalFormAtlas:
    """Per-point coordinate changes H_k and polynomial dynamics P_k.

    H_k has identity linear part and terms only on non-resonant slots in
    degrees 2..N.  P_k has degree <= d, linear part equal to the germ's,
    and every stored term sub-resonant.  ``tail_bounds[k]`` bounds the
    coefficient error of H_k accumulated over all solved degrees (zero in
    periodic mode).
    """

    spec: Spectrum
    space: GradedSpace
    N: int
    d: int
    eps: EpsilonBudget
    policy: str
    K: int
    seed: int
    period: int | None
    H: tuple
    P: tuple
    tail_bounds: tuple
    orbit_hash: str | None = None
    per_degree: tuple = field(default=(), compare=False)

    @property
    def n_points(self) -> int:
        return len(self.H)

    @property
    def n_steps(self) -> int:
        return len(self.P)

    def H_at(self, k: int) -> PolyMap:
        if self.period is not None:
            return self.H[k % self.period]
        return self.H[k]

    def P_at(self, k: int) -> PolyMap:
        if self.period is not None:
            return self.P[k % self.period]
        return self.P[k]

    def tail_bound(self, k: int) -> float:
        if self.period is not None:
            return self.tail_bounds[k % self.period]
        return self.tail_bounds[k]


@dataclass(frozen=True)
class HomologicalProblem:
    """Degree-n data of the twisted fixed-point equation along an orbit."""

    spec: Spectrum
    space: GradedSpace
    degree: int
    eps: EpsilonBudget
    a_maps: tuple
    a_inv_maps: tuple
    q: tuple
    q_bar: tuple
    period: int | None

    @property
    def n_steps(self) -> int:
        return len(self.q)

    def a_map(self, k: int) -> PolyMap:
        return self.a_maps[k % len(self.a_maps)] if self.period else self.a_maps[k]

    def a_inv_map(self, k: int) -> PolyMap:
        return (
            self.a_inv_maps[k % len(self.a_inv_maps)]
            if self.period
            else self.a_inv_maps[k]
        )

    def q_bar_at(self, k: int) -> PolyMap:
        return self.q_bar[k % len(self.q_bar)] if self.period else self.q_bar[k]

    @property
    def sup_q_upper(self) -> float:
        return max((poly_norm(q).upper for q in self.q_bar), default=0.0)


def initial_jets(orbit: GermOrbit, N: int):
    """Base of the induction: H = identity jets, P = germ linear parts."""
    d = degree_bound(orbit.spec)
    steps = orbit.period if orbit.is_periodic else orbit.n_steps
    points = steps if orbit.is_periodic else steps + 1
    H = [PolyMap.identity(orbit.space, max_degree=N) for _ in range(points)]
    P = [
        PolyMap.from_linear(
            orbit.space,
            orbit.space,
            orbit.germ(k).linear_matrix(),
            max_degree=min(max(d, 1), N),
        )
        for k in range(steps)
    ]
    return H, P


def _linear_maps(orbit: GermOrbit, steps: int):
    a_maps = []
    a_inv_maps = []
    for k in range(steps):
        a = orbit.germ(k).linear_matrix()
        a_maps.append(PolyMap.from_linear(orbit.space, orbit.space, a))
        a_inv = invert_flag_linear(orbit.space, a)
        a_inv_maps.append(PolyMap.from_linear(orbit.space, orbit.space, a_inv))
    return tuple(a_maps), tuple(a_inv_maps)


def twist_non_resonant(problem: HomologicalProblem, k: int, r: PolyMap) -> PolyMap:
    """Non-resonant projection of A_k^{-1} o r o A_k at the problem degree."""
    n = problem.degree
    comp = compose_truncated(
        problem.a_inv_map(k), compose_truncated(r, problem.a_map(k), n), n
    )
    return subres_split(comp, problem.spec)[1]


def assemble_Q(orbit: GermOrbit, H: list, P: list, n: int, eps=None) -> HomologicalProblem:
    """Degree-n load of the conjugacy equation from lower-degree data.

    Q_k is the degree-n homogeneous part of
    A_k^{-1} o (H_{k+1} o F_k - P_k o H_k), with H and P carrying every
    term of degree < n and F all terms up to n.  This is equivalent,
    degree by degree, to the partition-sum form of the expansion and
    avoids its index bookkeeping.
    """
    steps = orbit.period if orbit.is_periodic else orbit.n_steps
    if not orbit.is_periodic and len(H) < steps + 1:
        raise EngineError("missing lower-degree data: need H at every point")
    a_maps, a_inv_maps = _linear_maps(orbit, steps)
    budget = eps or orbit.eps
    q = []
    q_bar = []
    for k in range(steps):
        h_next = H[(k + 1) % len(H)] if orbit.is_periodic else H[k + 1]
        lhs = compose_truncated(h_next, orbit.germ(k), n)
        rhs = compose_truncated(P[k], H[k], n)
        diff = (lhs - rhs).homogeneous_part(n)
        qk = compose_truncated(a_inv_maps[k], diff, n)
        q.append(qk)
        q_bar.append(subres_split(qk, orbit.spec)[1])
    return HomologicalProblem(
        spec=orbit.spec,
        space=orbit.space,
        degree=n,
        eps=budget,
        a_maps=a_maps,
        a_inv_maps=a_inv_maps,
        q=tuple(q),
        q_bar=tuple(q_bar),
        period=orbit.period,
    )


def default_tail_depth(eps: float, sup_q: float, cap: int | None = None) -> int:
    """Smallest K with exp(-eps K) <= TAIL_TARGET (1 - e^-eps) / sup|Qbar|."""
    if sup_q == 0.0:
        return 1
    target = TAIL_TARGET * (1.0 - math.exp(-eps)) / sup_q
    k = max(1, math.ceil(-math.log(target) / eps))
    if cap is not None:
        k = min(k, cap)
    return k


def solve_series(problem: HomologicalProblem, K: int, cover_end: int | None = None):
    """Backward sweep for the non-resonant jets, zero-seeded at depth K.

    Returns (hbar, bounds): hbar[k] for k = 0..cover_end, each carrying
    at least K forward steps of data, and the certified per-point tail
    bound exp(-eps * depth_k) * sup|Qbar| / (1 - exp(-eps)).
    """
    if K < 1:
        raise EngineError("tail depth must be >= 1")
    steps = problem.n_steps
    if cover_end is None:
        cover_end = 0 if problem.period is None else problem.period - 1
    sweep_start = cover_end + K
    if problem.period is None and sweep_start > steps:
        raise EngineError(
            f"orbit too short: tail depth {K} past point {cover_end} needs "
            f"{sweep_start} steps, orbit has {steps}"
        )
    n = problem.degree
    zero = PolyMap.zero(problem.space, problem.space, n)
    hbar_next = zero
    hbar = [None] * (cover_end + 1)
    for k in range(sweep_start - 1, -1, -1):
        val = twist_non_resonant(problem, k, hbar_next) + problem.q_bar_at(k)
        if k <= cover_end:
            hbar[k] = val
        hbar_next = val
    sup_q = problem.sup_q_upper
    e = problem.eps.epsilon
    geom = sup_q / (1.0 - math.exp(-e))
    bounds = [math.exp(-e * (sweep_start - k)) * geom for k in range(cover_end + 1)]
    return hbar, bounds


def _slot_basis(problem: HomologicalProblem):
    dims = problem.space.block_dims
    _, nonres = degree_slots(problem.spec, dims, dims, problem.degree)
    return nonres


def _to_vec(p: PolyMap, slots) -> np.ndarray:
    return np.array([p.coeffs.get(slot, 0.0) for slot in slots])


def _from_vec(space, slots, vec, n) -> PolyMap:
    coeffs = {slot: float(v) for slot, v in zip(slots, vec)}
    return PolyMap(space, space, n, coeffs)


def twist_matrix(problem: HomologicalProblem, k: int) -> np.ndarray:
    """Matrix of the projected twist on the non-resonant slot basis."""
    slots = _slot_basis(problem)
    n = problem.degree
    cols = []
    for slot in slots:
        basis = PolyMap(problem.space, problem.space, n, {slot: 1.0})
        cols.append(_to_vec(twist_non_resonant(problem, k, basis), slots))
    return np.array(cols).T if cols else np.zeros((0, 0))


def solve_periodic(problem: HomologicalProblem):
    """Exact solve of the cycle equation (I - twist_cycle) Hbar_0 = load.

    Requires a periodic problem; propagates around the cycle and checks
    the fixed-point residual at every point to 1e-12 relative.
    """
    if problem.period is None:
        raise EngineError("periodic solver needs a periodic orbit")
    p = problem.period
    slots = _slot_basis(problem)
    n = problem.degree
    zero = PolyMap.zero(problem.space, problem.space, n)
    if not slots:
        return [zero] * p, [0.0] * p
    mats = [twist_matrix(problem, k) for k in range(p)]
    qvecs = [_to_vec(problem.q_bar[k], slots) for k in range(p)]
    dim = len(slots)
    cycle = np.eye(dim)
    load = np.zeros(dim)
    for m in range(p):
        load += cycle @ qvecs[m]
        cycle = cycle @ mats[m]
    lhs = np.eye(dim) - cycle
    cond = np.linalg.cond(lhs)
    if not math.isfinite(cond) or cond > 1e12:
        raise EngineError(
            "(I - twist_cycle) numerically singular "
            f"(condition number {cond:.3e}); spectrum and epsilon budget are "
            "inconsistent with the germ data"
        )
    h = [None] * p
    hvec = [None] * p
    hvec[0] = np.linalg.solve(lhs, load)
    for k in range(p - 1, 0, -1):
        nxt = hvec[(k + 1) % p]
        hvec[k] = mats[k] @ nxt + qvecs[k]
    scale = max(1.0, max(float(np.max(np.abs(v))) for v in hvec))
    for k in range(p):
        res = hvec[k] - (mats[k] @ hvec[(k + 1) % p] + qvecs[k])
        if float(np.max(np.abs(res))) > 1e-12 * scale:
            raise EngineError(f"cycle solve residual too large at point {k}")
        h[k] = _from_vec(problem.space, slots, hvec[k], n)
    return h, [0.0] * p


def _p_update(problem: HomologicalProblem, k: int, h_here, h_next):
    """Degree-n part of the polynomial dynamics:
    P^(n) = -A o H^(n)_k + H^(n)_{k+1} o A + A o Q_k."""
    n = problem.degree
    a = problem.a_map(k)
    term = compose_truncated(a, problem.q[k], n)
    if not h_here.is_zero():
        term = term - compose_truncated(a, h_here, n)
    if not h_next.is_zero():
        term = term + compose_truncated(h_next, a, n)
    return subres_split(term, problem.spec)


def build_atlas(
    orbit: GermOrbit,
    N: int,
    policy: str = "auto",
    tail_depth: int | None = None,
    threads: int = 1,
    seed: int = 0,
    orbit_digest: str | None = None,
) -> NormalFormAtlas:
    """Run the induction over degrees 2..N and assemble the atlas.

    policy: "periodic" (exact cycle solves, needs a periodic orbit),
    "series" (backward sweeps), or "auto".  On aperiodic orbits the
    returned atlas covers the points whose tail depth meets the rule
    (or ``tail_depth``); later points are solved but not certified, so
    they are dropped.
    """
    spec, space = orbit.spec, orbit.space
    d = degree_bound(spec)
    if N <= d:
        raise EngineError(f"N must exceed sub-resonance degree bound (N={N}, d={d})")
    eps = choose_epsilon(spec, N)
    orbit.revalidate(eps)
    if policy not in ("auto", "series", "periodic"):
        raise EngineError(f"unknown solver policy {policy!r}")
    if policy == "periodic" and not orbit.is_periodic:
        raise EngineError("periodic solver policy needs a periodic orbit")
    mode = "periodic" if (policy in ("auto", "periodic") and orbit.is_periodic) else "series"

    steps = orbit.period if orbit.is_periodic else orbit.n_steps
    points = steps if orbit.is_periodic else steps + 1
    if not orbit.is_periodic and steps < 3:
        raise EngineError("series solves need an orbit of at least 3 steps")
    H, P = initial_jets(orbit, N)
    tail_acc = [0.0] * points
    per_degree = []
    k_used = 1

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for n in range(2, N + 1):
            problem = assemble_Q(orbit, H, P, n, eps=eps)
            sup_q = problem.sup_q_upper
            if mode == "periodic":
                hbar, bounds = solve_periodic(problem)
                k_n = 0
            else:
                if orbit.is_periodic:
                    k_n = tail_depth or default_tail_depth(eps.epsilon, sup_q, cap=100000)
                    hbar, bounds = solve_series(problem, k_n, cover_end=steps - 1)
                else:
                    k_n = tail_depth or default_tail_depth(
                        eps.epsilon, sup_q, cap=max(1, steps - 2)
                    )
                    k_used = max(k_used, k_n)
                    # one sweep across the whole orbit; certification by depth
                    hbar, _ = _full_sweep(problem)
                    e = eps.epsilon
                    geom = sup_q / (1.0 - math.exp(-e)) if sup_q else 0.0
                    bounds = [
                        math.exp(-e * (steps - k)) * geom for k in range(points)
                    ]
            for k in range(len(hbar)):
                if hbar[k] is not None and not hbar[k].is_zero():
                    H[k] = H[k] + hbar[k].with_max_degree(N)
                tail_acc[k] += bounds[k] if k < len(bounds) else 0.0

            def update(k):
                h_here = hbar[k] if hbar[k] is not None else PolyMap.zero(space, space, n)
                nxt = (k + 1) % len(hbar) if orbit.is_periodic else k + 1
                h_next = (
                    hbar[nxt]
                    if nxt < len(hbar) and hbar[nxt] is not None
                    else PolyMap.zero(space, space, n)
                )
                return _p_update(problem, k, h_here, h_next)

            if pool is not None:
                results = list(pool.map(update, range(steps)))
            else:
                results = [update(k) for k in range(steps)]
            dropped = 0.0
            for k, (s_part, n_part) in enumerate(results):
                dropped = max(dropped, n_part.max_abs_coeff())
                if not s_part.is_zero():
                    P[k] = P[k] + s_part
            per_degree.append(
                DegreeDiagnostics(n, sup_q, k_n, dropped, math.exp(-eps.epsilon))
            )
    finally:
        if pool is not None:
            pool.shutdown()

    if mode == "periodic" or orbit.is_periodic:
        cover_points = points
        cover_steps = steps
        k_report = 0 if mode == "periodic" else k_used
        period = orbit.period
    else:
        k_report = tail_depth or k_used
        cover_points = steps - k_report + 1
        if cover_points < 2:
            raise EngineError(
                f"orbit too short: covering tail depth {k_report} leaves "
                f"{cover_points} certified points"
            )
        cover_steps = cover_points - 1
        period = None

    atlas = NormalFormAtlas(
        spec=spec,
        space=space,
        N=N,
        d=d,
        eps=eps,
        policy=mode,
        K=k_report,
        seed=seed,
        period=period,
        H=tuple(H[:cover_points]),
        P=tuple(P[:cover_steps]),
        tail_bounds=tuple(tail_acc[:cover_points]),
        orbit_hash=orbit_digest,
        per_degree=tuple(per_degree),
    )
    _validate_atlas(atlas, orbit)
    return atlas


def _full_sweep(problem: HomologicalProblem):
    """Backward sweep over every stored step, zero-seeded at the far end."""
    steps = problem.n_steps
    n = problem.degree
    zero = PolyMap.zero(problem.space, problem.space, n)
    hbar = [None] * (steps + 1)
    hbar[steps] = zero
    for k in range(steps - 1, -1, -1):
        hbar[k] = twist_non_resonant(problem, k, hbar[k + 1]) + problem.q_bar_at(k)
    return hbar, None


def _validate_atlas(atlas: NormalFormAtlas, orbit: GermOrbit) -> None:
    ident = PolyMap.identity(atlas.space)
    for k, h in enumerate(atlas.H):
        lin = h.homogeneous_part(1)
        if max_coeff_delta(lin, ident) > 0.0:
            raise EngineError(f"H at point {k}: linear part is not the identity")
        if h.has_constant_term():
            raise EngineError(f"H at point {k}: nonzero constant term")
    for k, p in enumerate(atlas.P):
        a = orbit.germ(k).linear_matrix()
        if float(np.max(np.abs(p.linear_matrix() - a))) > 0.0:
            raise EngineError(f"P at point {k}: linear part differs from the germ")
        _, n_part = subres_split(p, atlas.spec)
        if not n_part.is_zero():
            t, alpha, c = next(n_part.terms())
            raise EngineError(
                f"P at point {k}: non-resonant term (coord {t}, monomial {alpha}) "
                f"with coefficient {c!r}"
            )
