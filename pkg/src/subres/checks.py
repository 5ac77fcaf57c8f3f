"""Executable verification of the structural claims on computed atlases.

Each check is a pure function from (orbit, atlas, parameters) to a
:class:`VerificationReport`: a list of rows carrying the measured value,
the bound it was held to, and pass/fail.  Reports serialize to readable
text and to a flat tab-separated table; failed rows carry a reproduction
command line.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import NormalFormAtlas, assemble_Q, initial_jets, twist_non_resonant
from .poly import (
    GradedSpace,
    PolyMap,
    classify_term,
    compose_truncated,
    degree_slots,
    derivative_at,
    flag_violation,
    invert_flag_linear,
    invert_formal,
    max_coeff_delta,
    poly_norm,
    sphere_points,
    subres_split,
    TermClass,
)
from .spectral import Spectrum, SubResonanceRelation, is_subordinate, type_weight
from .systems import CommutingFamily, GermOrbit

JET_TOL = 1e-9
VANISH_TOL = 1e-8
EXACT_TOL = 1e-12


class CheckInputError(ValueError):
    """A verification routine was called outside its preconditions."""


@dataclass
class CheckRow:
    check: str
    context: str
    measured: float
    bound: float
    passed: bool
    note: str = ""
    repro: str | None = None


@dataclass
class VerificationReport:
    name: str
    rows: list = field(default_factory=list)

    def add(self, check, context, measured, bound, passed, note=""):
        self.rows.append(
            CheckRow(check, context, float(measured), float(bound), bool(passed), note)
        )

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    def attach_repro(self, command: str) -> None:
        for r in self.rows:
            if not r.passed and r.repro is None:
                r.repro = command

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"== {self.name}: {'PASS' if self.passed else 'FAIL'} ==\n")
        for r in self.rows:
            status = "pass" if r.passed else "FAIL"
            buf.write(
                f"  [{status}] {r.check} {r.context}: "
                f"measured {r.measured:.6e} vs bound {r.bound:.6e}"
            )
            if r.note:
                buf.write(f" ({r.note})")
            buf.write("\n")
            if r.repro and not r.passed:
                buf.write(f"         repro: {r.repro}\n")
        return buf.getvalue()

    def to_tsv(self) -> str:
        lines = ["check\tcontext\tmeasured\tbound\tpassed\tnote\trepro"]
        for r in self.rows:
            lines.append(
                f"{r.check}\t{r.context}\t{r.measured!r}\t{r.bound!r}"
                f"\t{int(r.passed)}\t{r.note}\t{r.repro or ''}"
            )
        return "\n".join(lines) + "\n"


def merge_reports(reports) -> VerificationReport:
    """Deterministic merge, ordered by report name."""
    merged = VerificationReport("all")
    for rep in sorted(reports, key=lambda r: r.name):
        merged.rows.extend(rep.rows)
    return merged


def _worst_slot(p: PolyMap, q: PolyMap, min_degree=0, max_degree=None):
    hi = max(p.max_degree, q.max_degree) if max_degree is None else max_degree
    worst_key, worst = None, 0.0
    for key in set(p.coeffs) | set(q.coeffs):
        deg = sum(key[1])
        if not min_degree <= deg <= hi:
            continue
        delta = abs(p.coeffs.get(key, 0.0) - q.coeffs.get(key, 0.0))
        if delta > worst:
            worst_key, worst = key, delta
    return worst_key, worst


# ---------------------------------------------------------------------------
# conjugacy residuals


def conjugacy_residual_jet(orbit: GermOrbit, atlas: NormalFormAtlas, tol=JET_TOL):
    """Coefficient residual of H_{k+1} o F_k o H_k^{-1} - P_k through degree N.

    Pass bound per point: tol plus the certified solver tail bound.  The
    recomposition with the formal inverse is an independent route from
    the engine's own algebra.
    """
    report = VerificationReport("conjugacy")
    n = atlas.N
    for k in range(atlas.n_steps):
        h_inv = invert_formal(atlas.H_at(k), n)
        conj = compose_truncated(
            compose_truncated(atlas.H_at(k + 1), orbit.germ(k), n), h_inv, n
        )
        p_full = atlas.P_at(k).with_max_degree(n)
        key, resid = _worst_slot(conj, p_full)
        bound = tol + atlas.tail_bound(k) + atlas.tail_bound(k + 1)
        ctx = f"point={k}"
        note = ""
        if key is not None:
            ctx += f" slot=(coord {key[0]}, monomial {key[1]})"
        if resid > bound:
            offenders = sorted(
                (kk for kk in set(conj.coeffs) | set(p_full.coeffs)
                 if abs(conj.coeffs.get(kk, 0.0) - p_full.coeffs.get(kk, 0.0)) > bound),
                key=lambda kk: -abs(conj.coeffs.get(kk, 0.0) - p_full.coeffs.get(kk, 0.0)),
            )[:5]
            note = "slots above bound: " + ", ".join(
                f"(coord {t}, monomial {a})" for t, a in offenders
            )
        report.add("conjugacy_residual", ctx, resid, bound, resid <= bound, note)
    return report


def residual_scaling(orbit: GermOrbit, atlas: NormalFormAtlas, radii, tol_slope=0.5):
    """Evaluation residual sup |H_{k+1}(F_k t) - P_k(H_k t)| over |t| <= r.

    For exactly polynomial germs of degree <= N the only defect is the
    discarded tail, so the log-log slope across the radii must be at
    least N + tol_slope.  Machine-zero residuals short-circuit to pass
    with the note "exact".
    """
    radii = sorted(float(r) for r in radii)
    if not radii:
        raise CheckInputError("need at least one radius")
    if radii[-1] > orbit.domain_radius + 1e-15:
        raise CheckInputError(
            f"radius {radii[-1]} outside the germ validity ball "
            f"(domain radius {orbit.domain_radius})"
        )
    for k in range(atlas.n_steps):
        germ = orbit.germ(k)
        if germ.max_abs_coeff(min_degree=atlas.N + 1) > 0.0:
            raise CheckInputError(
                f"germ {k} has terms above degree N={atlas.N}; "
                "residual scaling needs exactly polynomial germs of degree <= N"
            )
    report = VerificationReport("scaling")
    points = sphere_points(orbit.space.dim)
    res = []
    for r in radii:
        worst = 0.0
        for k in range(atlas.n_steps):
            h_here = atlas.H_at(k)
            h_next = atlas.H_at(k + 1)
            p_here = atlas.P_at(k)
            germ = orbit.germ(k)
            for pt in points:
                v = r * np.asarray(pt)
                lhs = h_next.evaluate(germ.evaluate(v))
                rhs = p_here.evaluate(h_here.evaluate(v))
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        res.append(worst)
        report.add("scaling_residual", f"r={r!r}", worst, math.inf, True, "measured")
    if max(res) <= 1e-14:
        report.add(
            "scaling_slope", "all radii", 0.0, 0.0, True, "exact (residuals at machine zero)"
        )
        return report
    if min(res) <= 0.0:
        report.add("scaling_slope", "all radii", 0.0, 0.0, False, "zero residual at one radius only")
        return report
    slope = float(np.polyfit(np.log(radii), np.log(res), 1)[0])
    bound = atlas.N + tol_slope
    report.add("scaling_slope", f"radii={radii}", slope, bound, slope >= bound, "slope >= bound")
    return report


# ---------------------------------------------------------------------------
# transition maps and coherence


@dataclass(frozen=True)
class TransitionMap:
    """Chart transition at one orbit step between two same-leaf atlases."""

    step: int
    cap: int
    x_bar: tuple
    map: PolyMap


def _same_leaf(orbit_x: GermOrbit, orbit_y: GermOrbit) -> bool:
    if orbit_x.base_points is None or orbit_y.base_points is None:
        return False
    return orbit_x.base_points == orbit_y.base_points


def transition_jet(
    orbit_x, atlas_x, orbit_y, atlas_y, step: int, cap: int
) -> TransitionMap:
    """Jet of H_y o H_x^{-1} at orbit step ``step`` to degree ``cap``.

    Charts are anchored at the fiber orbit points, so the inner map is
    the formal inverse of H_x shifted by the anchor offset.
    """
    if not _same_leaf(orbit_x, orbit_y):
        raise CheckInputError("transition maps need two orbits on the same fiber")
    if cap > atlas_x.N:
        raise CheckInputError("transition cap cannot exceed the atlas degree")
    space = atlas_x.space
    delta = np.asarray(orbit_x.fiber_points[step]) - np.asarray(
        orbit_y.fiber_points[step]
    )
    q = invert_formal(atlas_x.H_at(step), cap)
    const = PolyMap(
        space, space, cap, {(t, (0,) * space.dim): delta[t] for t in range(space.dim)}
    )
    inner = q + const
    # the full-degree chart must be composed: the anchor shift couples its
    # high-degree terms into every lower degree of the transition
    g = compose_truncated(atlas_y.H_at(step), inner, cap)
    x_bar = atlas_y.H_at(step).evaluate(delta)
    return TransitionMap(step, cap, tuple(float(x) for x in x_bar), g)


def coherence_check(
    orbit_x,
    atlas_x,
    orbit_y,
    atlas_y,
    cap: int,
    n_steps: int = 2,
    tol=VANISH_TOL,
    tol_const=1e-10,
):
    """Structure of the transitions G = H_y o H_x^{-1} along one leaf.

    (a) G(0) equals the y-chart image of the x anchor;
    (b) all coefficients of degrees d+1..cap vanish;
    (c) G - G(0) preserves the fast flag;
    (d) equivariance G' o P_x = P_y o G along n_steps forward steps;
    (e) the linear part of G is a sub-resonance (block triangular) map.
    """
    report = VerificationReport("coherence")
    spec = atlas_x.spec
    d = atlas_x.d
    trans = [
        transition_jet(orbit_x, atlas_x, orbit_y, atlas_y, j, cap)
        for j in range(n_steps + 1)
    ]
    g0 = trans[0]
    const_err = float(np.max(np.abs(g0.map.constant_vector() - np.asarray(g0.x_bar))))
    report.add("coherence_constant", "step=0", const_err, tol_const, const_err <= tol_const)

    tail = g0.map.max_abs_coeff(min_degree=d + 1)
    report.add(
        "coherence_degree_bound",
        f"step=0 degrees {d + 1}..{cap}",
        tail,
        tol,
        tail <= tol,
    )

    fv = flag_violation(g0.map.drop_constant())
    report.add("coherence_flag", "step=0", fv, tol, fv <= tol)

    lin = g0.map.linear_matrix()
    worst_lin = 0.0
    space = atlas_x.space
    for t in range(space.dim):
        for c in range(space.dim):
            if space.block_of(t) > space.block_of(c):
                worst_lin = max(worst_lin, abs(lin[t, c]))
    report.add("coherence_linear_triangular", "step=0", worst_lin, tol, worst_lin <= tol)

    nonres = 0.0
    for (t, alpha), c in g0.map.coeffs.items():
        s = space.type_of(alpha)
        if sum(s) == 0:
            continue
        if classify_term(spec, space.block_of(t), s) is TermClass.NON_RESONANT:
            nonres = max(nonres, abs(c))
    report.add("coherence_non_resonant_slots", "step=0", nonres, tol, nonres <= tol)

    eq_cap = min(cap, atlas_x.N)
    for j in range(n_steps):
        lhs = compose_truncated(trans[j + 1].map, atlas_x.P_at(j), eq_cap)
        rhs = compose_truncated(atlas_y.P_at(j).with_max_degree(eq_cap), trans[j].map, eq_cap)
        key, defect = _worst_slot(lhs, rhs)
        ctx = f"step={j}"
        if key is not None:
            ctx += f" slot=(coord {key[0]}, monomial {key[1]})"
        report.add("coherence_equivariance", ctx, defect, tol, defect <= tol)
    return report


def coherence_growth_check(
    orbit_x,
    atlas_x,
    orbit_y,
    atlas_y,
    slot,
    m0: float,
    n_steps: int,
    cap: int,
    eps: float,
):
    """Fault-injection form of the consistency argument.

    Inject a non-resonant coefficient of size m0 into H_y at step 0 and
    transport the corrupted transition forward by equivariance:
    T_n = P_y-chain o G_0 o (P_x-chain)^{-1}.  The injected slot's
    coefficient must grow at exponential rate at least
    lambda_i - sum_j s_j mu_j - 3 eps > 0.
    """
    t_idx, alpha = slot
    space = atlas_y.space
    spec = atlas_y.spec
    s = space.type_of(alpha)
    block = space.block_of(t_idx)
    if classify_term(spec, block, s) is not TermClass.NON_RESONANT:
        raise CheckInputError("growth check needs a non-resonant slot")
    rate_bound = spec.lambdas[block - 1] - type_weight(spec, s) - 3.0 * eps

    bump = PolyMap(space, space, atlas_y.N, {(t_idx, alpha): m0})
    corrupt_h = atlas_y.H[0] + bump
    atlas_y_bad = replace(atlas_y, H=(corrupt_h,) + atlas_y.H[1:])
    g0_bad = transition_jet(orbit_x, atlas_x, orbit_y, atlas_y_bad, 0, cap).map

    report = VerificationReport("coherence_growth")
    ident = PolyMap.identity(space, max_degree=cap)
    chain_x = ident
    chain_y = ident
    sizes = []
    for n in range(n_steps + 1):
        if n > 0:
            chain_x = compose_truncated(atlas_x.P_at(n - 1).with_max_degree(cap), chain_x, cap)
            chain_y = compose_truncated(atlas_y.P_at(n - 1).with_max_degree(cap), chain_y, cap)
        transported = compose_truncated(
            chain_y, compose_truncated(g0_bad, invert_formal(chain_x, cap), cap), cap
        )
        clean = transition_jet(orbit_x, atlas_x, orbit_y, atlas_y, n, cap).map
        coeff = abs(
            transported.coeffs.get((t_idx, alpha), 0.0)
            - clean.coeffs.get((t_idx, alpha), 0.0)
        )
        sizes.append(coeff)
        report.add(
            "growth_defect", f"n={n}", coeff, math.inf, True, "transported defect"
        )
    logs = np.log(np.maximum(sizes, 1e-300))
    slope = float(np.polyfit(np.arange(len(sizes)), logs, 1)[0])
    report.add(
        "growth_rate",
        f"slot=(coord {t_idx}, monomial {alpha})",
        slope,
        rate_bound,
        slope >= rate_bound and rate_bound > 0.0,
        "measured rate >= lambda_i - sum s_j mu_j - 3 eps",
    )
    return report


# ---------------------------------------------------------------------------
# centralizer


def centralizer_check(
    orbit: GermOrbit,
    atlas: NormalFormAtlas,
    family: CommutingFamily,
    tol=VANISH_TOL,
    tol_commute=1e-10,
):
    """Commuting maps are brought to sub-resonant form by the same charts.

    Preconditions: the family commutes with the dynamics to jet order N
    (residual <= tol_commute).  The check: the jet of
    H_{k+shift} o g_k o H_k^{-1} has no non-resonant coefficient above tol.
    """
    n = atlas.N
    shift = family.shift
    p = orbit.period
    if p is not None:
        count = min(len(family.maps), atlas.n_steps)
    else:
        count = min(len(family.maps) - 1, atlas.n_steps - shift)
        if count < 1:
            raise CheckInputError("atlas too short for the family's point shift")
    report = VerificationReport("centralizer")
    for k in range(count):
        g_here = family.map_at(k, p)
        g_next = family.map_at(k + 1, p)
        lhs = compose_truncated(g_next.truncate(n) if g_next.max_degree > n else g_next, orbit.germ(k), n)
        rhs = compose_truncated(orbit.germ((k + shift) % p if p else k + shift), g_here, n)
        resid = max_coeff_delta(lhs, rhs, max_degree=n)
        if resid > tol_commute:
            raise CheckInputError(
                f"family does not commute with the dynamics at step {k}: "
                f"jet residual {resid:.3e} through degree {n}"
            )
        h_inv = invert_formal(atlas.H_at(k), n)
        conj = compose_truncated(
            compose_truncated(atlas.H_at(k + shift), g_here, n), h_inv, n
        )
        _, n_part = subres_split(conj.truncate(n), atlas.spec)
        key, worst = _worst_slot(n_part, PolyMap.zero(atlas.space, atlas.space, n))
        ctx = f"point={k}"
        if key is not None:
            ctx += f" slot=(coord {key[0]}, monomial {key[1]})"
        report.add("centralizer_non_resonant", ctx, worst, tol, worst <= tol)
    return report


# ---------------------------------------------------------------------------
# fast flag dynamics


def fast_flag_dynamics(
    orbit: GermOrbit,
    atlas: NormalFormAtlas,
    level: int,
    n_pairs: int = 20,
    seed: int = 0,
    n_iter: int = 12,
    base_scale: float = 0.05,
    sep_scale: float = 1e-2,
):
    """Invariance and decay rates of the flag subspace V^level under P.

    Symbolic part: the Jacobian of P at sampled points never feeds a
    slower block from V^level.  Dynamic part: pairs separated inside
    V^level contract with log-rate at most mu_level + 2 eps; pairs with a
    component outside V^level contract with log-rate at least
    lambda_{level+1} - 2 eps.
    """
    spec = atlas.spec
    space = atlas.space
    l = spec.l
    if not 1 <= level <= l:
        raise CheckInputError(f"flag level must be in 1..{l}")
    eps = atlas.eps.epsilon
    rng = np.random.default_rng(seed)
    report = VerificationReport("flags")

    flag_dim = sum(space.block_dims[:level])
    steps_avail = atlas.n_steps if atlas.period is None else max(atlas.n_steps, n_iter)
    n_iter = min(n_iter, steps_avail)
    if n_iter < 5:
        raise CheckInputError("atlas covers too few steps for rate measurement")

    for trial in range(3):
        v = rng.normal(size=space.dim) * base_scale
        for j in (0, atlas.n_steps // 2, atlas.n_steps - 1):
            jac = derivative_at(atlas.P_at(j), v).linear_matrix()
            worst = 0.0
            for t in range(space.dim):
                for c in range(flag_dim):
                    if space.block_of(t) > level:
                        worst = max(worst, abs(jac[t, c]))
            report.add(
                "flag_invariance",
                f"level={level} sample={trial} step={j}",
                worst,
                EXACT_TOL,
                worst <= EXACT_TOL,
            )

    def measure_rate(y0, w):
        y = y0.copy()
        z = y0 + w
        seps = [float(np.max(np.abs(y - z)))]
        for j in range(n_iter):
            p_j = atlas.P_at(j)
            y = p_j.evaluate(y)
            z = p_j.evaluate(z)
            sep = float(np.max(np.abs(y - z)))
            if sep < 1e-13:
                break
            seps.append(sep)
        if len(seps) < 5:
            return None
        t = np.arange(len(seps))
        return float(np.polyfit(t, np.log(seps), 1)[0])

    mu_k = spec.mus[level - 1]
    for i in range(n_pairs):
        y0 = rng.normal(size=space.dim) * base_scale
        w = np.zeros(space.dim)
        w[:flag_dim] = rng.normal(size=flag_dim)
        w *= sep_scale / max(1e-12, np.max(np.abs(w)))
        rate = measure_rate(y0, w)
        if rate is None:
            report.add("flag_rate_in", f"level={level} pair={i}", 0.0, 0.0, False, "separation underflow")
            continue
        bound = mu_k + 2.0 * eps
        report.add(
            "flag_rate_in",
            f"level={level} pair={i}",
            rate,
            bound,
            rate <= bound,
            "rate <= mu_k + 2 eps",
        )
    if level < l:
        lam_next = spec.lambdas[level]
        for i in range(n_pairs):
            y0 = rng.normal(size=space.dim) * base_scale
            w = rng.normal(size=space.dim)
            out = w[flag_dim:]
            small = np.abs(out) < 1.0
            out[small] = np.sign(out[small] + 1e-9) * 1.0
            w[flag_dim:] = out
            w *= sep_scale / np.max(np.abs(w))
            rate = measure_rate(y0, w)
            if rate is None:
                report.add("flag_rate_out", f"level={level} pair={i}", 0.0, 0.0, False, "separation underflow")
                continue
            bound = lam_next - 2.0 * eps
            report.add(
                "flag_rate_out",
                f"level={level} pair={i}",
                rate,
                bound,
                rate >= bound,
                "rate >= lambda_{k+1} - 2 eps",
            )
    return report


# ---------------------------------------------------------------------------
# flag-only dependence of the sub-resonant class


def class_invariance_check(spec: Spectrum, space: GradedSpace, a_matrix, tol_zero=1e-10):
    """Conjugating the sub-resonant monomial basis by a flag-preserving
    change of basis spans exactly the same class, term-by-term landing in
    subordinate slots only."""
    a = np.asarray(a_matrix, dtype=float)
    if a.shape != (space.dim, space.dim):
        raise CheckInputError("matrix does not match the space")
    for t in range(space.dim):
        for c in range(space.dim):
            if space.block_of(t) > space.block_of(c) and abs(a[t, c]) > 1e-14:
                raise CheckInputError("change of basis is not flag-preserving")
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(a)
    if not math.isfinite(cond) or cond > 1e12:
        raise CheckInputError("change of basis is numerically singular")
    a_map = PolyMap.from_linear(space, space, a)
    a_inv_map = PolyMap.from_linear(space, space, invert_flag_linear(space, a))
    from .spectral import degree_bound

    d = degree_bound(spec)
    report = VerificationReport("class_invariance")
    dims = space.block_dims
    for n in range(1, d + 1):
        subs, nons = degree_slots(spec, dims, dims, n)
        if not subs:
            continue
        all_slots = list(subs) + list(nons)
        col = {slot: j for j, slot in enumerate(all_slots)}
        rows = []
        leak = 0.0
        subordinate_ok = True
        for t, alpha in subs:
            mono = PolyMap(space, space, n, {(t, alpha): 1.0})
            conj = compose_truncated(compose_truncated(a_map, mono, n), a_inv_map, n)
            vec = np.zeros(len(all_slots))
            base_rel = SubResonanceRelation(space.block_of(t), space.type_of(alpha))
            for (tt, aa), c in conj.coeffs.items():
                vec[col[(tt, aa)]] = c
                rel = SubResonanceRelation(space.block_of(tt), space.type_of(aa))
                if abs(c) > tol_zero and not is_subordinate(rel, base_rel):
                    subordinate_ok = False
                if (tt, aa) not in subs:
                    leak = max(leak, abs(c))
            rows.append(vec)
        basis = np.zeros((len(subs), len(all_slots)))
        for j, slot in enumerate(subs):
            basis[j, col[slot]] = 1.0
        stacked = np.vstack([np.array(rows), basis])
        svals = np.linalg.svd(stacked, compute_uv=False)
        k = len(subs)
        kept = float(svals[k - 1])
        zero_part = float(svals[k]) if len(svals) > k else 0.0
        gap = kept / max(zero_part, 1e-300)
        report.add(
            "class_span_rank",
            f"degree={n} slots={k}",
            kept,
            tol_zero,
            kept > tol_zero and zero_part < tol_zero,
            f"gap={gap:.3e}",
        )
        report.add(
            "class_gap", f"degree={n}", gap, 1e6, gap >= 1e6, "kept / zeroed singular values"
        )
        report.add(
            "class_non_subres_leak", f"degree={n}", leak, tol_zero, leak <= tol_zero
        )
        report.add(
            "class_subordinate_support",
            f"degree={n}",
            0.0 if subordinate_ok else 1.0,
            0.0,
            subordinate_ok,
        )
    return report


# ---------------------------------------------------------------------------
# one-step twist contraction on the non-resonant slots


def twist_contraction_check(orbit: GermOrbit, atlas: NormalFormAtlas, slack=1.05):
    """Measured one-step contraction of the twist on non-resonant slots.

    For every orbit step and degree 2..N, the projected twist of each
    non-resonant unit monomial must have upper norm at most
    exp(-eps) * slack (sound norm sides: upper for the image, exact lower
    = 1 for a unit monomial).
    """
    report = VerificationReport("contraction")
    eps = atlas.eps.epsilon
    bound = math.exp(-eps) * slack
    H, P = initial_jets(orbit, atlas.N)
    dims = orbit.space.block_dims
    steps = orbit.period if orbit.is_periodic else atlas.n_steps
    for n in range(2, atlas.N + 1):
        problem = assemble_Q(orbit, H, P, n, eps=atlas.eps)
        _, nons = degree_slots(atlas.spec, dims, dims, n)
        for k in range(steps):
            worst = 0.0
            worst_slot = None
            for slot in nons:
                r = PolyMap(orbit.space, orbit.space, n, {slot: 1.0})
                tw = twist_non_resonant(problem, k, r)
                factor = poly_norm(tw).upper
                if factor > worst:
                    worst, worst_slot = factor, slot
            ctx = f"point={k} degree={n}"
            if worst_slot is not None:
                ctx += f" slot=(coord {worst_slot[0]}, monomial {worst_slot[1]})"
            report.add("twist_contraction", ctx, worst, bound, worst <= bound)
    return report
