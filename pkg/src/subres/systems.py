"""Concrete contraction dynamics: finite orbits of polynomial germs.

Three generators are provided.  ``make_stationary`` and ``make_periodic``
wrap user-supplied germs; ``sample_skew_orbit`` walks a base map (circle
rotation, doubling, or an explicit sequence) and Taylor-expands a
polynomial fiber map about the fiber orbit, so the leaf of the contracted
foliation is modeled exactly by a fiber.

Every generated orbit is validated: germs fix the origin, their linear
parts preserve the fast flag, and the diagonal blocks have singular
values inside the epsilon-widened rate bands.  Validation failures raise
:class:`SystemValidationError` with the offending block and value;
successful validation records quantitative margins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .poly import GradedSpace, PolyMap, compose_truncated, recenter
from .spectral import EpsilonBudget, Spectrum, choose_epsilon

FLAG_TOL = 1e-10


class SystemValidationError(ValueError):
    """A germ or system description violates its structural invariants."""


@dataclass(frozen=True)
class OrbitMargins:
    """Quantitative slack of the band validation, minimized over the orbit.

    ``band_lo``/``band_hi`` are min over points and blocks of
    log(sigma) - (lambda_i - eps) and (mu_i + eps) - log(sigma).
    ``cross_max`` is the largest linear entry feeding a faster block from
    a slower one (always sub-resonant, reported not bounded).
    """

    band_lo: float
    band_hi: float
    cross_max: float


def _validate_germ(spec, space, germ, eps, where):
    if germ.source != space or germ.target != space:
        raise SystemValidationError(f"{where}: germ spaces do not match the orbit space")
    if germ.has_constant_term():
        raise SystemValidationError(f"{where}: germ must fix the origin")
    if germ.max_abs_coeff(min_degree=1, max_degree=1) == 0.0:
        raise SystemValidationError(f"{where}: germ has no linear part")
    a = germ.linear_matrix()
    lo = math.inf
    hi = math.inf
    cross = 0.0
    for t in range(space.dim):
        for c in range(space.dim):
            bt, bc = space.block_of(t), space.block_of(c)
            if bt > bc and abs(a[t, c]) > FLAG_TOL:
                raise SystemValidationError(
                    f"{where}: linear part mixes blocks against the flag "
                    f"(entry [{t},{c}] = {a[t, c]!r} feeds block {bt} from block {bc})"
                )
            if bt < bc:
                cross = max(cross, float(abs(a[t, c])))
    e = eps.epsilon
    for b in range(1, spec.l + 1):
        sl = space.block_slice(b)
        svals = np.linalg.svd(a[sl, sl], compute_uv=False)
        smin, smax = float(svals[-1]), float(svals[0])
        if smin <= 0.0:
            raise SystemValidationError(
                f"{where}: block {b} linear part singular (sigma_min = {smin!r})"
            )
        lam, mu = spec.bands[b - 1]
        m_lo = math.log(smin) - (lam - e)
        m_hi = (mu + e) - math.log(smax)
        if m_lo < -1e-9:
            raise SystemValidationError(
                f"{where}: block {b} singular value {smin!r} below band "
                f"(log {math.log(smin):.6f} < lambda_{b} - eps = {lam - e:.6f})"
            )
        if m_hi < -1e-9:
            raise SystemValidationError(
                f"{where}: block {b} singular value {smax!r} above band "
                f"(log {math.log(smax):.6f} > mu_{b} + eps = {mu + e:.6f})"
            )
        lo = min(lo, m_lo)
        hi = min(hi, m_hi)
    return lo, hi, cross


@dataclass(frozen=True)
class GermOrbit:
    """A finite (or periodic) orbit of degree-capped contraction germs.

    ``germs[k]`` is the germ of the dynamics at point k, mapping the fiber
    at point k to the fiber at point k+1.  With ``period = p`` the list
    has length p and indices wrap; otherwise the orbit has
    ``len(germs)`` steps and ``len(germs) + 1`` points.
    """

    spec: Spectrum
    space: GradedSpace
    germs: tuple
    period: int | None = None
    eps: EpsilonBudget | None = None
    length: int | None = None
    domain_radius: float = 1.0
    fiber_points: tuple | None = None
    base_points: tuple | None = None
    margins: OrbitMargins = field(default=None, compare=False)

    def __post_init__(self):
        germs = tuple(self.germs)
        object.__setattr__(self, "germs", germs)
        if not germs:
            raise SystemValidationError("orbit needs at least one germ")
        if self.period is not None and self.period != len(germs):
            raise SystemValidationError("period must equal the number of stored germs")
        eps = self.eps
        if eps is None:
            max_deg = max(2, max(g.max_degree for g in germs))
            eps = choose_epsilon(self.spec, max_deg)
            object.__setattr__(self, "eps", eps)
        if self.length is None:
            object.__setattr__(self, "length", len(germs))
        lo = math.inf
        hi = math.inf
        cross = 0.0
        for k, g in enumerate(germs):
            m_lo, m_hi, m_cross = _validate_germ(
                self.spec, self.space, g, eps, f"germ {k}"
            )
            lo, hi, cross = min(lo, m_lo), min(hi, m_hi), max(cross, m_cross)
        object.__setattr__(self, "margins", OrbitMargins(lo, hi, cross))
        if self.fiber_points is not None:
            pts = tuple(tuple(float(x) for x in v) for v in self.fiber_points)
            object.__setattr__(self, "fiber_points", pts)
        if self.base_points is not None:
            object.__setattr__(
                self, "base_points", tuple(float(x) for x in self.base_points)
            )

    @property
    def is_periodic(self) -> bool:
        return self.period is not None

    @property
    def n_steps(self) -> int:
        """Stored steps; periodic orbits continue past this by wrapping."""
        return len(self.germs)

    def germ(self, k: int) -> PolyMap:
        if self.is_periodic:
            return self.germs[k % self.period]
        if not 0 <= k < len(self.germs):
            raise SystemValidationError(
                f"orbit has {len(self.germs)} steps, germ {k} requested"
            )
        return self.germs[k]

    def revalidate(self, eps: EpsilonBudget) -> OrbitMargins:
        """Re-run band validation under a different slack budget."""
        lo = math.inf
        hi = math.inf
        cross = 0.0
        for k, g in enumerate(self.germs):
            m_lo, m_hi, m_cross = _validate_germ(
                self.spec, self.space, g, eps, f"germ {k}"
            )
            lo, hi, cross = min(lo, m_lo), min(hi, m_hi), max(cross, m_cross)
        return OrbitMargins(lo, hi, cross)


def make_stationary(spec, space, germ, length=1, eps=None) -> GermOrbit:
    """Orbit of a single fixed germ, period 1."""
    if length < 1:
        raise SystemValidationError("length must be >= 1")
    return GermOrbit(spec, space, (germ,), period=1, eps=eps, length=length)


def make_periodic(spec, space, germs, eps=None) -> GermOrbit:
    """Cyclic orbit of period len(germs)."""
    germs = tuple(germs)
    return GermOrbit(spec, space, germs, period=len(germs), eps=eps, length=len(germs))


# ---------------------------------------------------------------------------
# skew products


@dataclass(frozen=True)
class TrigCoeff:
    """base + amp * cos(2 pi (freq * theta + phase))."""

    base: float
    amp: float = 0.0
    phase: float = 0.0
    freq: int = 1

    def __call__(self, theta: float) -> float:
        if self.amp == 0.0:
            return self.base
        return self.base + self.amp * math.cos(
            2.0 * math.pi * (self.freq * theta + self.phase)
        )


@dataclass(frozen=True)
class RunDefaults:
    N: int
    length: int
    seed: int
    theta0: float
    v0: tuple


@dataclass(frozen=True)
class SkewProductSystem:
    """A base map driving a family of polynomial fiber contractions.

    ``diag[coord]`` gives the log-scale linear coefficient of that fiber
    coordinate as a trigonometric polynomial of the base point, so the
    linear part at every base point is diagonal and inside the bands by
    construction.  ``coeffs`` lists nonlinear monomial coefficients, each
    again a trigonometric polynomial of the base point.  The fiber
    dynamics is declared on the max-norm ball of radius ``rho``;
    ``rho_nl`` records the intended scale of the nonlinear coefficients.
    """

    spec: Spectrum
    space: GradedSpace
    base_kind: str
    rho: float
    rho_nl: float
    diag: tuple
    coeffs: tuple
    run: RunDefaults
    alpha: float | None = None
    sequence: tuple | None = None

    def __post_init__(self):
        if self.base_kind not in ("rotation", "doubling", "sequence"):
            raise SystemValidationError(f"unknown base map {self.base_kind!r}")
        if self.base_kind == "rotation" and self.alpha is None:
            raise SystemValidationError("rotation base needs alpha")
        if self.base_kind == "sequence" and not self.sequence:
            raise SystemValidationError("sequence base needs explicit points")
        if len(self.diag) != self.space.dim:
            raise SystemValidationError("need one diagonal row per fiber coordinate")
        if self.rho <= 0:
            raise SystemValidationError("rho must be positive")
        for t, alpha_exp, _ in self.coeffs:
            if len(alpha_exp) != self.space.dim or sum(alpha_exp) < 2:
                raise SystemValidationError(
                    f"nonlinear coefficient rows need degree >= 2, got {alpha_exp}"
                )
            if not 0 <= t < self.space.dim:
                raise SystemValidationError("coefficient target out of range")
            # re-centering puts d(term)/d(coord) into the germ's linear part,
            # so a term into block m must not involve faster-block variables
            m = self.space.block_of(t)
            s = self.space.type_of(tuple(alpha_exp))
            if any(sj > 0 for sj in s[: m - 1]):
                raise SystemValidationError(
                    f"fiber term {alpha_exp} into block {m} involves a faster "
                    "block; its orbit germs would break the fast flag"
                )

    @property
    def max_degree(self) -> int:
        return max([1] + [sum(a) for (_, a, _) in self.coeffs])

    def base_orbit(self, theta0: float, n_steps: int) -> tuple:
        if self.base_kind == "sequence":
            seq = self.sequence
            return tuple(seq[k % len(seq)] for k in range(n_steps + 1))
        thetas = [theta0 % 1.0]
        for _ in range(n_steps):
            t = thetas[-1]
            if self.base_kind == "rotation":
                thetas.append((t + self.alpha) % 1.0)
            else:
                thetas.append((2.0 * t) % 1.0)
        return tuple(thetas)

    def fiber_map_at(self, theta: float) -> PolyMap:
        coeffs = {}
        dim = self.space.dim
        for c in range(dim):
            mid, amp, phase, freq = self.diag[c]
            val = math.exp(TrigCoeff(mid, amp, phase, freq)(theta))
            alpha = tuple(1 if j == c else 0 for j in range(dim))
            coeffs[(c, alpha)] = val
        for t, alpha_exp, trig in self.coeffs:
            coeffs[(t, tuple(alpha_exp))] = trig(theta)
        return PolyMap(self.space, self.space, max(self.max_degree, 1), coeffs)

    def injectivity_margin(self, n_theta: int = 16, n_grid: int = 4) -> float:
        """min singular value of the fiber Jacobian over a theta x ball grid.

        Sampled, not proven; the margin is reported by builders and only
        asserted by acceptance-style runs.
        """
        from .poly import derivative_at

        worst = math.inf
        grid_1d = np.linspace(-self.rho, self.rho, n_grid)
        mesh = np.meshgrid(*([grid_1d] * self.space.dim), indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        for i in range(n_theta):
            theta = i / n_theta
            fiber = self.fiber_map_at(theta)
            for v in points:
                jac = derivative_at(fiber, v).linear_matrix()
                s = np.linalg.svd(jac, compute_uv=False)[-1]
                worst = min(worst, float(s))
        return worst


def sample_skew_orbit(sys: SkewProductSystem, theta0, v0, length, N, eps=None) -> GermOrbit:
    """Walk the skew product and expand the fiber map about the orbit.

    The germ at step k is the degree-N expansion of
    t -> Phi_{theta_k}(v_k + t) - v_{k+1}; for polynomial fiber maps the
    expansion is exact.  Fails if the fiber orbit leaves the declared
    rho-ball or an expansion Jacobian leaves the widened bands.
    """
    if length < 1:
        raise SystemValidationError("length must be >= 1")
    v = np.asarray(v0, dtype=float)
    if v.shape != (sys.space.dim,):
        raise SystemValidationError("v0 does not match the fiber dimension")
    thetas = sys.base_orbit(theta0, length)
    fibers = [tuple(float(x) for x in v)]
    germs = []
    budget = eps or choose_epsilon(sys.spec, max(2, N))
    max_norm = float(np.max(np.abs(v)))
    for k in range(length):
        fiber_map = sys.fiber_map_at(thetas[k])
        if float(np.max(np.abs(v))) > sys.rho + 1e-12:
            raise SystemValidationError(
                f"orbit escapes the radius-{sys.rho} ball at step {k}"
            )
        germ = recenter(fiber_map, v, cap=fiber_map.max_degree)
        if fiber_map.max_degree > N:
            germ = germ.truncate(N)
        germ = germ.with_max_degree(max(N, 1))
        germs.append(germ)
        v = fiber_map.evaluate(v)
        fibers.append(tuple(float(x) for x in v))
        max_norm = max(max_norm, float(np.max(np.abs(v))))
    if max_norm > sys.rho + 1e-12:
        raise SystemValidationError("orbit escapes the declared fiber ball")
    return GermOrbit(
        sys.spec,
        sys.space,
        tuple(germs),
        period=None,
        eps=budget,
        length=length,
        domain_radius=sys.rho - max_norm if sys.rho > max_norm else 0.0,
        fiber_points=tuple(fibers),
        base_points=thetas,
    )


# ---------------------------------------------------------------------------
# commuting families along an orbit


@dataclass(frozen=True)
class CommutingFamily:
    """Maps g_k from the fiber at point k to the fiber at point k + shift."""

    shift: int
    maps: tuple

    def map_at(self, k: int, periodic_len: int | None = None) -> PolyMap:
        if periodic_len is not None:
            return self.maps[k % periodic_len]
        return self.maps[k]


def power_family(orbit: GermOrbit, m: int, n_points: int | None = None) -> CommutingFamily:
    """g = f^m along the orbit, composed without truncation."""
    if m < 1:
        raise SystemValidationError("power must be >= 1")
    if orbit.is_periodic:
        count = orbit.period
    else:
        count = (n_points if n_points is not None else orbit.n_steps) - (m - 1)
        if count < 1:
            raise SystemValidationError("orbit too short for the requested power")
    deg = max(g.max_degree for g in orbit.germs)
    cap = deg**m
    maps = []
    for k in range(count):
        g = orbit.germ(k)
        g = g.with_max_degree(cap)
        for j in range(1, m):
            g = compose_truncated(orbit.germ(k + j), g, cap)
        maps.append(g)
    return CommutingFamily(shift=m, maps=tuple(maps))


def identity_family(orbit: GermOrbit, n_points: int | None = None) -> CommutingFamily:
    count = orbit.period if orbit.is_periodic else (n_points or orbit.n_steps + 1)
    ident = PolyMap.identity(orbit.space)
    return CommutingFamily(shift=0, maps=(ident,) * count)
