"""Chart coherence along a leaf of a skew product.

A circle rotation drives a quadratic fiber contraction; the fiber is the
leaf.  Two orbits on the same fiber get their own normal-form atlases,
and the transition between the two charts must be, up to tolerance, a
polynomial of degree at most d with only sub-resonant slots populated,
equivariant under the normal forms.

Note the atlases here are built to a higher degree (7) than the checked
transition cap (4): the anchor offset couples chart coefficients of
every degree into every lower degree of the transition, so the residuals
of the structure checks shrink geometrically in the build degree.
"""
import math

from subres import (
    GradedSpace,
    Spectrum,
    TrigCoeff,
    build_atlas,
    coherence_check,
    coherence_growth_check,
    sample_skew_orbit,
    transition_jet,
)
from subres.spectral import choose_epsilon
from subres.systems import RunDefaults, SkewProductSystem

spec = Spectrum(((-2.1, -2.1), (-1.0, -1.0)))
space = GradedSpace((1, 1))
system = SkewProductSystem(
    spec=spec,
    space=space,
    base_kind="rotation",
    rho=0.25,
    rho_nl=0.12,
    diag=((-2.1, 0.03, 0.0, 1), (-1.0, 0.03, 0.25, 1)),
    coeffs=(
        (0, (2, 0), TrigCoeff(0.03, 0.01, 0.1, 1)),
        (0, (0, 2), TrigCoeff(0.10, 0.03, 0.6, 1)),
        (1, (0, 2), TrigCoeff(0.05, 0.02, 0.8, 1)),
    ),
    run=RunDefaults(N=7, length=210, seed=1, theta0=0.2, v0=(0.10, -0.12)),
    alpha=(math.sqrt(5) - 1) / 2,
)
print("fiber Jacobian injectivity margin:", system.injectivity_margin(8, 3))

n_build = 7
orbit_x = sample_skew_orbit(system, 0.2, (0.10, -0.12), 210, n_build)
atlas_x = build_atlas(orbit_x, n_build)
orbit_y = sample_skew_orbit(system, 0.2, (0.08, -0.11), 210, n_build)
atlas_y = build_atlas(orbit_y, n_build)
print(f"atlases cover {atlas_x.n_points} points (tail depth K={atlas_x.K})")

g = transition_jet(orbit_x, atlas_x, orbit_y, atlas_y, step=0, cap=4)
print("\ntransition map at step 0 (constant = y-chart image of x):")
for t, alpha, c in g.map.terms():
    if abs(c) > 1e-7:
        print(f"  coord {t}, monomial {alpha}: {c:+.6f}")

report = coherence_check(orbit_x, atlas_x, orbit_y, atlas_y, cap=4, n_steps=2)
print("\n" + report.to_text())

# Fault injection: force a non-resonant coefficient into one chart and
# transport the corrupted transition forward by equivariance; the defect
# must grow at the rate dictated by the violated relation, which is the
# mechanism that forbids such terms in the first place.
eps = choose_epsilon(spec, n_build).epsilon
growth = coherence_growth_check(
    orbit_x, atlas_x, orbit_y, atlas_y,
    slot=(1, (1, 1)), m0=1e-5, n_steps=8, cap=4, eps=eps,
)
print(growth.to_text())
