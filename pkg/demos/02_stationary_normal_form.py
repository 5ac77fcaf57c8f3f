"""Normal form of a fixed-point contraction, solved two ways.

The germ F(x, y) = (0.12 x + 0.3 y^2, 0.35 y + 0.5 xy) has one resonant
quadratic term (y^2 into the fast coordinate: -2.1 <= 2*(-1)) and one
non-resonant term (xy into the slow coordinate).  The coordinate change
H(x, y) = (x, y + h xy) with h = q / (b (1 - a)) removes the xy term;
the engine must find exactly that h, and the normal form keeps only
P(x, y) = (0.12 x + 0.3 y^2, 0.35 y).
"""
from subres import (
    GradedSpace,
    PolyMap,
    Spectrum,
    build_atlas,
    compose_truncated,
    conjugacy_residual_jet,
    invert_formal,
    make_stationary,
    residual_scaling,
)

spec = Spectrum(((-2.1, -2.1), (-1.0, -1.0)))
space = GradedSpace((1, 1))
a, b, p, q = 0.12, 0.35, 0.3, 0.5
germ = PolyMap(
    space, space, 2,
    {(0, (1, 0)): a, (0, (0, 2)): p, (1, (0, 1)): b, (1, (1, 1)): q},
)
orbit = make_stationary(spec, space, germ, length=6)

atlas = build_atlas(orbit, N=4)
h_solved = atlas.H[0].coeffs[(1, (1, 1))]
print("solved h :", h_solved)
print("closed form q/(b(1-a)):", q / (b * (1 - a)))

print("\nnormal form P:")
for t, alpha, c in atlas.P[0].terms():
    print(f"  coord {t}, monomial {alpha}: {c}")

# Conjugacy check by honest recomposition H' o F o H^{-1} = P + O(N+1).
conj = compose_truncated(
    compose_truncated(atlas.H[0], germ, 4), invert_formal(atlas.H[0], 4), 4
)
resid = max(
    abs(conj.coeffs.get(k, 0.0) - atlas.P[0].coeffs.get(k, 0.0))
    for k in set(conj.coeffs) | set(atlas.P[0].coeffs)
)
print("\njet residual through degree 4:", resid)

report = conjugacy_residual_jet(orbit, atlas)
print(report.to_text())

# The evaluation residual shrinks like r^(N+1): the log-log slope across
# three decades of radius certifies the truncation order.
atlas3 = build_atlas(orbit, N=3)
scaling = residual_scaling(orbit, atlas3, [1e-1, 1e-2, 1e-3])
print(scaling.to_text())
