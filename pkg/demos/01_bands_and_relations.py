"""Bands, the narrow band condition, and sub-resonance relations.

A spectrum is a list of log-scale contraction bands (lambda_i, mu_i).
The narrow band condition mu_i + mu_l < lambda_i makes the set of
relations lambda_i <= sum_j s_j mu_j finite: their degree is capped by
d = floor(lambda_1 / mu_l), and they are exactly the monomial types that
survive in the polynomial normal form.
"""
from subres import (
    Spectrum,
    choose_epsilon,
    contraction_margin,
    degree_bound,
    enumerate_relations,
    is_narrow_band,
)

two_band = Spectrum(((-2.1, -2.1), (-1.0, -1.0)))
print("spectrum:", two_band)
print("narrow band:", is_narrow_band(two_band))

d = degree_bound(two_band)
print("degree bound d =", d)

print("sub-resonance relations (target block; type vector):")
for rel in enumerate_relations(two_band):
    print("  ", rel)

# The slack budget below guarantees a strict margin (n+2)*eps in every
# non-resonant direction, which is what makes the twisted solves contract.
eps = choose_epsilon(two_band, max_degree=4)
print("epsilon =", eps.epsilon, "valid through degree", eps.max_degree)

# Above degree d every type is non-resonant, so the degree-N stage of the
# construction contracts with this factor; it must be < 1.
for N in (3, 4, 5):
    print(f"k' at N={N}:", contraction_margin(two_band, N, eps))

# A single 1/2-pinched band only admits the linear relation: such systems
# linearize (d = 1).
one_band = Spectrum(((-1.0, -1.0),))
print("\nsingle band:", one_band)
print("relations:", [str(r) for r in enumerate_relations(one_band)])
print("d =", degree_bound(one_band), "(linearizable)")

# A wide band breaks the condition.
wide = Spectrum(((-2.0, -0.6),))
print("\nwide band narrow?", is_narrow_band(wide))
