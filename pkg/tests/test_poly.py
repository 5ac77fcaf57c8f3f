import numpy as np
import pytest

from subres.poly import (
    GradedSpace,
    PolyError,
    PolyMap,
    TermClass,
    classify_term,
    compose_truncated,
    degree_slots,
    derivative_at,
    flag_violation,
    invert_flag_linear,
    invert_formal,
    max_coeff_delta,
    monomials_of_degree,
    poly_norm,
    preserves_flag,
    recenter,
    subres_split,
)
from subres.spectral import Spectrum

TWO_BAND = Spectrum(((-2.1, -2.1), (-1.0, -1.0)))
S11 = GradedSpace((1, 1))
S21 = GradedSpace((2, 1))
S1 = GradedSpace((1,))


def pmap(space, coeffs, deg):
    return PolyMap(space, space, deg, coeffs)


STAT_F = pmap(S11, {(0, (1, 0)): 0.12, (0, (0, 2)): 0.3, (1, (0, 1)): 0.35, (1, (1, 1)): 0.5}, 2)


class TestGradedSpace:
    def test_blocks(self):
        assert S21.dim == 3
        assert [S21.block_of(c) for c in range(3)] == [1, 1, 2]
        assert S21.type_of((2, 1, 3)) == (3, 3)
        assert S21.flag_level((0, 2)) == 2
        assert S21.flag_level((1, 0)) == 1
        assert S21.flag_level((0, 0)) == 0

    def test_bad_dims(self):
        with pytest.raises(PolyError):
            GradedSpace((0, 1))


class TestEvaluate:
    def test_zero_map(self):
        z = PolyMap.zero(S11, S11, 3)
        assert np.allclose(z.evaluate([1.3, -2.0]), [0.0, 0.0])

    def test_identity(self):
        ident = PolyMap.identity(S11)
        v = np.array([0.7, -0.4])
        assert np.allclose(ident.evaluate(v), v)

    def test_hand_example(self):
        p = pmap(S11, {(0, (1, 0)): 0.12, (0, (0, 2)): 0.3, (1, (0, 1)): 0.35}, 2)
        assert np.allclose(p.evaluate([1.0, 1.0]), [0.42, 0.35])

    def test_dimension_mismatch(self):
        with pytest.raises(PolyError):
            PolyMap.identity(S11).evaluate([1.0])


class TestCompose:
    def test_identity_outer(self):
        ident = PolyMap.identity(S11, max_degree=1)
        got = compose_truncated(ident, STAT_F, 2)
        assert max_coeff_delta(got, STAT_F) == 0.0

    def test_scalar_example(self):
        outer = pmap(S1, {(0, (2,)): 1.0}, 2)
        inner = pmap(S1, {(0, (1,)): 1.0, (0, (2,)): 1.0}, 2)
        got = compose_truncated(outer, inner, 3)
        assert got.coeffs == {(0, (2,)): 1.0, (0, (3,)): 2.0}

    def test_linear_is_matrix_product(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2))
        pa = PolyMap.from_linear(S11, S11, a)
        pb = PolyMap.from_linear(S11, S11, b)
        got = compose_truncated(pa, pb, 1)
        assert np.allclose(got.linear_matrix(), a @ b)

    def test_truncation_cap(self):
        outer = pmap(S1, {(0, (2,)): 1.0}, 2)
        inner = pmap(S1, {(0, (1,)): 1.0, (0, (2,)): 1.0}, 2)
        got = compose_truncated(outer, inner, 2)
        assert got.coeffs == {(0, (2,)): 1.0}

    def test_constant_terms_flow_through(self):
        inner = PolyMap.from_linear(S1, S1, [[1.0]], max_degree=1, constant=[0.5])
        outer = pmap(S1, {(0, (2,)): 1.0}, 2)
        got = compose_truncated(outer, inner, 2)
        # (x + 0.5)^2 = 0.25 + x + x^2
        assert got.coeffs == {(0, (0,)): 0.25, (0, (1,)): 1.0, (0, (2,)): 1.0}

    def test_associativity_random(self):
        rng = np.random.default_rng(11)
        for dims in [(1, 1), (2, 1), (2, 2)]:
            space = GradedSpace(dims)
            maps = []
            for _ in range(3):
                coeffs = {}
                for t in range(space.dim):
                    for n in range(1, 4):
                        for alpha in monomials_of_degree(space.dim, n):
                            if rng.random() < 0.4:
                                coeffs[(t, alpha)] = rng.normal() * 0.4
                maps.append(pmap(space, coeffs, 3))
            a, b, c = maps
            left = compose_truncated(compose_truncated(a, b, 3), c, 3)
            right = compose_truncated(a, compose_truncated(b, c, 3), 3)
            assert max_coeff_delta(left, right) <= 1e-10


class TestInvertFormal:
    def test_linear_inverse(self):
        m = np.array([[2.0, 1.0], [0.5, 2.0]])
        p = PolyMap.from_linear(S11, S11, m)
        q = invert_formal(p, 1)
        assert np.allclose(q.linear_matrix(), np.linalg.inv(m))

    def test_scalar_series(self):
        p = pmap(S1, {(0, (1,)): 1.0, (0, (2,)): 1.0}, 2)
        q = invert_formal(p, 3)
        assert q.coeffs == {(0, (1,)): 1.0, (0, (2,)): -1.0, (0, (3,)): 2.0}

    def test_two_sided_identity(self):
        q = invert_formal(STAT_F, 4)
        ident = PolyMap.identity(S11, max_degree=4)
        for a, b in [(STAT_F, q), (q, STAT_F)]:
            res = compose_truncated(a, b, 4) - ident
            assert res.max_abs_coeff() <= 1e-12

    def test_involution(self):
        q = invert_formal(STAT_F, 4)
        back = invert_formal(q, 4)
        assert max_coeff_delta(back, STAT_F.with_max_degree(4)) <= 1e-10

    def test_singular_rejected(self):
        p = PolyMap.from_linear(S11, S11, [[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(PolyError, match="singular"):
            invert_formal(p, 2)

    def test_constant_rejected(self):
        p = PolyMap.from_linear(S1, S1, [[1.0]], constant=[0.1])
        with pytest.raises(PolyError, match="p\\(0\\)"):
            invert_formal(p, 2)

    def test_flag_structural_inverse(self):
        m = np.array([[0.5, 0.3, 0.2], [0.1, 0.4, -0.2], [0.0, 0.0, 0.7]])
        inv = invert_flag_linear(S21, m)
        assert np.allclose(inv @ m, np.eye(3), atol=1e-14)
        assert inv[2, 0] == 0.0 and inv[2, 1] == 0.0


class TestDerivative:
    def test_at_zero_gives_linear_part(self):
        d = derivative_at(STAT_F, [0.0, 0.0])
        assert np.allclose(d.linear_matrix(), [[0.12, 0.0], [0.0, 0.35]])

    def test_hand_example(self):
        p = pmap(S11, {(0, (1, 0)): 1.0, (0, (0, 2)): 1.0, (1, (0, 1)): 1.0}, 2)
        d = derivative_at(p, [0.0, 1.0])
        assert np.allclose(d.linear_matrix(), [[1.0, 2.0], [0.0, 1.0]])

    def test_derivative_of_sub_resonant_stays_sub_resonant(self):
        rng = np.random.default_rng(7)
        subs, _ = degree_slots(TWO_BAND, (1, 1), (1, 1), 2)
        coeffs = {(0, (1, 0)): 0.1, (1, (0, 1)): 0.3}
        for t, alpha in subs:
            coeffs[(t, alpha)] = rng.normal()
        p = pmap(S11, coeffs, 2)
        for _ in range(100):
            v = rng.normal(size=2)
            d = derivative_at(p, v)
            _, n_part = subres_split(d, TWO_BAND)
            assert n_part.is_zero()


class TestClassify:
    def test_examples(self):
        assert classify_term(TWO_BAND, 1, (0, 2)) is TermClass.SUB_RESONANT
        assert classify_term(TWO_BAND, 2, (1, 1)) is TermClass.NON_RESONANT

    def test_identity_type_always_sub_resonant(self):
        for spec in [TWO_BAND, Spectrum(((-1.0, -1.0),)), Spectrum(((-3.3, -3.3), (-1.9, -1.9), (-1.0, -1.0)))]:
            for i in range(1, spec.l + 1):
                e = tuple(1 if j == i else 0 for j in range(1, spec.l + 1))
                assert classify_term(spec, i, e) is TermClass.SUB_RESONANT


class TestSubresSplit:
    def test_already_sub_resonant(self):
        p = pmap(S11, {(0, (0, 2)): 0.3, (1, (0, 1)): 0.35}, 2)
        s_part, n_part = subres_split(p, TWO_BAND)
        assert max_coeff_delta(s_part, p) == 0.0
        assert n_part.is_zero()

    def test_hand_example(self):
        p = pmap(S11, {(0, (0, 2)): 1.0, (1, (1, 1)): 1.0}, 2)
        s_part, n_part = subres_split(p, TWO_BAND)
        assert s_part.coeffs == {(0, (0, 2)): 1.0}
        assert n_part.coeffs == {(1, (1, 1)): 1.0}

    def test_partition_recomposes(self):
        rng = np.random.default_rng(3)
        coeffs = {}
        for t in range(2):
            for n in range(1, 4):
                for alpha in monomials_of_degree(2, n):
                    coeffs[(t, alpha)] = rng.normal()
        p = pmap(S11, coeffs, 3)
        s_part, n_part = subres_split(p, TWO_BAND)
        assert max_coeff_delta(s_part + n_part, p) == 0.0
        # idempotent
        assert subres_split(s_part, TWO_BAND)[1].is_zero()
        assert subres_split(n_part, TWO_BAND)[0].is_zero()


class TestFlag:
    def test_block_diagonal_linear(self):
        p = PolyMap.from_linear(S11, S11, np.diag([0.2, 0.5]))
        assert preserves_flag(p)

    def test_lower_entry_violates(self):
        p = PolyMap.from_linear(S11, S11, [[0.2, 0.0], [0.3, 0.5]])
        assert not preserves_flag(p)
        assert flag_violation(p) == pytest.approx(0.3)

    def test_hand_example(self):
        p = pmap(S11, {(0, (1, 0)): 1.0, (0, (0, 2)): 1.0, (1, (0, 1)): 1.0}, 2)
        assert preserves_flag(p)


class TestPolyNorm:
    def test_zero(self):
        assert poly_norm(PolyMap.zero(S11, S11, 2)) == (0.0, 0.0)

    def test_identity_1d(self):
        lo, hi = poly_norm(PolyMap.identity(S1))
        assert lo == 1.0 and hi == 1.0

    def test_brackets_true_norm(self):
        p = pmap(S1, {(0, (1,)): 1.0, (0, (2,)): 1.0}, 2)
        lo, hi = poly_norm(p)
        assert lo <= 2.0 <= hi
        assert lo == pytest.approx(2.0)
        assert hi == pytest.approx(2.0)

    def test_composition_norm_bound(self):
        # |R o P|_upper <= |R|_upper * |P|_upper^n for homogeneous R of degree n
        rng = np.random.default_rng(19)
        for _ in range(20):
            n = int(rng.integers(1, 4))
            coeffs_r = {}
            for t in range(2):
                for alpha in monomials_of_degree(2, n):
                    coeffs_r[(t, alpha)] = rng.normal()
            r = pmap(S11, coeffs_r, n)
            coeffs_p = {}
            m = int(rng.integers(1, 3))
            for t in range(2):
                for alpha in monomials_of_degree(2, m):
                    coeffs_p[(t, alpha)] = rng.normal()
            p = pmap(S11, coeffs_p, m)
            comp = compose_truncated(r, p, n * m)
            bound = poly_norm(r).upper * poly_norm(p).upper ** n
            assert poly_norm(comp).upper <= bound * (1 + 1e-12)


class TestHomogeneity:
    def test_block_scaling_identity(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            n = int(rng.integers(1, 4))
            alpha = monomials_of_degree(3, n)[int(rng.integers(0, len(monomials_of_degree(3, n))))]
            t = int(rng.integers(0, 3))
            p = PolyMap(S21, S21, n, {(t, alpha): rng.normal()})
            s = S21.type_of(alpha)
            v = rng.normal(size=3)
            a = rng.uniform(0.5, 2.0, size=2)
            scaled = v.copy()
            scaled[:2] *= a[0]
            scaled[2] *= a[1]
            lhs = p.evaluate(scaled)
            rhs = (a[0] ** s[0]) * (a[1] ** s[1]) * p.evaluate(v)
            assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


class TestRecenter:
    def test_linear_unchanged(self):
        p = PolyMap.from_linear(S11, S11, [[0.3, 0.1], [0.0, 0.5]])
        g = recenter(p, [0.2, -0.1])
        assert max_coeff_delta(g, p) <= 1e-15

    def test_quadratic_example(self):
        # (a x + p y^2, b y) recentered at (u, w):
        # (a t1 + 2 p w t2 + p t2^2, b t2)
        a, b, pp = 0.12, 0.35, 0.3
        f = pmap(S11, {(0, (1, 0)): a, (0, (0, 2)): pp, (1, (0, 1)): b}, 2)
        u, w = 0.07, -0.2
        g = recenter(f, [u, w])
        expect = pmap(
            S11,
            {(0, (1, 0)): a, (0, (0, 1)): 2 * pp * w, (0, (0, 2)): pp, (1, (0, 1)): b},
            2,
        )
        assert max_coeff_delta(g, expect) <= 1e-15
        assert not g.has_constant_term()


class TestSubresClosure:
    def test_composition_stays_sub_resonant_two_band(self):
        # for this spectrum the sub-resonant maps with invertible linear
        # part are closed under composition: degree stays <= d and every
        # term classifies sub-resonant, without truncation
        rng = np.random.default_rng(31)
        for dims in [(1, 1), (2, 1)]:
            space = GradedSpace(dims)
            for _ in range(25):
                maps = []
                for _ in range(2):
                    coeffs = {}
                    for n in (1, 2):
                        subs, _ = degree_slots(TWO_BAND, dims, dims, n)
                        for t, alpha in subs:
                            coeffs[(t, alpha)] = rng.normal() * 0.5
                    # keep linear part invertible
                    for c in range(space.dim):
                        alpha = tuple(1 if j == c else 0 for j in range(space.dim))
                        coeffs[(c, alpha)] = coeffs.get((c, alpha), 0.0) + 1.5
                    maps.append(pmap(space, coeffs, 2))
                comp = compose_truncated(maps[0], maps[1], 4)
                assert comp.max_abs_coeff(min_degree=3) <= 1e-12
                _, n_part = subres_split(comp.truncate(2), TWO_BAND)
                assert n_part.max_abs_coeff() <= 1e-12
                assert preserves_flag(comp.truncate(2))


def random_flag_matrix(space, rng, scale=0.5):
    dim = space.dim
    m = np.zeros((dim, dim))
    for t in range(dim):
        for c in range(dim):
            bt, bc = space.block_of(t), space.block_of(c)
            if bt < bc:
                m[t, c] = scale * rng.normal()
            elif bt == bc:
                m[t, c] = (1.0 if t == c else 0.0) + 0.3 * rng.normal()
    if abs(np.linalg.det(m)) < 1e-3:
        return random_flag_matrix(space, rng, scale)
    return m


class TestFlagOnlyDependence:
    def test_conjugated_span_equals_sub_resonant_span(self):
        # executable form of "the sub-resonant class depends only on the
        # fast flag": conjugating the monomial basis by a flag-preserving
        # change of basis spans exactly the same space
        rng = np.random.default_rng(41)
        for dims in [(1, 1), (2, 1)]:
            space = GradedSpace(dims)
            for _ in range(10):
                m = random_flag_matrix(space, rng)
                a = PolyMap.from_linear(space, space, m)
                a_inv = PolyMap.from_linear(space, space, invert_flag_linear(space, m))
                for n in range(1, 3):
                    subs, nons = degree_slots(TWO_BAND, dims, dims, n)
                    all_slots = list(subs) + list(nons)
                    col = {slot: j for j, slot in enumerate(all_slots)}
                    rows = []
                    for t, alpha in subs:
                        mono = PolyMap(space, space, n, {(t, alpha): 1.0})
                        conj = compose_truncated(
                            compose_truncated(a, mono, n), a_inv, n
                        )
                        vec = np.zeros(len(all_slots))
                        for (tt, aa), c in conj.coeffs.items():
                            vec[col[(tt, aa)]] = c
                        rows.append(vec)
                    basis = np.zeros((len(subs), len(all_slots)))
                    for j, slot in enumerate(subs):
                        basis[j, col[slot]] = 1.0
                    stacked = np.vstack([np.array(rows), basis])
                    svals = np.linalg.svd(stacked, compute_uv=False)
                    k = len(subs)
                    assert svals[k - 1] > 1e-10
                    if len(svals) > k:
                        assert svals[k] < 1e-10
