import itertools

import numpy as np
import pytest
import sympy as sy
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfem import polyspace as ps
from ncfem.errors import ContractViolation

FAMILIES = ("S0", "S1", "S2", "S3", "Vbubble", "Ububble", "Splus1", "Splus2")
ANISO = ps.Box3((0.3, -0.2, 1.0), (0.5, 0.125, 2.0))

halfwidth = st.floats(0.05, 4.0)
coord = st.floats(-5.0, 5.0)


def random_coeffs(rng, m, ncomp, n):
    return rng.standard_normal((m, ncomp, n, n, n))


# --- closed-form monomial integration, written independently of the package ---

def box_monomial_integral(exps, lower, upper):
    out = 1.0
    for e, a, b in zip(exps, lower, upper):
        out *= (b ** (e + 1) - a ** (e + 1)) / (e + 1)
    return out


# --- literal construction of the conforming spaces in physical coordinates ---

XS = sy.symbols("x0:3", real=True)
XI = sy.symbols("s0:3", real=True)


def to_local_tensor(exprs, cell, n):
    """Coefficient tensor in local coordinates of physical sympy expressions."""
    subs = {x: c + h * s for x, c, h, s in zip(XS, cell.center, cell.halfwidths, XI)}
    out = np.zeros((len(exprs), n, n, n))
    for comp, e in enumerate(exprs):
        poly = sy.Poly(sy.expand(sy.sympify(e).subs(subs)), *XI)
        for mon, val in poly.terms():
            out[(comp,) + mon] = float(val)
    return out


def to_local_tensor_stack(gens, cell, n):
    return np.array([to_local_tensor(g, cell, n) for g in gens])


def literal_twists(r):
    x = XS
    out = []
    for i in range(3):
        others = [k for k in range(3) if k != i]
        for degs in itertools.product(range(r), repeat=2):
            if sum(degs) != r - 1:
                continue
            m = x[others[0]] ** degs[0] * x[others[1]] ** degs[1]
            w = [0, 0, 0]
            w[i] = m
            out.append([x[1] * x[2] * (w[1] - w[2]), x[2] * x[0] * (w[2] - w[0]),
                        x[0] * x[1] * (w[0] - w[1])])
    return out


def sy_curl(v):
    x = XS
    return [sy.diff(v[2], x[1]) - sy.diff(v[1], x[2]), sy.diff(v[0], x[2]) - sy.diff(v[2], x[0]),
            sy.diff(v[1], x[0]) - sy.diff(v[0], x[1])]


def literal_s1(r):
    x = XS
    gens = []
    for e in itertools.product(range(r + 1), repeat=3):
        if ps.superlinear_degree(e) <= r:
            m = x[0] ** e[0] * x[1] ** e[1] * x[2] ** e[2]
            gens.append([sy.diff(m, v) for v in x])
    for e in itertools.product(range(r), repeat=3):
        if sum(e) <= r - 1:
            m = x[0] ** e[0] * x[1] ** e[1] * x[2] ** e[2]
            for j in range(3):
                a = [0, 0, 0]
                a[j] = m
                gens.append([a[1] * x[2] - a[2] * x[1], a[2] * x[0] - a[0] * x[2],
                             a[0] * x[1] - a[1] * x[0]])
    return gens + literal_twists(r)


def literal_s2(r):
    x = XS
    gens = []
    for e in itertools.product(range(r), repeat=3):
        if sum(e) <= r - 1:
            m = x[0] ** e[0] * x[1] ** e[1] * x[2] ** e[2]
            for j in range(3):
                a = [0, 0, 0]
                a[j] = m
                gens.append(a)
    return gens + [sy_curl(t) for t in literal_twists(r)]


def same_span(a, b):
    n = max(a.shape[-1], b.shape[-1])
    a, b = ps.pad(a, n), ps.pad(b, n)
    ra, rb = ps.coefficient_rank(a), ps.coefficient_rank(b)
    return ra == rb == ps.coefficient_rank(np.concatenate([a, b]))


def contains(big, small):
    n = max(big.shape[-1], small.shape[-1])
    big, small = ps.pad(big, n), ps.pad(small, n)
    return ps.coefficient_rank(np.concatenate([big, small])) == ps.coefficient_rank(big)


# --------------------------------------------------------------------------


@pytest.mark.parametrize("exps,expected", [((2, 1, 3), 5), ((1, 1, 1), 0), ((0, 4, 2), 6)])
def test_superlinear_degree(exps, expected):
    assert ps.superlinear_degree(exps) == expected


@pytest.mark.parametrize("family,r,dim", [
    ("S0", 2, 20), ("S0", 3, 32), ("S1", 2, 36), ("S1", 3, 66), ("S2", 2, 18), ("S2", 3, 39),
    ("Vbubble", 2, 12), ("Ububble", 2, 12), ("Vbubble", 3, 36), ("Splus1", 2, 48),
    ("Splus2", 2, 30), ("Splus2", 3, 75),
])
def test_dimensions(family, r, dim):
    for cell in (ps.Box3.reference(), ANISO):
        space = ps.build_space(family, r, cell)
        assert space.dim == dim
        assert space.rank() == dim


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("r", [2, 3])
def test_dimension_formula_matches_rank(family, r):
    assert ps.build_space(family, r, ANISO).rank() == ps.dimension_formula(family, r)


def test_s0_order_one_is_trilinear():
    assert ps.build_space("S0", 1, ps.Box3.reference()).dim == 8


@pytest.mark.parametrize("family,r", [("S1", 1), ("S0", 0), ("S2", 5), ("Splus1", 2.0)])
def test_order_out_of_range(family, r):
    with pytest.raises(ContractViolation):
        ps.build_space(family, r, ps.Box3.reference())


def test_family_aliases():
    assert ps.canonical_family("Ububle") == "Ububble"
    with pytest.raises(ContractViolation):
        ps.canonical_family("S4")


@pytest.mark.parametrize("r", [2, 3])
def test_s1_matches_literal_construction(r):
    oracle = to_local_tensor_stack(literal_s1(r), ANISO, r + 1)
    assert same_span(ps.build_space("S1", r, ANISO).coeffs, oracle)


@pytest.mark.parametrize("r", [2, 3])
def test_s2_matches_literal_construction(r):
    oracle = to_local_tensor_stack(literal_s2(r), ANISO, r + 1)
    assert same_span(ps.build_space("S2", r, ANISO).coeffs, oracle)


@pytest.mark.parametrize("r", [2, 3])
def test_local_complex_inclusions(r):
    h = ANISO.halfwidths
    s0, s1, s2 = (ps.build_space(f, r, ANISO).coeffs for f in ("S0", "S1", "S2"))
    assert contains(s1, ps.grad(s0, h))
    assert contains(s2, ps.curl(s1, h))
    pr2 = np.array([ps.unit(1, 0, e, r - 1) for e in ps.monomials_total(r - 2)])
    assert same_span(ps.div(s2, h), pr2)


@pytest.mark.parametrize("r", [2, 3])
def test_enriched_spaces_are_direct_sums(r):
    for plus, base, bub in (("Splus1", "S1", "Vbubble"), ("Splus2", "S2", "Ububble")):
        big = ps.build_space(plus, r, ANISO).coeffs
        parts = np.concatenate([ps.pad(ps.build_space(base, r, ANISO).coeffs, big.shape[-1]),
                                ps.build_space(bub, r, ANISO).coeffs])
        assert same_span(big, parts)
        assert len(big) == ps.dimension_formula(base, r) + 6 * r * (r - 1)


def _face_points(face, npts=6):
    x, w = ps.gauss_1d(npts)
    a, s = divmod(face, 2)
    g = np.stack(np.meshgrid(x, x, indexing="ij"), -1).reshape(-1, 2)
    pts = np.zeros((len(g), 3))
    pts[:, [b for b in range(3) if b != a]] = g
    pts[:, a] = 2 * s - 1
    return pts, np.outer(w, w).ravel()


@pytest.mark.parametrize("r", [2, 3])
def test_bubble_face_identity(r):
    v, _ = ps.build_bubbles(r, ANISO)
    for f in range(6):
        pts, _ = _face_points(f)
        idx = np.flatnonzero(v.face_index == f)
        cz = np.moveaxis(ps.eval_points(ps.curl(v.coeffs[idx], ANISO.halfwidths), pts), 1, -1)
        q = np.moveaxis(ps.eval_points(v.face_q[idx], pts), 1, -1)
        bf = ps.eval_points(ps.face_bubble(f), pts)
        lhs = np.cross(cz, ps.outward_normal(f))
        res = lhs + bf[None, :, None] ** 2 * q / ANISO.halfwidths[f // 2]
        assert np.abs(res).max() <= 1e-10 * np.abs(lhs).max()


@pytest.mark.parametrize("r", [2, 3])
def test_bubbles_vanish_on_boundary(r):
    v, u = ps.build_bubbles(r, ANISO)
    scale = np.abs(v.coeffs).max()
    for f in range(6):
        pts, _ = _face_points(f)
        assert np.abs(ps.eval_points(v.coeffs, pts)).max() <= 1e-12 * scale
        normal = ps.eval_points(u.coeffs, pts)[:, f // 2]
        assert np.abs(normal).max() <= 1e-10 * np.abs(u.coeffs).max()


@pytest.mark.parametrize("r", [2, 3])
def test_bubble_orthogonality(r):
    v, u = ps.build_bubbles(r, ANISO)
    for space, deg in ((u, r - 2), (v, r - 3)):
        if deg < 0:
            continue
        test = np.array([ps.unit(3, c, e, deg + 1) for c in range(3) for e in ps.monomials_total(deg)])
        g = ps.reference_gram(space.coeffs, test)
        assert np.abs(g).max() <= 1e-10 * np.sqrt(np.abs(ps.reference_gram(space.coeffs, space.coeffs)).max())


@pytest.mark.parametrize("r", [2, 3])
def test_curl_is_injective_on_bubbles(r):
    v, u = ps.build_bubbles(r, ANISO)
    assert ps.coefficient_rank(u.coeffs) == v.dim == 6 * r * (r - 1)


def test_diff_examples():
    cell = ps.Box3.reference()
    q = ps.PolyVec.from_terms(cell, {(0, (2, 1, 0)): 1.0})
    assert ps.diff(ps.diff(q, "grad"), "curl").is_zero()
    v = ps.PolyVec.from_terms(cell, {(0, (0, 1, 1)): 1.0}, ncomp=3)
    assert ps.diff(ps.diff(v, "curl"), "div").is_zero()
    w = ps.PolyVec.from_terms(cell, {(2, (1, 1, 0)): 1.0}, ncomp=3)
    expected = ps.PolyVec.from_terms(cell, {(0, (1, 0, 0)): 1.0, (1, (0, 1, 0)): -1.0}, ncomp=3)
    assert (ps.diff(w, "curl") - expected).is_zero()


def test_diff_rejects_wrong_component_count():
    q = ps.PolyVec.from_terms(ps.Box3.reference(), {(0, (1, 0, 0)): 1.0})
    with pytest.raises(ContractViolation):
        ps.diff(q, "curl")


@pytest.mark.parametrize("exps,expected", [((0, 0, 0), 8.0), ((2, 0, 0), 8.0 / 3.0), ((3, 1, 0), 0.0)])
def test_reference_integrals(exps, expected):
    rule = ps.gauss_tensor(ps.Box3.reference(), 4)
    val = rule.integrate(lambda x: x[:, 0] ** exps[0] * x[:, 1] ** exps[1] * x[:, 2] ** exps[2])
    assert val == pytest.approx(expected, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 9), st.tuples(halfwidth, halfwidth, halfwidth), st.tuples(coord, coord, coord),
       st.integers(0, 2**31 - 1))
def test_quadrature_exact_for_declared_degree(degree, hw, center, seed):
    cell = ps.Box3(center, hw)
    rule = ps.gauss_tensor(cell, degree)
    rng = np.random.default_rng(seed)
    terms = [(e, rng.standard_normal()) for e in ps.monomials_total(degree)]

    def f(x):
        return sum(c * x[:, 0] ** e[0] * x[:, 1] ** e[1] * x[:, 2] ** e[2] for e, c in terms)

    exact = sum(c * box_monomial_integral(e, cell.lower, cell.upper) for e, c in terms)
    scale = sum(abs(c) * box_monomial_integral(e, cell.lower, cell.upper) if all(k % 2 == 0 for k in e)
                else abs(c) * np.prod(np.maximum(np.abs(cell.lower), np.abs(cell.upper)) ** e) * cell.volume
                for e, c in terms)
    assert abs(rule.integrate(f) - exact) <= 1e-13 * max(scale, 1e-300) + 1e-300


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.tuples(halfwidth, halfwidth, halfwidth), st.integers(0, 2**31 - 1))
def test_complex_identities_on_random_tensors(n, hw, seed):
    rng = np.random.default_rng(seed)
    s = random_coeffs(rng, 2, 1, n)
    v = random_coeffs(rng, 2, 3, n)
    assert np.abs(ps.curl(ps.grad(s, hw), hw)).max() <= 1e-12 * max(1.0, np.abs(s).max() / min(hw) ** 2)
    assert np.abs(ps.div(ps.curl(v, hw), hw)).max() <= 1e-12 * max(1.0, np.abs(v).max() / min(hw) ** 2)


@settings(max_examples=30, deadline=None)
@given(st.tuples(halfwidth, halfwidth, halfwidth), st.tuples(coord, coord, coord), st.integers(0, 2**31 - 1))
def test_derivative_matches_central_difference(hw, center, seed):
    cell = ps.Box3(center, hw)
    rng = np.random.default_rng(seed)
    c = random_coeffs(rng, 1, 1, 3)[0]
    p = ps.PolyVec(c, cell)
    g = ps.diff(p, "grad")
    x = cell.to_global(rng.uniform(-0.8, 0.8, (4, 3)))
    for axis in range(3):
        step = 1e-4 * cell.halfwidths[axis]
        e = np.zeros(3)
        e[axis] = step
        fd = (p(x + e) - p(x - e))[:, 0] / (2 * step)
        ref = np.abs(g(x)).max() + np.abs(p(x)).max() / min(hw)
        assert np.allclose(g(x)[:, axis], fd, atol=1e-5 * ref)


@settings(max_examples=30, deadline=None)
@given(st.tuples(halfwidth, halfwidth, halfwidth), st.tuples(coord, coord, coord))
def test_box_coordinate_round_trip(hw, center):
    cell = ps.Box3(center, hw)
    pts = np.random.default_rng(0).uniform(-1, 1, (5, 3))
    assert np.allclose(cell.to_local(cell.to_global(pts)), pts)
    assert cell.volume == pytest.approx(np.prod(2 * np.array(hw)))


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["S1", "S2", "Splus1", "Splus2"]), st.tuples(halfwidth, halfwidth, halfwidth))
def test_spaces_are_translation_invariant(family, hw):
    a = ps.build_space(family, 2, ps.Box3((0.0, 0.0, 0.0), hw)).coeffs
    b = ps.build_space(family, 2, ps.Box3((3.0, -1.0, 7.5), hw)).coeffs
    assert same_span(a, b)


def test_box_rejects_degenerate_widths():
    with pytest.raises(ContractViolation):
        ps.Box3((0, 0, 0), (1.0, 0.0, 1.0))
