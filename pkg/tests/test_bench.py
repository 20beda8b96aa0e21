import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfem import bench
from ncfem.bench import ExactSolution, X, eoc, example_brinkman, example_quadcurl
from ncfem.errors import ContractViolation, IterationLimitError
from ncfem.mesh import global_dofs, unit_cube_mesh

RNG = np.random.default_rng(12)
POINTS = RNG.uniform(0.1, 0.9, (6, 3))


def fd_jacobian(fn, pts, step=1e-5):
    """Central differences; returns (P, k, 3)."""
    cols = []
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        cols.append((fn(pts + e) - fn(pts - e)) / (2 * step))
    return np.stack(cols, axis=-1)


def curl_of(jac):
    return np.stack([jac[:, 2, 1] - jac[:, 1, 2], jac[:, 0, 2] - jac[:, 2, 0], jac[:, 1, 0] - jac[:, 0, 1]], 1)


def laplace_fd(fn, pts, step=1e-3):
    out = -6 * fn(pts)
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        out = out + fn(pts + e) + fn(pts - e)
    return out / step**2


def rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


@pytest.mark.parametrize("exact", [example_quadcurl(), example_brinkman()], ids=["quadcurl", "brinkman"])
def test_derivatives_match_finite_differences(exact):
    jac = fd_jacobian(exact.field("value"), POINTS)
    assert rel(exact.field("grad")(POINTS).reshape(-1, 3, 3), jac) <= 1e-6
    assert rel(exact.field("curl")(POINTS), curl_of(jac)) <= 1e-6
    div_gap = exact.field("div")(POINTS)[:, 0] - np.trace(jac, axis1=1, axis2=2)
    assert np.abs(div_gap).max() <= 1e-6 * np.abs(jac).max()
    gc = fd_jacobian(exact.field("curl"), POINTS)
    assert rel(exact.field("gradcurl")(POINTS).reshape(-1, 3, 3), gc) <= 1e-6


def test_quadcurl_rhs_matches_finite_differences():
    exact = example_quadcurl()
    curl = exact.field("curl")
    base = exact.quadcurl_rhs(0.0, 1.5)(POINTS)
    cc = curl_of(fd_jacobian(curl, POINTS))
    assert rel(base, cc + 1.5 * exact(POINTS)) <= 1e-6
    high = exact.quadcurl_rhs(1.0, 1.5)(POINTS) - base
    lap_curl = lambda p: laplace_fd(curl, p)
    assert rel(high, -curl_of(fd_jacobian(lap_curl, POINTS, step=1e-3))) <= 1e-4


def test_brinkman_rhs_matches_finite_differences():
    exact = example_brinkman()
    f, g = exact.brinkman_rhs(0.3, 2.0)
    p_grad = fd_jacobian(exact.field("pressure"), POINTS)[:, 0]
    ref = -0.3 * laplace_fd(exact.field("value"), POINTS) + 2.0 * exact(POINTS) + p_grad
    assert rel(f(POINTS), ref) <= 1e-5
    assert np.abs(g(POINTS)).max() <= 1e-12


@pytest.mark.parametrize("exact", [example_quadcurl(), example_brinkman()], ids=["quadcurl", "brinkman"])
def test_examples_are_divergence_free_and_vanish_on_boundary(exact):
    pts = RNG.uniform(0, 1, (50, 3))
    assert np.abs(exact.field("div")(pts)).max() <= 1e-12
    assert bench.boundary_trace_max(exact.field("value")) <= 1e-12


def test_example_pressure():
    p = example_brinkman().field("pressure")(np.array([[0.0, 0.0, 0.0], [1.0, 0.5, 0.3]]))
    assert p[:, 0] == pytest.approx([0.25, 0.0])


@pytest.mark.parametrize("errors,expected", [((0.4, 0.1), [2.0]), ((0.4, 0.2), [1.0]), ((0.3, 0.3, 0.3), [0.0, 0.0])])
def test_eoc_examples(errors, expected):
    assert eoc(errors) == pytest.approx(expected)


def test_eoc_undefined_for_zero_errors():
    assert eoc([0.0, 0.1, 0.05]) == [None, pytest.approx(1.0)]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-12, 1e3), min_size=2, max_size=6), st.floats(1e-6, 1e6))
def test_eoc_is_scale_invariant(errors, scale):
    a = eoc(errors)
    b = eoc([e * scale for e in errors])
    assert all(math.isclose(x, y, abs_tol=1e-9) for x, y in zip(a, b))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-3.0, 6.0))
def test_eoc_recovers_power_laws(c, k):
    errs = [c * 2.0 ** (-k * j) for j in range(4)]
    assert eoc(errs) == pytest.approx([k] * 3, abs=1e-9)


def test_zero_against_zero():
    mesh = unit_cube_mesh(2)
    gmap = global_dofs(mesh, "Splus2", 2, "homogeneous")
    pmap = global_dofs(mesh, "S3", 2, "homogeneous")
    rec = bench.compute_errors(np.zeros(gmap.ndofs), gmap, mesh, None, "brinkman", (1.0, 1.0),
                               np.zeros(pmap.ndofs), pmap)
    assert rec.err_l2 == rec.err_curl == rec.err_h1_broken == rec.err_triple == rec.err_p == 0.0


x, y, z = X


@pytest.mark.parametrize("family,problem,field", [
    ("Splus1", "quadcurl", [y * z + x, x * x - z, 2 * x * y]),
    ("Splus2", "brinkman", [y - 3 * z + 1, x + 2 * z, 0.5 * x - y]),
])
def test_interpolant_of_space_member_has_no_error(family, problem, field):
    exact = ExactSolution(field, 0, "poly")
    mesh = unit_cube_mesh(2)
    gmap = global_dofs(mesh, family, 2)
    coeffs = bench.interpolate_global(gmap, mesh, exact.field("value"), exact.field("curl"))
    rec = bench.compute_errors(coeffs, gmap, mesh, exact, problem, (1.0, 1.0))
    assert max(rec.err_l2, rec.err_curl, rec.err_h1_broken, rec.err_triple) <= 1e-9


def test_run_config_contracts():
    with pytest.raises(ContractViolation):
        bench.RunConfig("stokes")
    with pytest.raises(ContractViolation):
        bench.RunConfig("brinkman", param=0.0)
    with pytest.raises(ContractViolation):
        bench.RunConfig("quadcurl", coef=-1.0)
    with pytest.raises(ContractViolation):
        bench.RunConfig("quadcurl", levels=0)
    assert bench.RunConfig("quadcurl", levels=3).divisions == [2, 4, 8]
    assert bench.RunConfig("brinkman").oversampling == 4


def test_short_brinkman_run_is_consistent():
    records = bench.run(bench.RunConfig("brinkman", levels=2))
    assert len(records) == 2
    for rec in records:
        assert rec.extras["div_uh_norm"] <= 1e-9
        assert rec.extras["residual"] <= 1e-10
    for col in bench.ERROR_COLUMNS:
        if col != "err_curl":
            assert getattr(records[1], col) <= getattr(records[0], col)


def test_short_quadcurl_run_keeps_multiplier_zero():
    (rec,) = bench.run(bench.RunConfig("quadcurl", levels=1))
    assert rec.extras["ph_norm"] <= 1e-9
    assert rec.err_p == pytest.approx(rec.extras["ph_norm"])


def test_solver_failure_names_the_level(monkeypatch):
    def fail(*_args, **_kw):
        raise IterationLimitError("stalled", 1.0, 5)

    monkeypatch.setattr(bench, "solve_sym_indef", fail)
    with pytest.raises(IterationLimitError, match="h=1/2") as info:
        bench.run(bench.RunConfig("brinkman", levels=1))
    assert info.value.iterations == 5


def test_unknown_quantity():
    with pytest.raises(ContractViolation):
        example_quadcurl().expressions("hessian")
