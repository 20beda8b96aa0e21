"""Manufactured-solution benchmarks for both mixed schemes.

Exact fields are sympy expression trees; every derivative and right-hand side
is produced by symbolic differentiation and compiled with ``lambdify``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sy

from . import assembly as asm
from . import polyspace as ps
from .errors import ContractViolation, IterationLimitError
from .linsolve import solve_sym_indef
from .mesh import global_dofs, unit_cube_mesh

X = sy.symbols("x y z", real=True)


def _curl(u):
    x, y, z = X
    return sy.Matrix([sy.diff(u[2], y) - sy.diff(u[1], z),
                      sy.diff(u[0], z) - sy.diff(u[2], x),
                      sy.diff(u[1], x) - sy.diff(u[0], y)])


def _grad(s):
    return sy.Matrix([sy.diff(s, v) for v in X])


def _jacobian(u):
    """Row-major gradient of each component: entry 3*i + j is d u_i / d x_j."""
    return sy.Matrix([sy.diff(u[i], X[j]) for i in range(3) for j in range(3)])


def _div(u):
    return sum(sy.diff(u[i], X[i]) for i in range(3))


def _laplace(u):
    return u.applyfunc(lambda c: sum(sy.diff(c, v, 2) for v in X))


def compile_field(exprs):
    """Vectorised callable ``points (P, 3) -> (P, k)`` for a list of sympy expressions."""
    exprs = list(exprs)
    fn = sy.lambdify(X, exprs, modules="numpy", cse=True)

    def call(pts):
        pts = np.asarray(pts, float).reshape(-1, 3)
        vals = fn(pts[:, 0], pts[:, 1], pts[:, 2])
        return np.stack([np.broadcast_to(np.asarray(v, float), (len(pts),)) for v in vals], axis=1)

    return call


class ExactSolution:
    """Velocity-like vector field and pressure with symbolic derivatives."""

    def __init__(self, u, p=0, name=""):
        self.u = sy.Matrix(u)
        self.p = sy.sympify(p)
        self.name = name
        self._cache = {}

    def expressions(self, quantity):
        u = self.u
        table = {
            "value": lambda: u,
            "curl": lambda: _curl(u),
            "div": lambda: sy.Matrix([_div(u)]),
            "grad": lambda: _jacobian(u),
            "gradcurl": lambda: _jacobian(_curl(u)),
            "pressure": lambda: sy.Matrix([self.p]),
        }
        if quantity not in table:
            raise ContractViolation(f"unknown quantity {quantity!r}")
        return table[quantity]()

    def field(self, quantity):
        if quantity not in self._cache:
            self._cache[quantity] = compile_field(self.expressions(quantity))
        return self._cache[quantity]

    def __call__(self, pts):
        return self.field("value")(pts)

    def quadcurl_rhs(self, mu, gamma):
        """Load of ``mu curl(-Laplace) curl u + curl curl u + gamma u`` (pressure-free)."""
        w = _curl(self.u)
        f = -mu * _curl(_laplace(w)) + _curl(w) + gamma * self.u
        return compile_field(f)

    def brinkman_rhs(self, nu, alpha):
        f = -nu * _laplace(self.u) + alpha * self.u + _grad(self.p)
        return compile_field(f), compile_field([_div(self.u)])


def example_quadcurl():
    """Divergence-free trigonometric field vanishing on the unit-cube boundary."""
    x, y, z = X
    s, c, pi = sy.sin, sy.cos, sy.pi
    u = [
        s(pi * x) ** 3 * s(pi * y) ** 2 * s(pi * z) ** 2 * c(pi * y) * c(pi * z),
        s(pi * y) ** 3 * s(pi * z) ** 2 * s(pi * x) ** 2 * c(pi * z) * c(pi * x),
        -2 * s(pi * z) ** 3 * s(pi * x) ** 2 * s(pi * y) ** 2 * c(pi * x) * c(pi * y),
    ]
    return ExactSolution(u, 0, "quadcurl")


def example_brinkman():
    """Polynomial curl field with a mean-zero trilinear pressure."""
    x, y, z = X
    psi = sy.Matrix([
        y**2 * (1 - y) ** 2 * x * (1 - x) * z**2 * (1 - z) ** 3,
        x**2 * (1 - x) ** 2 * y * (1 - y) * z**2 * (1 - z) ** 3,
        0,
    ])
    p = (x - sy.Rational(1, 2)) * (y - sy.Rational(1, 2)) * (1 - z)
    return ExactSolution(sy.expand(_curl(psi)), p, "brinkman")


# ---------------------------------------------------------------------------
# errors


@dataclass
class ErrorRecord:
    h: float
    dofs: int
    err_l2: float
    err_curl: float
    err_h1_broken: float
    err_triple: float
    err_p: float
    extras: dict = field(default_factory=dict)


ERROR_COLUMNS = ("err_l2", "err_curl", "err_h1_broken", "err_triple", "err_p")


def discrete_values(coeffs, gmap, mesh, quantity, npts):
    """Values of a derived quantity of a discrete function at every cell's Gauss points: (C, k, Q)."""
    tab = asm.tabulate(gmap.element, quantity, npts)
    loc = coeffs[gmap.cell_dofs] * gmap.signs
    return np.einsum("cj,jkq->ckq", loc, tab)


def exact_values(fn, mesh, npts):
    pts, _ = asm.quadrature_points(mesh, npts)
    vals = fn(pts.reshape(-1, 3))
    return np.moveaxis(vals.reshape(mesh.nc, pts.shape[1], -1), 1, 2)


def l2_norm(values, w):
    return math.sqrt(max(float(np.einsum("ckq,q->", values**2, w)), 0.0))


def error_npts(gmap):
    return ps.points_for_degree(gmap.element.nodal_coeffs.shape[-1] - 1 + 6)


def field_error(coeffs, gmap, mesh, exact_fn, quantity, npts=None):
    npts = npts or error_npts(gmap)
    _, w = asm.quadrature_points(mesh, npts)
    uh = discrete_values(coeffs, gmap, mesh, quantity, npts)
    ref = 0.0 if exact_fn is None else exact_values(exact_fn, mesh, npts)
    return l2_norm(ref - uh, w)


def compute_errors(coeffs, gmap, mesh, exact, problem, params, pressure=None, pmap=None):
    """Error norms of a discrete velocity (and pressure) against an exact solution.

    ``problem`` selects the energy norm: "quadcurl" uses ``params = (mu, gamma)``
    and the broken seminorm of the curl; "brinkman" uses ``(nu, alpha)`` and the
    broken seminorm of the field itself.
    """
    ex = (lambda q: None) if exact is None else exact.field
    l2 = field_error(coeffs, gmap, mesh, ex("value"), "value")
    ecurl = field_error(coeffs, gmap, mesh, ex("curl"), "curl")
    ep = 0.0
    if pressure is not None:
        ep = field_error(pressure, pmap, mesh, ex("pressure"), "value")
    if problem == "quadcurl":
        mu, _gamma = params
        h1 = field_error(coeffs, gmap, mesh, ex("gradcurl"), "gradcurl")
        triple = math.sqrt(l2**2 + ecurl**2 + mu * h1**2)
        extras = {}
    elif problem == "brinkman":
        nu, alpha = params
        h1 = field_error(coeffs, gmap, mesh, ex("grad"), "grad")
        ediv = field_error(coeffs, gmap, mesh, ex("div"), "div")
        triple = math.sqrt(nu * h1**2 + alpha * l2**2 + max(nu, alpha) * ediv**2)
        extras = {"err_div": ediv}
    else:
        raise ContractViolation(f"unknown problem {problem!r}")
    return ErrorRecord(mesh.h, gmap.ndofs, l2, ecurl, h1, triple, ep, extras)


def eoc(errors):
    """Orders ``log2(e_k / e_{k+1})``; ``None`` where undefined."""
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a is None or b is None or a <= 0 or b <= 0:
            out.append(None)
        else:
            out.append(math.log2(a / b))
    return out


# ---------------------------------------------------------------------------
# runs


DEFAULT_OVERSAMPLING = {"quadcurl": 12, "brinkman": 4}


@dataclass
class RunConfig:
    problem: str
    order: int = 2
    levels: int = 3
    param: float = 1.0
    coef: float = 1.0
    tol: float = 1e-10
    solver: str = "direct"
    oversampling: int | None = None

    def __post_init__(self):
        if self.oversampling is None:
            # the quad-curl multiplier is sensitive to load quadrature error
            self.oversampling = DEFAULT_OVERSAMPLING.get(self.problem, 4)
        if self.problem not in ("quadcurl", "brinkman"):
            raise ContractViolation(f"unknown problem {self.problem!r}")
        if self.param <= 0 or self.coef < 0:
            raise ContractViolation("need a positive viscosity-type parameter and a non-negative reaction")
        if self.levels < 1:
            raise ContractViolation("need at least one level")

    @property
    def divisions(self):
        return [2**k for k in range(1, self.levels + 1)]


def boundary_trace_max(fn, ndiv=8, npts=4):
    """Largest |fn| over Gauss points of the unit-cube boundary faces."""
    x, _ = ps.gauss_1d(npts)
    s = (np.add.outer(np.arange(ndiv), (x + 1) / 2) / ndiv).ravel()
    a, b = np.meshgrid(s, s, indexing="ij")
    worst = 0.0
    for axis in range(3):
        for side in (0.0, 1.0):
            pts = np.zeros((a.size, 3))
            others = [k for k in range(3) if k != axis]
            pts[:, axis] = side
            pts[:, others[0]] = a.ravel()
            pts[:, others[1]] = b.ravel()
            worst = max(worst, float(np.abs(fn(pts)).max()))
    return worst


def run_level(config, ndiv, exact, f, g=None):
    mesh = unit_cube_mesh(ndiv)
    if config.problem == "quadcurl":
        system = asm.assemble_quadcurl(mesh, config.order, config.param, config.coef, f,
                                       config.oversampling)
    else:
        system = asm.assemble_brinkman(mesh, config.order, config.param, config.coef, f, g,
                                       config.oversampling)
    try:
        sol = solve_sym_indef(system.matrix, system.rhs, tol=config.tol, method=config.solver)
    except IterationLimitError as exc:
        raise IterationLimitError(f"{config.problem} h=1/{ndiv}: {exc}", exc.residual,
                                  exc.iterations) from exc
    u, p = system.split(sol.x)
    rec = compute_errors(u, system.primary, mesh, exact, config.problem,
                         (config.param, config.coef), p, system.pressure)
    rec.dofs = system.primary.nfree + system.pressure.nfree
    rec.extras["residual"] = sol.residual
    rec.extras["ph_norm"] = field_error(p, system.pressure, mesh, None, "value")
    rec.extras["div_uh_norm"] = field_error(u, system.primary, mesh, None, "div")
    return rec


def run_quadcurl(config):
    exact = example_quadcurl()
    f = exact.quadcurl_rhs(config.param, config.coef)
    return [run_level(config, n, exact, f) for n in config.divisions]


def run_brinkman(config):
    exact = example_brinkman()
    trace = boundary_trace_max(exact.field("value"))
    if trace > 1e-12:
        raise ContractViolation(f"exact velocity does not vanish on the boundary (max {trace:.2e})")
    f, g = exact.brinkman_rhs(config.param, config.coef)
    return [run_level(config, n, exact, f, g) for n in config.divisions]


def run(config):
    return run_quadcurl(config) if config.problem == "quadcurl" else run_brinkman(config)


# ---------------------------------------------------------------------------
# interpolation-only study


def interpolate_global(gmap, mesh, fn, curl_fn=None):
    """Global coefficient vector of the canonical interpolant (shared DOFs agree across cells)."""
    elem = gmap.element
    h = np.array(mesh.cell_halfwidths)
    pts = mesh.cell_centers[:, None, :] + elem.operator.points[None] * h
    flat = pts.reshape(-1, 3)
    vals = fn(flat).reshape(mesh.nc, len(elem.operator.points), -1)
    curls = None
    if elem.operator.curl_weights is not None:
        curls = curl_fn(flat).reshape(mesh.nc, len(elem.operator.points), 3)
    loc = elem.operator.apply(vals, curls) * gmap.signs
    out = np.zeros(gmap.ndofs)
    out[gmap.cell_dofs.ravel()] = loc.ravel()
    return out


def interpolation_errors(family, r, exact, divisions, quantity="value"):
    """L2 errors of the canonical interpolant of ``exact`` on a sequence of meshes."""
    rows = []
    for n in divisions:
        mesh = unit_cube_mesh(n)
        gmap = global_dofs(mesh, family, r)
        c = interpolate_global(gmap, mesh, exact.field("value"), exact.field("curl"))
        rows.append((mesh.h, field_error(c, gmap, mesh, exact.field(quantity), quantity)))
    return rows


__all__ = [
    "ExactSolution", "ErrorRecord", "RunConfig", "compute_errors", "eoc", "example_brinkman",
    "example_quadcurl", "interpolate_global", "interpolation_errors", "run", "run_brinkman",
    "run_quadcurl",
]
