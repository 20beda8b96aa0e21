"""Local and global assembly of the bilinear and linear forms of both mixed schemes.

All cells of a structured mesh are translates of one box, so each local matrix is
computed once and scattered to every cell.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import polyspace as ps
from .errors import ContractViolation
from .mesh import global_dofs

FORM_KINDS = {
    "mass": ("value", "value"),
    "curl_mass": ("curl", "curl"),
    "gradcurl_stiffness": ("gradcurl", "gradcurl"),
    "grad_stiffness": ("grad", "grad"),
    "div_div": ("div", "div"),
    "b1_v_gradq": ("value", "grad"),
    "b2_divv_q": ("div", "value"),
}


@dataclass(frozen=True)
class FormSpec:
    kind: str
    coefficient: float = 1.0

    def __post_init__(self):
        if self.kind not in FORM_KINDS:
            raise ContractViolation(f"unknown form {self.kind!r}")
        if self.coefficient < 0:
            raise ContractViolation("form coefficients must be non-negative")


def derivative_coeffs(coeffs, quantity, h):
    """Coefficient tensors of a derived quantity, flattened to (m, k, n, n, n)."""
    if quantity == "value":
        return coeffs
    if quantity == "curl":
        return ps.curl(coeffs, h)
    if quantity == "div":
        return ps.div(coeffs, h)
    if quantity == "grad":
        if coeffs.shape[1] == 1:
            return ps.grad(coeffs, h)
        g = ps.grad_vector(coeffs, h)
        return g.reshape(g.shape[0], 9, *g.shape[-3:])
    if quantity == "gradcurl":
        g = ps.grad_vector(ps.curl(coeffs, h), h)
        return g.reshape(g.shape[0], 9, *g.shape[-3:])
    raise ContractViolation(f"unknown quantity {quantity!r}")


def tabulate(elem, quantity, npts):
    """Values of a derived quantity of every nodal function at the tensor Gauss points: (m, k, Q)."""
    c = derivative_coeffs(elem.nodal_coeffs, quantity, elem.cell.halfwidths)
    x, _ = ps.gauss_1d(npts)
    vals = ps.eval_grid(c, x, x, x)
    return vals.reshape(vals.shape[0], vals.shape[1], -1)


def cell_weights(cell, npts):
    _, w = ps.gauss_1d(npts)
    return np.einsum("i,j,k->ijk", w, w, w).ravel() * np.prod(cell.h)


def local_matrix(form, trial, test=None):
    """Dense matrix ``M[i, j] = form(trial_j, test_i)`` on the trial element's cell."""
    test = trial if test is None else test
    if tuple(trial.cell.halfwidths) != tuple(test.cell.halfwidths):
        raise ContractViolation("trial and test elements live on different cells")
    qa, qb = FORM_KINDS[form.kind]
    npts = max(trial.nodal_coeffs.shape[-1], test.nodal_coeffs.shape[-1])
    ta = tabulate(trial, qa, npts)
    tb = tabulate(test, qb, npts)
    if ta.shape[1] != tb.shape[1]:
        raise ContractViolation(f"{form.kind}: incompatible trial and test spaces")
    w = cell_weights(trial.cell, npts)
    return form.coefficient * np.einsum("ikq,jkq,q->ij", tb, ta, w)


def scatter(local, mesh, trial_map, test_map):
    rows = np.repeat(test_map.cell_dofs[:, :, None], local.shape[1], axis=2)
    cols = np.repeat(trial_map.cell_dofs[:, None, :], local.shape[0], axis=1)
    sign = test_map.signs[:, :, None] * trial_map.signs[:, None, :]
    data = sign * local[None]
    out = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())),
                        shape=(test_map.ndofs, trial_map.ndofs))
    return out.tocsr()


def assemble(form, mesh, trial_map, test_map=None):
    """Global sparse matrix of ``form`` (rows: test DOFs, columns: trial DOFs)."""
    test_map = trial_map if test_map is None else test_map
    return scatter(local_matrix(form, trial_map.element, test_map.element), mesh, trial_map, test_map)


def quadrature_points(mesh, npts):
    """Physical tensor Gauss points of every cell, shape (C, Q, 3), and the weights (Q,)."""
    x, _ = ps.gauss_1d(npts)
    xi = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    h = np.array(mesh.cell_halfwidths)
    pts = mesh.cell_centers[:, None, :] + xi[None] * h
    return pts, cell_weights(mesh.cell_box(0), npts)


def load_points(gmap, oversampling):
    degree = gmap.element.nodal_coeffs.shape[-1] - 1 + oversampling
    return ps.points_for_degree(degree)


def assemble_load(f, gmap, mesh, oversampling=4):
    """Vector ``F_i = integral of f . psi_i``; ``f`` maps points (P, 3) to (P, ncomp)."""
    npts = load_points(gmap, oversampling)
    pts, w = quadrature_points(mesh, npts)
    vals = np.asarray(f(pts.reshape(-1, 3)), float).reshape(mesh.nc, len(w), -1)
    tab = tabulate(gmap.element, "value", npts)
    loc = np.einsum("cqk,jkq,q->cj", vals, tab, w) * gmap.signs
    return np.bincount(gmap.cell_dofs.ravel(), loc.ravel(), minlength=gmap.ndofs)


def assemble_integrals(gmap, mesh):
    """Integral of every global basis function."""
    return assemble_load(lambda x: np.ones((len(x), 1)), gmap, mesh, oversampling=0)


def eliminate(matrix, rhs, mask):
    """Symmetric elimination of homogeneous Dirichlet unknowns (zero rows/columns, unit diagonal)."""
    keep = sp.diags((~mask).astype(float))
    out = keep @ matrix @ keep + sp.diags(mask.astype(float))
    return out.tocsr(), np.where(mask, 0.0, rhs)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    blocks: dict
    primary: object
    pressure: object
    constrained: np.ndarray

    @property
    def nprimary(self):
        return self.primary.ndofs

    def split(self, x):
        n = self.primary.ndofs
        return x[:n], x[n:n + self.pressure.ndofs]


def assemble_quadcurl(mesh, r, mu, gamma, f, oversampling=4):
    """Saddle-point system of the quad-curl scheme with homogeneous boundary conditions."""
    if mu <= 0 or gamma < 0:
        raise ContractViolation("need mu > 0 and gamma >= 0")
    umap = global_dofs(mesh, "Splus1", r, "homogeneous")
    pmap = global_dofs(mesh, "S0", r, "homogeneous")
    a = (assemble(FormSpec("gradcurl_stiffness", mu), mesh, umap)
         + assemble(FormSpec("curl_mass"), mesh, umap)
         + assemble(FormSpec("mass", gamma), mesh, umap))
    b = assemble(FormSpec("b1_v_gradq"), mesh, umap, pmap)
    k = sp.bmat([[a, b.T], [b, None]], format="csr")
    rhs = np.concatenate([assemble_load(f, umap, mesh, oversampling), np.zeros(pmap.ndofs)])
    mask = np.concatenate([umap.constrained, pmap.constrained])
    k, rhs = eliminate(k, rhs, mask)
    return AssembledSystem(k, rhs, {"A": a, "B": b}, umap, pmap, mask)


def assemble_brinkman(mesh, r, nu, alpha, f, g=None, oversampling=4):
    """Saddle-point system of the Brinkman scheme with a mean-zero pressure multiplier."""
    if nu <= 0 or alpha < 0:
        raise ContractViolation("need nu > 0 and alpha >= 0")
    umap = global_dofs(mesh, "Splus2", r, "homogeneous")
    pmap = global_dofs(mesh, "S3", r, "homogeneous")
    a = (assemble(FormSpec("grad_stiffness", nu), mesh, umap)
         + assemble(FormSpec("mass", alpha), mesh, umap))
    b = assemble(FormSpec("b2_divv_q"), mesh, umap, pmap)
    m = sp.csr_matrix(assemble_integrals(pmap, mesh)[:, None])
    k = sp.bmat([[a, -b.T, None], [-b, None, m], [None, m.T, None]], format="csr")
    gvec = np.zeros(pmap.ndofs) if g is None else assemble_load(g, pmap, mesh, oversampling)
    rhs = np.concatenate([assemble_load(f, umap, mesh, oversampling), -gvec, [0.0]])
    mask = np.concatenate([umap.constrained, np.zeros(pmap.ndofs + 1, bool)])
    k, rhs = eliminate(k, rhs, mask)
    return AssembledSystem(k, rhs, {"A": a, "B": b, "m": m}, umap, pmap, mask)
