"""Degrees of freedom, Vandermonde matrices, nodal bases and local interpolation.

Every functional is an integral over a cell entity of ``W . u`` or ``W . curl u``
(a point value for vertices), where the weight ``W`` is a polynomial on the cell
that only matters on the entity.  Weights use Legendre polynomials in the
entity's local coordinates.  Measures are physical: ``ds = h_a dxi``,
``dA = h_b h_c dxi dxi`` and ``dV = h_1 h_2 h_3 dxi^3``.

Local entity numbering:

* vertex ``i + 2j + 4k`` sits at ``xi = (2i-1, 2j-1, 2k-1)``;
* edge ``4a + i + 2j`` runs along axis ``a`` with the two remaining axes
  ``b < c`` fixed at ``xi_b = 2i-1`` and ``xi_c = 2j-1``;
* face ``2a + s`` is ``xi_a = 2s-1``.

Tangents and normals point along the positive axis.  Face frames use
``t1 = e_b`` (lower axis) and ``t2 = n x t1``.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import polyspace as ps
from .errors import ContractViolation, UnisolvenceError

VERTEX = "vertex_value"
EDGE_MOMENT = "edge_moment"
FACE_MOMENT = "face_moment"
EDGE_TANGENT = "edge_tangent_moment"
FACE_TANGENTIAL = "face_tangential_moment"
FACE_CURL = "face_curl_tangential_moment"
FACE_NORMAL = "face_normal_moment"
VOLUME = "volume_moment"

RANK_TOL = 1e-8
GAP_MIN = 1e3


@dataclass(frozen=True, eq=False)
class DofSpec:
    """One functional: ``sign * integral over entity of weight . (u or curl u)``."""

    kind: str
    entity: tuple
    weight: ps.PolyVec
    sign: int = 1

    @property
    def uses_curl(self):
        return self.kind == FACE_CURL


def other_axes(a):
    return [b for b in range(3) if b != a]


def vertex_point(v):
    return np.array([2 * (v & 1) - 1, 2 * ((v >> 1) & 1) - 1, 2 * (v >> 2) - 1], float)


def edge_axes(e):
    a, rem = divmod(e, 4)
    b, c = other_axes(a)
    return a, b, c, 2 * (rem & 1) - 1, 2 * (rem >> 1) - 1


def face_frame(f):
    """Normal, first and second tangent of local face ``f``."""
    a = f // 2
    n = np.eye(3)[a]
    t1 = np.eye(3)[other_axes(a)[0]]
    return n, t1, np.cross(n, t1)


def entity_rule(dim, idx, cell, npts):
    """Local points and physical weights of a Gauss rule on a cell entity."""
    x, w = ps.gauss_1d(npts)
    h = cell.h
    if dim == 0:
        return vertex_point(idx)[None, :], np.ones(1)
    if dim == 1:
        a, b, c, sb, sc = edge_axes(idx)
        pts = np.zeros((npts, 3))
        pts[:, a] = x
        pts[:, b] = sb
        pts[:, c] = sc
        return pts, w * h[a]
    if dim == 2:
        a, side = divmod(idx, 2)
        b, c = other_axes(a)
        gb, gc = np.meshgrid(x, x, indexing="ij")
        pts = np.zeros((npts * npts, 3))
        pts[:, a] = 2 * side - 1
        pts[:, b] = gb.ravel()
        pts[:, c] = gc.ravel()
        return pts, np.outer(w, w).ravel() * h[b] * h[c]
    g = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    return g, np.einsum("i,j,k->ijk", w, w, w).ravel() * np.prod(h)


# ---------------------------------------------------------------------------
# weight polynomials


@lru_cache(maxsize=None)
def _legendre(k):
    e = np.zeros(k + 1)
    e[k] = 1.0
    return np.polynomial.legendre.leg2poly(e)


def _pad_any(t, n):
    """Pad a possibly non-cubic scalar tensor to (n, n, n)."""
    out = np.zeros((n, n, n))
    out[: t.shape[0], : t.shape[1], : t.shape[2]] = t
    return out


def _face_scalars(a, maxdeg, n):
    b, c = other_axes(a)
    out = []
    for total in range(maxdeg + 1):
        for i in range(total + 1):
            degs = [None, None, None]
            degs[b], degs[c] = i, total - i
            out.append(_pad_any(_legendre_tensor_raw(degs), n))
    return out


def _legendre_tensor_raw(degs):
    out = np.ones((1, 1, 1))
    for axis, k in enumerate(degs):
        if k is None:
            continue
        shape = [1, 1, 1]
        shape[axis] = k + 1
        out = out * _legendre(k).reshape(shape)
    return out


def _volume_scalars(maxdeg, n):
    out = []
    for e in ps.monomials_total(maxdeg):
        out.append(_pad_any(_legendre_tensor_raw(list(e)), n))
    return out


def _vector(scalar, direction):
    return np.asarray(direction, float)[:, None, None, None] * scalar[None]


def _face_pair_weights(f, maxdeg, n):
    """Weights n x q for q in the tangential space [P_maxdeg(f)]^2, t1 part then t2 part per scalar."""
    nrm, t1, t2 = face_frame(f)
    out = []
    for s in _face_scalars(f // 2, maxdeg, n):
        out.append(ps.cross_const(nrm, _vector(s, t1)))
        out.append(ps.cross_const(nrm, _vector(s, t2)))
    return out


def _face_grad_weights(f, r, cell, n):
    """n x grad_f m for homogeneous face monomials m of degree r-1."""
    nrm, _, _ = face_frame(f)
    b, c = other_axes(f // 2)
    h = cell.h
    out = []
    deg = r - 1
    for p in range(deg + 1):
        g = np.zeros((3, n, n, n))
        e = [0, 0, 0]
        e[b], e[c] = p, deg - p
        if p > 0:
            eb = list(e)
            eb[b] -= 1
            g[(b,) + tuple(eb)] = p / h[b]
        if deg - p > 0:
            ec = list(e)
            ec[c] -= 1
            g[(c,) + tuple(ec)] = (deg - p) / h[c]
        out.append(ps.cross_const(nrm, g))
    return out


def _interior_curl_weights(r, cell, n):
    """[P_{r-5}]^3 plus curl of homogeneous [P_{r-3}]^3, reduced to a basis."""
    gens = [_vector(s, np.eye(3)[m]) for s in _volume_scalars(r - 5, n) for m in range(3)]
    hom = [ps.unit(3, m, e, n) for e in ps.monomials_homogeneous(r - 3) for m in range(3)]
    if hom:
        curls = ps.curl(np.array(hom), cell.halfwidths)
        curls = curls[np.abs(curls).reshape(len(curls), -1).max(axis=1) > 0]
        gens.extend(curls)
    if not gens:
        return []
    return list(ps.independent_subset(np.array(gens)))


# ---------------------------------------------------------------------------
# DOF tables


def _spec(kind, dim, idx, w, cell):
    return DofSpec(kind, (dim, idx), ps.PolyVec(w, cell))


def dof_table(family, r, cell):
    """Ordered DOF list: vertices, edges, faces, then the interior."""
    family = ps.canonical_family(family)
    ps._check_order(family, r)
    n = max(r, 1) + 1
    dofs = []
    if family == "S0":
        for v in range(8):
            dofs.append(_spec(VERTEX, 0, v, np.ones((1, 1, 1, 1)), cell))
        for e in range(12):
            a = e // 4
            for k in range(r - 1):
                degs = [None, None, None]
                degs[a] = k
                dofs.append(_spec(EDGE_MOMENT, 1, e, _pad_any(_legendre_tensor_raw(degs), n)[None], cell))
        for f in range(6):
            for s in _face_scalars(f // 2, r - 4, n):
                dofs.append(_spec(FACE_MOMENT, 2, f, s[None], cell))
        for s in _volume_scalars(r - 6, n):
            dofs.append(_spec(VOLUME, 3, 0, s[None], cell))
        return dofs
    if family == "S3":
        return [_spec(VOLUME, 3, 0, s[None], cell) for s in _volume_scalars(r - 2, n)]

    if family in ("S1", "Splus1"):
        for e in range(12):
            a = e // 4
            for k in range(r):
                degs = [None, None, None]
                degs[a] = k
                w = _vector(_pad_any(_legendre_tensor_raw(degs), n), np.eye(3)[a])
                dofs.append(_spec(EDGE_TANGENT, 1, e, w, cell))
    for f in range(6):
        if family in ("S1", "Splus1"):
            for w in _face_pair_weights(f, r - 3, n) + _face_grad_weights(f, r, cell, n):
                dofs.append(_spec(FACE_TANGENTIAL, 2, f, w, cell))
        if family in ("Splus1", "Vbubble"):
            for w in _face_pair_weights(f, r - 2, n):
                dofs.append(_spec(FACE_CURL, 2, f, w, cell))
        if family in ("S2", "Splus2"):
            nrm = face_frame(f)[0]
            for s in _face_scalars(f // 2, r - 1, n):
                dofs.append(_spec(FACE_NORMAL, 2, f, _vector(s, nrm), cell))
        if family in ("Splus2", "Ububble"):
            for w in _face_pair_weights(f, r - 2, n):
                dofs.append(_spec(FACE_TANGENTIAL, 2, f, w, cell))
    if family in ("S1", "Splus1"):
        for w in _interior_curl_weights(r, cell, n):
            dofs.append(_spec(VOLUME, 3, 0, w, cell))
    if family in ("S2", "Splus2"):
        for s in _volume_scalars(r - 3, n):
            for m in range(3):
                dofs.append(_spec(VOLUME, 3, 0, _vector(s, np.eye(3)[m]), cell))
    return dofs


# ---------------------------------------------------------------------------
# functional tabulation


@dataclass(frozen=True, eq=False)
class DofOperator:
    """Dense tabulation of a DOF list at entity quadrature points.

    ``dof_i(u) = sum_q,c value_weights[i,q,c] u_c(points[q])
    + curl_weights[i,q,c] (curl u)_c(points[q])``.
    """

    points: np.ndarray
    value_weights: np.ndarray
    curl_weights: np.ndarray

    def apply(self, values, curls=None):
        """``values``/``curls`` of shape (..., Q, ncomp); returns (..., ndof)."""
        out = np.einsum("...qc,iqc->...i", values, self.value_weights)
        if self.curl_weights is not None:
            if curls is None:
                raise ContractViolation("these DOFs need curl values")
            out = out + np.einsum("...qc,iqc->...i", curls, self.curl_weights)
        return out

    def apply_coeffs(self, coeffs, cell):
        """DOF values of polynomial tensors (m, ncomp, n, n, n); returns (m, ndof)."""
        vals = np.moveaxis(ps.eval_points(coeffs, self.points), -1, -2)
        curls = None
        if self.curl_weights is not None:
            curls = np.moveaxis(ps.eval_points(ps.curl(coeffs, cell.halfwidths), self.points), -1, -2)
        return self.apply(vals, curls)


def tabulate_dofs(dofs, cell, npts):
    ncomp = dofs[0].weight.ncomp if dofs else 1
    entities = []
    for d in dofs:
        if d.entity not in entities:
            entities.append(d.entity)
    blocks, ranges, start = [], {}, 0
    for ent in entities:
        pts, w = entity_rule(ent[0], ent[1], cell, npts)
        blocks.append((pts, w))
        ranges[ent] = (start, start + len(pts))
        start += len(pts)
    points = np.concatenate([b[0] for b in blocks]) if blocks else np.zeros((0, 3))
    weights = np.concatenate([b[1] for b in blocks]) if blocks else np.zeros(0)
    val = np.zeros((len(dofs), len(points), ncomp))
    use_curl = any(d.uses_curl for d in dofs)
    crl = np.zeros_like(val) if use_curl else None
    for i, d in enumerate(dofs):
        lo, hi = ranges[d.entity]
        wvals = ps.eval_points(d.weight.coeffs, points[lo:hi]).T * weights[lo:hi, None] * d.sign
        (crl if d.uses_curl else val)[i, lo:hi] = wvals
    return DofOperator(points, val, crl)


def equilibrate(m):
    """Row then column scaling factors (dr, dc) with unit max-norms."""
    rmax = np.abs(m).max(axis=1)
    dr = 1.0 / np.maximum(rmax, 1e-12 * max(rmax.max(), np.finfo(float).tiny))
    cmax = np.abs(dr[:, None] * m).max(axis=0)
    dc = 1.0 / np.maximum(cmax, 1e-12 * max(cmax.max(), np.finfo(float).tiny))
    return dr, dc


def rank_and_gap(m, tol=RANK_TOL):
    """Numerical rank at ``tol * sigma_max`` and the separation of the spectrum from the cutoff."""
    s = np.linalg.svd(m, compute_uv=False) if m.size else np.zeros(0)
    if len(s) == 0 or s[0] == 0:
        return 0, np.inf
    cut = tol * s[0]
    rank = int(np.sum(s > cut))
    gaps = [s[rank - 1] / cut]
    if rank < len(s):
        gaps.append(cut / max(s[rank], np.finfo(float).tiny * s[0]))
    return rank, float(min(gaps))


def vandermonde(space, dofs, npts=None):
    """Matrix ``V[i, j] = dof_i(basis_j)``."""
    if len(dofs) != space.dim:
        raise ContractViolation(f"{len(dofs)} DOFs for a space of dimension {space.dim}")
    op = tabulate_dofs(dofs, space.cell, npts or _default_npts(space.order))
    return op.apply_coeffs(space.coeffs, space.cell).T


def audit_vandermonde(v, tol=RANK_TOL):
    dr, dc = equilibrate(v)
    return rank_and_gap(dr[:, None] * v * dc[None, :], tol)


def _default_npts(r):
    return ps.points_for_degree(2 * r + 12)


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True, eq=False)
class ElementDef:
    family: str
    order: int
    space: ps.SpaceBasis
    dofs: list
    operator: DofOperator
    vandermonde: np.ndarray
    nodal_coeffs: np.ndarray
    rank: int
    gap: float

    @property
    def cell(self):
        return self.space.cell

    @property
    def ndof(self):
        return len(self.dofs)

    @property
    def ncomp(self):
        return self.space.ncomp

    @property
    def nodal(self):
        return [ps.PolyVec(c, self.cell) for c in self.nodal_coeffs]

    def entity_counts(self):
        """Number of DOFs carried by one entity of each dimension."""
        counts = {}
        for d in self.dofs:
            counts.setdefault(d.entity, 0)
            counts[d.entity] += 1
        per_dim = {}
        for (dim, _), k in counts.items():
            if per_dim.setdefault(dim, k) != k:
                raise ContractViolation("entities of equal dimension carry different DOF counts")
        return {dim: per_dim.get(dim, 0) for dim in range(4)}

    def on(self, cell):
        """Same element translated to ``cell`` (half-widths must agree)."""
        if tuple(cell.halfwidths) != tuple(self.cell.halfwidths):
            raise ContractViolation("translation only: half-widths must match")
        space = replace(self.space, cell=cell)
        dofs = [replace(d, weight=ps.PolyVec(d.weight.coeffs, cell)) for d in self.dofs]
        return replace(self, space=space, dofs=dofs)

    def physical_points(self):
        return self.cell.to_global(self.operator.points)

    def function(self, coeffs):
        """Polynomial with the given nodal coefficients."""
        return ps.PolyVec(np.tensordot(np.asarray(coeffs, float), self.nodal_coeffs, axes=(0, 0)), self.cell)


def element(family, r, cell=None):
    """Element of ``family`` and order ``r`` on ``cell`` (reference cube by default)."""
    cell = cell or ps.Box3.reference()
    family = ps.canonical_family(family)
    base = _element_cached(family, r, tuple(cell.halfwidths))
    return base if tuple(cell.center) == (0.0, 0.0, 0.0) else base.on(cell)


@lru_cache(maxsize=None)
def _element_cached(family, r, halfwidths):
    cell = ps.Box3((0.0, 0.0, 0.0), halfwidths)
    space = ps.build_space(family, r, cell)
    dofs = dof_table(family, r, cell)
    if len(dofs) != space.dim:
        raise UnisolvenceError(f"{family} r={r}: {len(dofs)} DOFs but dimension {space.dim}")
    op = tabulate_dofs(dofs, cell, _default_npts(r))
    v = op.apply_coeffs(space.coeffs, cell).T
    rank, gap = audit_vandermonde(v)
    if rank < len(dofs):
        raise UnisolvenceError(f"{family} r={r}: Vandermonde rank {rank} < {len(dofs)}")
    dr, dc = equilibrate(v)
    inv = dc[:, None] * np.linalg.inv(dr[:, None] * v * dc[None, :]) * dr[None, :]
    nodal = np.tensordot(inv.T, space.coeffs, axes=(1, 0))
    return ElementDef(family, r, space, dofs, op, v, nodal, rank, gap)


def nodal_basis(elem):
    return elem.nodal


def local_interpolate(elem, v, curl_v=None):
    """Nodal coefficients of the canonical interpolant of a callable.

    ``v`` and ``curl_v`` map physical points (P, 3) to values (P, ncomp);
    ``curl_v`` is only needed for elements with curl moments.
    """
    x = elem.physical_points()
    vals = np.asarray(v(x), float).reshape(len(x), -1)
    curls = None
    if elem.operator.curl_weights is not None:
        if curl_v is None:
            raise ContractViolation(f"{elem.family} interpolation needs the curl of the field")
        curls = np.asarray(curl_v(x), float).reshape(len(x), 3)
    return elem.operator.apply(vals, curls)
