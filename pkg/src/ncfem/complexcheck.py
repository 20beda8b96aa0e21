"""Rank audits of the discrete complexes and the commuting interpolation identities.

The complex audited is

    S0 --grad--> Splus1 --curl--> Splus2 --div--> S3

with or without homogeneous boundary conditions.  Operator matrices are built in
nodal bases by applying target DOFs to derivatives of source nodal functions;
a local inclusion test guards every construction.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import sympy as sy

from . import assembly as asm
from . import polyspace as ps
from .bench import ExactSolution, X
from .errors import ComplexStructureError
from .mesh import global_dofs
from .refelem import GAP_MIN, RANK_TOL, element

INCLUSION_TOL = 1e-9
COMPOSITION_TOL = 1e-10

_OPS = {"grad": ps.grad, "curl": ps.curl, "div": ps.div}


def local_operator(op, src, tgt):
    """Matrix of ``op`` from ``src`` nodal functions to ``tgt`` DOF values on one cell."""
    cell = src.cell
    dc = _OPS[op](src.nodal_coeffs, cell.halfwidths)
    mat = tgt.operator.apply_coeffs(dc, cell).T
    rebuilt = np.tensordot(mat.T, tgt.nodal_coeffs, axes=(1, 0))
    n = max(rebuilt.shape[-1], dc.shape[-1])
    scale = max(np.abs(dc).max(), np.finfo(float).tiny)
    resid = np.abs(ps.pad(rebuilt, n) - ps.pad(dc, n)).max() / scale
    if resid > INCLUSION_TOL:
        raise ComplexStructureError(
            f"{op}: {src.family} is not mapped into {tgt.family} (relative residual {resid:.2e})")
    return mat


def operator_matrix(op, src_map, tgt_map, mesh):
    """Global sparse matrix of ``op`` between two DOF maps.

    Every target DOF is computed from each incident cell; the copies, including
    implicit zeros from cells outside the source support, must agree.
    """
    loc = local_operator(op, src_map.element, tgt_map.element)
    nt, ns = loc.shape
    rows = np.repeat(tgt_map.cell_dofs[:, :, None], ns, axis=2).ravel()
    cols = np.repeat(src_map.cell_dofs[:, None, :], nt, axis=1).ravel()
    sign = (tgt_map.signs[:, :, None] * src_map.signs[:, None, :])
    vals = (sign * loc[None]).ravel()
    incident = np.bincount(tgt_map.cell_dofs.ravel(), minlength=tgt_map.ndofs)

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    start = np.flatnonzero(np.r_[True, (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])])
    hi = np.maximum.reduceat(vals, start)
    lo = np.minimum.reduceat(vals, start)
    seen = np.diff(np.r_[start, len(vals)])
    r0 = rows[start]
    partial = seen < incident[r0]
    hi = np.where(partial, np.maximum(hi, 0.0), hi)
    lo = np.where(partial, np.minimum(lo, 0.0), lo)
    scale = max(np.abs(vals).max(), np.finfo(float).tiny)
    spread = float((hi - lo).max() / scale) if len(hi) else 0.0
    if spread > INCLUSION_TOL:
        raise ComplexStructureError(f"{op}: shared DOFs disagree across cells (spread {spread:.2e})")
    out = sp.coo_matrix((vals, (rows, cols)), shape=(tgt_map.ndofs, src_map.ndofs)).tocsr()
    return sp.diags(1.0 / np.maximum(incident, 1)) @ out


def _svd(m):
    if m.size == 0:
        return np.eye(m.shape[0]), np.zeros(0), np.eye(m.shape[1])
    return np.linalg.svd(m, full_matrices=True)


def _rank(s, tol=RANK_TOL):
    if len(s) == 0 or s[0] == 0:
        return 0, math.inf
    cut = tol * s[0]
    r = int(np.sum(s > cut))
    gaps = [s[r - 1] / cut]
    if r < len(s):
        gaps.append(cut / max(s[r], np.finfo(float).tiny * s[0]))
    return r, float(min(gaps))


@dataclass
class SlotRecord:
    slot: str
    dim: int
    rank: int
    kernel: int
    image: int
    verdict: str
    gap: float = math.inf


@dataclass
class ExactnessReport:
    mesh: tuple
    order: int
    bc: str
    slots: list = field(default_factory=list)
    composition: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(s.verdict == "pass" for s in self.slots) and all(
            v <= COMPOSITION_TOL for v in self.composition.values())

    @property
    def alternating_sum(self):
        return sum((-1) ** k * s.dim for k, s in enumerate(self.slots))

    def to_text(self):
        head = f"mesh {self.mesh[0]}x{self.mesh[1]}x{self.mesh[2]}  r={self.order}  bc={self.bc}"
        lines = [head, f"{'slot':<8}{'dim':>7}{'rank':>7}{'kernel':>8}{'image':>7}  verdict"]
        for s in self.slots:
            lines.append(f"{s.slot:<8}{s.dim:>7}{s.rank:>7}{s.kernel:>8}{s.image:>7}  {s.verdict}")
        for k, v in self.composition.items():
            lines.append(f"{k}: {v:.2e}")
        lines.append(f"alternating sum: {self.alternating_sum}")
        return "\n".join(lines)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["slot", "dim", "rank", "kernel", "image", "verdict"])
        for s in self.slots:
            w.writerow([s.slot, s.dim, s.rank, s.kernel, s.image, s.verdict])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def complex_matrices(mesh, r, bc="none"):
    """Dense restricted operator matrices and maps for the four spaces."""
    maps = [global_dofs(mesh, fam, r, bc) for fam in ("S0", "Splus1", "Splus2", "S3")]
    g = operator_matrix("grad", maps[0], maps[1], mesh)
    c = operator_matrix("curl", maps[1], maps[2], mesh)
    d = operator_matrix("div", maps[2], maps[3], mesh)
    f0, f1, f2 = (m.free for m in maps[:3])
    dense = [g[f1][:, f0].toarray(), c[f2][:, f1].toarray(), d[:, f2].toarray()]
    return maps, dense


def check_exactness(mesh, r, bc="none"):
    """Rank audit of the complex on ``mesh``."""
    maps, (g, c, d) = complex_matrices(mesh, r, bc)
    dims = [len(maps[0].free), len(maps[1].free), len(maps[2].free),
            maps[3].ndofs - (1 if bc == "homogeneous" else 0)]
    report = ExactnessReport(mesh.divisions, r, bc)

    svds = [_svd(m) for m in (g, c, d)]
    ranks = [_rank(s[1]) for s in svds]

    def kernel_basis(k):
        return svds[k][2][ranks[k][0]:].T

    def image_basis(k):
        return svds[k][0][:, : ranks[k][0]]

    leading = 1 if bc == "none" else 0
    rk, gap = ranks[0]
    kern = dims[0] - rk
    ok = kern == leading and gap >= GAP_MIN
    report.slots.append(SlotRecord("S0", dims[0], rk, kern, leading, "pass" if ok else "fail", gap))
    for k, name in ((1, "Splus1"), (2, "Splus2")):
        rk, gap = ranks[k]
        img, gap_in = ranks[k - 1]
        kern = dims[k] - rk
        kb, ib = kernel_basis(k), image_basis(k - 1)
        stacked, gap_st = _rank(np.linalg.svd(np.hstack([kb, ib]), compute_uv=False)) if kern + img else (0, math.inf)
        ok = kern == img and stacked == kern and min(gap, gap_in, gap_st) >= GAP_MIN
        report.slots.append(SlotRecord(name, dims[k], rk, kern, img, "pass" if ok else "fail",
                                       min(gap, gap_in, gap_st)))
    img, gap = ranks[2]
    ok = img == dims[3] and gap >= GAP_MIN
    report.slots.append(SlotRecord("S3", dims[3], 0, dims[3], img, "pass" if ok else "fail", gap))

    def rel(a, b):
        if a.size == 0 or b.size == 0:
            return 0.0
        denom = max(np.abs(a).max() * np.abs(b).max(), np.finfo(float).tiny)
        return float(np.abs(a @ b).max() / denom)

    report.composition = {"curl.grad": rel(c, g), "div.curl": rel(d, c)}
    return report


# ---------------------------------------------------------------------------
# commuting identities


def cell_dofs_of(elem, mesh, value_fn, curl_fn=None):
    """DOF values of a callable on every cell: (C, ndof)."""
    h = np.array(mesh.cell_halfwidths)
    op = elem.operator
    pts = (mesh.cell_centers[:, None, :] + op.points[None] * h).reshape(-1, 3)
    vals = value_fn(pts).reshape(mesh.nc, len(op.points), -1)
    curls = None
    if op.curl_weights is not None:
        curls = curl_fn(pts).reshape(mesh.nc, len(op.points), 3)
    return op.apply(vals, curls)


def poly_at(elem, loc, points, quantity="value"):
    """Values of cellwise polynomials with nodal coefficients ``loc`` (C, ndof) at local points: (C, P, k)."""
    coeffs = asm.derivative_coeffs(elem.nodal_coeffs, quantity, elem.cell.halfwidths)
    tab = ps.eval_points(coeffs, points)
    return np.einsum("cj,jkp->cpk", loc, tab)


def _cell_rule(mesh, npts):
    x, _ = ps.gauss_1d(npts)
    xi = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    return xi, asm.cell_weights(mesh.cell_box(0), npts)


def _norm(values, w):
    return math.sqrt(float(np.einsum("cpk,p->", values**2, w)))


def commuting_residuals(mesh, r, sample):
    """Relative residuals of the three commuting identities for one smooth field.

    * ``div``: divergence of the div-conforming interpolant against the
      piecewise L2 projection of the divergence;
    * ``split``: the enriched curl interpolant against the polynomial-part
      interpolant corrected by the bubble interpolant of the remainder;
    * ``bubble``: the curl-bubble interpolant of ``curl v`` against the curl of
      the bubble interpolant of ``v``.
    """
    cell = mesh.cell_box(0).with_center((0.0, 0.0, 0.0))
    e_p1, e_s1, e_v = (element(f, r, cell) for f in ("Splus1", "S1", "Vbubble"))
    e_p2, e_s3, e_u = (element(f, r, cell) for f in ("Splus2", "S3", "Ububble"))
    v, cv, dv = sample.field("value"), sample.field("curl"), sample.field("div")
    xi, w = _cell_rule(mesh, r + 6)
    h = np.array(mesh.cell_halfwidths)

    pi2 = cell_dofs_of(e_p2, mesh, v)
    pi3 = cell_dofs_of(e_s3, mesh, dv)
    lhs = poly_at(e_p2, pi2, xi, "div")
    qpts = (mesh.cell_centers[:, None, :] + xi[None] * h).reshape(-1, 3)
    scale_v = _norm(v(qpts).reshape(mesh.nc, len(xi), 3), w)
    scale_div = _norm(dv(qpts).reshape(mesh.nc, len(xi), 1), w)
    # divergence-free samples fall back to the size of the field itself
    denom = scale_div if scale_div > 1e-12 * scale_v else scale_v
    res_div = _norm(lhs - poly_at(e_s3, pi3, xi), w) / max(denom, 1e-300)

    full = cell_dofs_of(e_p1, mesh, v, cv)
    part = cell_dofs_of(e_s1, mesh, v)
    vpts = e_v.operator.points
    pts = (mesh.cell_centers[:, None, :] + vpts[None] * h).reshape(-1, 3)
    rest_val = v(pts).reshape(mesh.nc, len(vpts), 3) - poly_at(e_s1, part, vpts)
    rest_curl = cv(pts).reshape(mesh.nc, len(vpts), 3) - poly_at(e_s1, part, vpts, "curl")
    bubble = e_v.operator.apply(rest_val, rest_curl)
    big = poly_at(e_p1, full, xi)
    split = poly_at(e_s1, part, xi) + poly_at(e_v, bubble, xi)
    res_split = _norm(big - split, w) / max(_norm(big, w), scale_v, 1e-300)

    pv = cell_dofs_of(e_v, mesh, v, cv)
    pu = cell_dofs_of(e_u, mesh, cv)
    lhs = poly_at(e_u, pu, xi)
    scale_curl = _norm(cv(qpts).reshape(mesh.nc, len(xi), 3), w)
    res_bubble = _norm(lhs - poly_at(e_v, pv, xi, "curl"), w) / max(_norm(lhs, w), scale_curl, 1e-300)
    return {"div": res_div, "split": res_split, "bubble": res_bubble}


def check_commuting(mesh, r, samples):
    """Largest relative residual of each identity over ``samples``."""
    worst = {"div": 0.0, "split": 0.0, "bubble": 0.0}
    for s in samples:
        for k, v in commuting_residuals(mesh, r, s).items():
            worst[k] = max(worst[k], v)
    return worst


def random_smooth_fields(count, seed=0):
    """Trigonometric-polynomial vector fields with random coefficients."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        comps = []
        for _c in range(3):
            k = rng.integers(1, 3, size=3)
            a, ph = rng.uniform(-1, 1, 2)
            e = sum(sy.Float(round(float(rng.uniform(-1, 1)), 6)) * v for v in X)
            comps.append(sy.Float(round(float(a), 6)) * sy.sin(sum(int(kk) * v for kk, v in zip(k, X)) + sy.Float(round(float(ph), 6)))
                         + sy.cos(e) * X[_c % 3])
        out.append(ExactSolution(comps, 0, "random"))
    return out
