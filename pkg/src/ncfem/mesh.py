"""Structured box meshes and global DOF numbering.

Entities are numbered per kind in axis blocks.  Edges parallel to axis ``a``
are indexed by their lower vertex on the grid of shape ``n + 1`` with ``n_a``
along ``a``; faces normal to ``a`` by their lower corner on the grid of shape
``n`` with ``n_a + 1`` along ``a``.  Every edge tangent and face normal points
along the positive axis, so both cells sharing an entity see the same frame and
all DOF signs are +1.
"""

from dataclasses import dataclass

import numpy as np

from . import polyspace as ps
from . import refelem as re_
from .errors import ContractViolation


@dataclass(frozen=True, eq=False)
class Mesh:
    domain: ps.Box3
    divisions: tuple
    vertices: np.ndarray
    edges: np.ndarray
    edge_axis: np.ndarray
    faces: np.ndarray
    face_axis: np.ndarray
    cell_vertices: np.ndarray
    cell_edges: np.ndarray
    cell_faces: np.ndarray
    cell_centers: np.ndarray
    vertex_on_boundary: np.ndarray
    edge_on_boundary: np.ndarray
    face_on_boundary: np.ndarray
    face_cells: np.ndarray

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def ne(self):
        return len(self.edges)

    @property
    def nf(self):
        return len(self.faces)

    @property
    def nc(self):
        return len(self.cell_centers)

    @property
    def cell_halfwidths(self):
        return tuple(float(v) for v in self.domain.h / np.array(self.divisions))

    @property
    def h(self):
        """Largest cell edge length."""
        return 2 * max(self.cell_halfwidths)

    def cell_box(self, c=0):
        return ps.Box3(tuple(self.cell_centers[c]), self.cell_halfwidths)

    def counts(self):
        return {"V": self.nv, "E": self.ne, "F": self.nf, "C": self.nc}

    def euler_characteristic(self):
        return self.nv - self.ne + self.nf - self.nc

    def entity_cells(self, dim):
        """Cell-to-entity incidence for entity dimension ``dim``."""
        return {0: self.cell_vertices, 1: self.cell_edges, 2: self.cell_faces,
                3: np.arange(self.nc)[:, None]}[dim]

    def entity_on_boundary(self, dim):
        return {0: self.vertex_on_boundary, 1: self.edge_on_boundary,
                2: self.face_on_boundary, 3: np.zeros(self.nc, bool)}[dim]


def _ravel(idx, shape):
    return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), shape)


def build_box_mesh(domain, n1, n2=None, n3=None):
    """Uniform ``n1 x n2 x n3`` partition of ``domain`` into boxes."""
    n = np.array([n1, n1 if n2 is None else n2, n1 if n3 is None else n3], int)
    if np.any(n < 1):
        raise ContractViolation("divisions must be positive")
    vshape = tuple(n + 1)
    lo, hi = domain.lower, domain.upper
    vidx = np.indices(vshape).reshape(3, -1).T
    vertices = lo + vidx * (hi - lo) / n
    vb = np.any((vidx == 0) | (vidx == n), axis=1)

    eye = np.eye(3, dtype=int)
    edge_shapes, face_shapes = [], []
    edges, eaxis, eb = [], [], []
    faces, faxis, fb = [], [], []
    for a in range(3):
        b, c = re_.other_axes(a)
        es = n + 1
        es[a] = n[a]
        edge_shapes.append(tuple(es))
        m = np.indices(es).reshape(3, -1).T
        edges.append(np.stack([_ravel(m, vshape), _ravel(m + eye[a], vshape)], axis=1))
        eaxis.append(np.full(len(m), a))
        eb.append((m[:, b] == 0) | (m[:, b] == n[b]) | (m[:, c] == 0) | (m[:, c] == n[c]))

        fs = n.copy()
        fs[a] = n[a] + 1
        face_shapes.append(tuple(fs))
        m = np.indices(fs).reshape(3, -1).T
        corners = [m, m + eye[b], m + eye[c], m + eye[b] + eye[c]]
        faces.append(np.stack([_ravel(p, vshape) for p in corners], axis=1))
        faxis.append(np.full(len(m), a))
        fb.append((m[:, a] == 0) | (m[:, a] == n[a]))
    eoff = np.concatenate([[0], np.cumsum([np.prod(s) for s in edge_shapes])])
    foff = np.concatenate([[0], np.cumsum([np.prod(s) for s in face_shapes])])

    cidx = np.indices(tuple(n)).reshape(3, -1).T
    nc = len(cidx)
    cv = np.zeros((nc, 8), int)
    for v in range(8):
        cv[:, v] = _ravel(cidx + np.array([v & 1, (v >> 1) & 1, v >> 2]), vshape)
    ce = np.zeros((nc, 12), int)
    for e in range(12):
        a, b, c, sb, sc = re_.edge_axes(e)
        shift = np.zeros(3, int)
        shift[b], shift[c] = (sb + 1) // 2, (sc + 1) // 2
        ce[:, e] = eoff[a] + _ravel(cidx + shift, edge_shapes[a])
    cf = np.zeros((nc, 6), int)
    for f in range(6):
        a, s = divmod(f, 2)
        cf[:, f] = foff[a] + _ravel(cidx + s * eye[a], face_shapes[a])
    nf = int(foff[-1])
    face_cells = -np.ones((nf, 2), int)
    for f in range(6):
        face_cells[cf[:, f], 1 - f % 2] = np.arange(nc)
    centers = lo + (cidx + 0.5) * (hi - lo) / n

    return Mesh(
        domain=domain, divisions=tuple(int(v) for v in n), vertices=vertices,
        edges=np.concatenate(edges), edge_axis=np.concatenate(eaxis),
        faces=np.concatenate(faces), face_axis=np.concatenate(faxis),
        cell_vertices=cv, cell_edges=ce, cell_faces=cf, cell_centers=centers,
        vertex_on_boundary=vb, edge_on_boundary=np.concatenate(eb),
        face_on_boundary=np.concatenate(fb), face_cells=face_cells,
    )


def unit_cube_mesh(n1, n2=None, n3=None):
    return build_box_mesh(ps.Box3.from_bounds((0, 0, 0), (1, 1, 1)), n1, n2, n3)


def entity_trace_quadrature(mesh, entity, degree=4):
    """Gauss rule on a global edge ``(1, i)`` or face ``(2, i)`` (or a cell ``(3, i)``)."""
    dim, idx = entity
    npts = ps.points_for_degree(degree)
    x, w = ps.gauss_1d(npts)
    if dim == 1:
        p0, p1 = mesh.vertices[mesh.edges[idx]]
        mid, half = (p0 + p1) / 2, (p1 - p0) / 2
        return ps.Quadrature(mid + x[:, None] * half, w * np.linalg.norm(half), degree)
    if dim == 2:
        corners = mesh.vertices[mesh.faces[idx]]
        origin = corners[0]
        tb, tc = corners[1] - origin, corners[2] - origin
        s = (x + 1) / 2
        gb, gc = np.meshgrid(s, s, indexing="ij")
        pts = origin + gb.ravel()[:, None] * tb + gc.ravel()[:, None] * tc
        area = np.linalg.norm(tb) * np.linalg.norm(tc)
        return ps.Quadrature(pts, np.outer(w, w).ravel() * area / 4, degree)
    if dim == 3:
        return ps.gauss_tensor(mesh.cell_box(idx), degree)
    raise ContractViolation("entity must be an edge, face or cell")


@dataclass(frozen=True, eq=False)
class GlobalDofMap:
    family: str
    order: int
    bc: str
    ndofs: int
    cell_dofs: np.ndarray
    signs: np.ndarray
    constrained: np.ndarray
    mean_zero: bool
    per_entity: dict
    element: object

    @property
    def free(self):
        return np.flatnonzero(~self.constrained)

    @property
    def nfree(self):
        return int((~self.constrained).sum()) - (1 if self.mean_zero else 0)


def global_dofs(mesh, family, r, bc="none"):
    """Global numbering for ``family`` on ``mesh``; ``bc`` is "none" or "homogeneous"."""
    if bc not in ("none", "homogeneous"):
        raise ContractViolation(f"unknown boundary condition {bc!r}")
    family = ps.canonical_family(family)
    elem = re_.element(family, r, mesh.cell_box(0).with_center((0.0, 0.0, 0.0)))
    per = elem.entity_counts()
    sizes = [mesh.nv, mesh.ne, mesh.nf, mesh.nc]
    offsets = np.concatenate([[0], np.cumsum([sizes[d] * per[d] for d in range(4)])])
    cell_dofs = np.zeros((mesh.nc, elem.ndof), int)
    seen = {}
    for i, d in enumerate(elem.dofs):
        dim, li = d.entity
        k = seen.get(d.entity, 0)
        seen[d.entity] = k + 1
        ent = mesh.entity_cells(dim)[:, li]
        cell_dofs[:, i] = offsets[dim] + ent * per[dim] + k
    ndofs = int(offsets[-1])
    constrained = np.zeros(ndofs, bool)
    mean_zero = False
    if bc == "homogeneous":
        if family == "S3":
            mean_zero = True
        else:
            for dim in range(3):
                if per[dim]:
                    ents = np.flatnonzero(mesh.entity_on_boundary(dim))
                    idx = offsets[dim] + ents[:, None] * per[dim] + np.arange(per[dim])
                    constrained[idx.ravel()] = True
    return GlobalDofMap(family, r, bc, ndofs, cell_dofs, np.ones_like(cell_dofs), constrained,
                        mean_zero, per, elem)
