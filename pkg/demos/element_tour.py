"""Walk through the local spaces on one stretched box.

Prints dimensions, the degree-of-freedom layout and the conditioning of the
generalized Vandermonde matrix for each element family, then checks the
face identity satisfied by the curl bubbles.
"""

from collections import Counter

import numpy as np

from ncfem import polyspace as ps
from ncfem import refelem as rf

cell = ps.Box3((0.0, 0.0, 0.0), (0.5, 0.125, 2.0))

print("family  r  dim  dofs by kind                         gap")
for family in ("S0", "S1", "S2", "S3", "Splus1", "Splus2"):
    for r in (2, 3):
        elem = rf.element(family, r, cell)
        layout = ", ".join(f"{k}:{n}" for k, n in sorted(Counter(d.kind for d in elem.dofs).items()))
        print(f"{family:7s} {r}  {elem.ndof:3d}  {layout:36s} {elem.gap:.1e}")

# the bubble curls turn into b_f^2 q on each face
v, _ = ps.build_bubbles(2, cell)
x, _ = ps.gauss_1d(4)
worst = 0.0
for f in range(6):
    a, s = divmod(f, 2)
    g = np.stack(np.meshgrid(x, x, indexing="ij"), -1).reshape(-1, 2)
    pts = np.zeros((len(g), 3))
    pts[:, [b for b in range(3) if b != a]] = g
    pts[:, a] = 2 * s - 1
    idx = np.flatnonzero(v.face_index == f)
    cz = np.moveaxis(ps.eval_points(ps.curl(v.coeffs[idx], cell.halfwidths), pts), 1, -1)
    q = np.moveaxis(ps.eval_points(v.face_q[idx], pts), 1, -1)
    bf = ps.eval_points(ps.face_bubble(f), pts)
    res = np.cross(cz, ps.outward_normal(f)) + bf[None, :, None] ** 2 * q / cell.halfwidths[a]
    worst = max(worst, np.abs(res).max())
print(f"\nbubble face identity, worst residual: {worst:.1e}")
