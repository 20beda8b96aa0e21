"""Exactness and commuting-diagram audit on a small uneven mesh."""

from ncfem.complexcheck import check_commuting, check_exactness, random_smooth_fields
from ncfem.mesh import unit_cube_mesh

mesh = unit_cube_mesh(2, 3, 2)
for bc in ("none", "homogeneous"):
    report = check_exactness(mesh, 2, bc)
    print(report.to_text())
    print()

residuals = check_commuting(mesh, 2, random_smooth_fields(3, seed=1))
for name, value in residuals.items():
    print(f"commuting residual {name}: {value:.1e}")
