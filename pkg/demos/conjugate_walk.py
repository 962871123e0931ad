"""Poke at the reachable-velocity hull behind the gear preset.

The running cost seen by the trajectory program is the convex conjugate
restricted to the hull of reachable velocities: finite (and here linear)
inside, infinite outside.  This script prints the hull, walks a ray across
its boundary, and checks the tabulated biconjugate against the direct
support-function form.
"""

import numpy as np

from laxopt import conjugate
from laxopt.model import gear_preset

problem = gear_preset(steps=20)
hull = conjugate.control_image_hull(problem, 0.0)

print("hull vertices (rows) and the control each one comes from:")
for v, c, a in zip(hull.vertices, hull.vertex_costs, hull.generator_controls):
    print(f"  b={np.array2string(v, precision=4):34s} cost={c:.1f}  "
          f"control={a}")

# inside the hull the conjugate is linear: 5*b2 + 9*b4
rng = np.random.default_rng(4)
w = rng.dirichlet(np.ones(hull.size), size=5)
print("\nrandom interior points, conjugate vs 5*b2 + 9*b4:")
for weights in w:
    b = weights @ hull.vertices
    val = conjugate.hstar(hull, b)
    print(f"  {val.value:.6f}  vs  {5 * b[1] + 9 * b[3]:.6f}")

# walking out of the hull: finite turns infinite right past the vertex
v1 = hull.vertices[np.argmax(np.abs(hull.vertices[:, 1]))]
print("\nscaling a vertex direction s*v:")
for s in (0.0, 0.5, 1.0, 1.001, 1.2):
    val = conjugate.hstar(hull, s * v1)
    shown = f"{val.value:.4f}" if val.finite else "unreachable"
    print(f"  s={s:5.3f}  {shown}")

# the grid biconjugate tracks the direct support function
table = conjugate.BiconjugateTable(hull, density=17)
print(f"\nbiconjugate table resolution {table.resolution:.4f}:")
for _ in range(5):
    p = rng.normal(scale=3.0, size=hull.dim)
    direct = conjugate.hamiltonian(hull, p)
    err = abs(table.evaluate(p) - direct)
    print(f"  |p|={np.linalg.norm(p):5.2f}  H={direct:8.4f}  err={err:.2e}")
