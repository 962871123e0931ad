"""Define a problem from scratch: a speed-limited point mass.

Double integrator on [0, 1], thrust in [-1, 1] with quadratic effort cost,
terminal cost pulling position to 0.5 and velocity to rest, and a hard speed
cap |x2| <= 0.35 that the unconstrained optimum would break.
"""

import numpy as np

from laxopt import lax, net, sim, synth
from laxopt.model import (
    Box,
    BoxConstraint,
    CostSpec,
    Problem,
    QuadraticCost,
    StructuredDynamics,
    TimeGrid,
    validate,
)


def thrust(t, a):
    return np.array([0.0, a[0]])


problem = Problem(
    dynamics=StructuredDynamics(A=np.array([[0.0, 1.0], [0.0, 0.0]]),
                                control_term=thrust),
    cost=CostSpec.from_forms(
        n=2, m=1,
        stage_control=QuadraticCost(1, quad=[1.0]),
        # 50*(x1 - 0.5)^2 + 50*x2^2, written in const/lin/quad pieces
        terminal=QuadraticCost(2, const=12.5, lin=[-50.0, 0.0],
                               quad=[100.0, 100.0]),
    ),
    controls=Box([-1.0], [1.0]),
    grid=TimeGrid.uniform(0.0, 1.0, 20),
    x0=np.zeros(2),
    constraint=BoxConstraint(lo=[-np.inf, -0.35], hi=[np.inf, 0.35]),
    name="point-mass",
)

report = validate(problem)
print("validation:", "ok" if report.ok else report.messages)

sol = lax.solve_lax(problem)
print(f"relaxed objective {sol.objective:.4f} ({sol.report.status})")

# does the cap bind? compare against the unconstrained solve
free = lax.solve_lax(problem, mode="unconstrained")
print(f"without the speed cap it would be {free.objective:.4f}")

delta_net = net.build(problem.controls, 0.05)
result = synth.synthesize(problem, sol, delta_net, method="nearest")
m = result.metrics
print(f"\nsynthesized on a {delta_net.size}-point net: cost {m.total_cost:.4f}, "
      f"worst cap overshoot {m.max_constraint_violation:.2e}")

peak = float(np.max(np.abs(result.x_sim[:, 1])))
end = result.x_sim[-1]
print(f"peak speed {peak:.4f} (cap 0.35), final state "
      f"({end[0]:.4f}, {end[1]:.4f})")
