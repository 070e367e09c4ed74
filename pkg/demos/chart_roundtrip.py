"""Global exponential chart for a curved connection on the Heisenberg chart.

Integrates a batch of geodesics, inverts them with Newton's method and reports
the worst round-trip error, then runs the injectivity probe.
"""

import numpy as np

from tangent_groupoid.exponential_charts import (
    ChartDomain, chart_log_many, global_chart_many, injectivity_probe,
)
from tangent_groupoid.manifest import bundled

m = bundled("heisenberg3")
conn, psi = m.connection("curved"), m.splitting("sheared")
ctrl = ChartDomain(radius=0.5)
rng = np.random.default_rng(7)
X, V = rng.uniform(-1, 1, (100, 3)), rng.uniform(-0.5, 0.5, (100, 3))
T = rng.uniform(0.25, 1, 100)

Y = global_chart_many(conn, psi, X, V, T, ctrl)
back = chart_log_many(conn, psi, X, Y, T, ctrl)
print("round trip max error", float(np.max(np.abs(back - V))))

probe = injectivity_probe(conn, psi, ctrl, samples=2000, seed=7)
for check in probe.checks:
    print(f"{check.name}: {'ok' if check.passed else 'FAILED'} {check.detail}")
