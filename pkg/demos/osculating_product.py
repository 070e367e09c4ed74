"""Watch the chart-pulled-back product approach the osculating group law.

Prints the error at shrinking t for an exact (heisenberg3) and a genuinely
non-group (twisted-heisenberg) frame, plus the ratio of successive errors.
"""

from tangent_groupoid.exponential_charts import deformation_limit_check
from tangent_groupoid.manifest import bundled

for name in ("heisenberg3", "twisted-heisenberg"):
    m = bundled(name)
    run = m.run
    rep = deformation_limit_check(m.connection(), m.splitting(), run["point"], run["vector"],
                                  run["second_vector"], run["t_sequence"], exact=True)
    print(f"{name}: limit {[str(v) for v in rep.data['limit']]}")
    for row in rep.data["rows"]:
        print(f"  t = {str(row['t']):>6}  error {float(row['error']):.3e}")
    ratios = [r for r in rep.data["ratios"] if r is not None]
    if ratios:
        print("  ratios", ", ".join(f"{float(r):.4f}" for r in ratios))
