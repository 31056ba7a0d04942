"""
Weak-form residuals under joint refinement
==========================================

Halving h, dt and epsilon together, the defect of both weak identities
against a fixed dictionary of smooth test functions decays at first order.
"""

from thermovisc import acceptance_refinement_plan, run_sweep

rep = run_sweep(acceptance_refinement_plan())
print("nodes  h          momentum   temperature")
for row in rep.per_run:
    print(f"{row['nodes']:<6} {row['h']:<10.6f} {row['max_res_momentum']:.3e}  {row['max_res_temperature']:.3e}")
print(f"fitted orders: momentum {rep.orders['momentum']:.3f}, temperature {rep.orders['temperature']:.3f}")
