"""
Removing the regularization
===========================

Runs for decreasing epsilon on a shared grid and time step. Monitors stay
put, and consecutive runs draw closer in every tracked distance.
This is a smaller version of the acceptance sweep (17x17 on [0, 2]^2).
"""

from thermovisc import Grid, SweepPlan, run_sweep

plan = SweepPlan(eps_list=[1e-1, 3e-2, 1e-2, 3e-3], grid_list=[Grid((2.0, 2.0), (17, 17))],
                 dt_list=[2e-3], t_end=0.3,
                 preset_params=dict(u_amp=0.5, v_amp=1.0, theta_base=0.0, theta_amp=1.0))
rep = run_sweep(plan)

print("max/min of each monitor across eps:")
for name, ratio in rep.uniform_ratios.items():
    print(f"  {name:18s} {ratio:.3f}")

print("\neps_hi   eps_lo   d_v       d_u       d_theta   d_flux")
for row in rep.cauchy_table:
    print(f"{row['eps_hi']:<8g} {row['eps_lo']:<8g} {row['d_v']:.3e} {row['d_u']:.3e} "
          f"{row['d_theta']:.3e} {row['d_flux']:.3e}")
