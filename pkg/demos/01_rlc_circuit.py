# # Series RLC circuit, sequential RK4 vs ParaExp
#
# The loop current of a driven series RLC circuit is a two-dimensional linear
# ODE with a closed-form solution, so both methods can be checked exactly.

import numpy as np

from paraexp import paraexp_solve, integrate
from paraexp.rlc import RlcParams, rlc_closed_form, rlc_system

params = RlcParams()
sys = rlc_system(params)
print(sys.a.to_dense())

# ## Sequential RK4 over the whole horizon

dt, t_end = 1e-5, 3e-3
seq = integrate(sys, (0.0, t_end), dt)
exact = rlc_closed_form(params, seq.times)
print("RK4 max error (A):", np.abs(seq.states[:, 0] - exact).max())

# ## ParaExp on three intervals
#
# Each worker integrates its interval from a zero state, then pushes the end
# value forward with the matrix exponential. The total is the sum.

run = paraexp_solve(sys, t_end, p=3, dt=dt)
print("boundaries:", run.partition.boundaries)
print("ParaExp max error (A):", np.abs(run.total.states[:, 0] - exact).max())

# The pieces themselves: v_j lives on one interval, w_i from T_{i-1} onwards.

for j, v in enumerate(run.particular, start=1):
    print(f"v{j}: {len(v)} samples, end value {v.final[0]: .4e} A")
for i, w in enumerate(run.homogeneous, start=1):
    print(f"w{i}: starts at {w.times[0]:.1e} s, end value {w.final[0]: .4e} A")

# ## Halving the step
#
# Both errors drop by roughly 2^4 = 16.

for dt in (2e-5, 1e-5, 5e-6):
    seq = integrate(sys, (0.0, t_end), dt)
    run = paraexp_solve(sys, t_end, p=3, dt=dt)
    ref = rlc_closed_form(params, seq.times)
    print(f"dt={dt:.0e}  rk4={np.abs(seq.states[:, 0] - ref).max():.3e}  "
          f"paraexp={np.abs(run.total.states[:, 0] - ref).max():.3e}")
