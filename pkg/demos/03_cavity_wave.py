# # A line current in a PEC cavity
#
# The cavity is 20 x 20 x 1 m, discretised with 21 x 21 x 2 nodes. A Gaussian
# current pulse on the centre z-edge radiates into the box.

import numpy as np

from paraexp import ExpmConfig, integrate, paraexp_solve
from paraexp import fitwave
from paraexp.experiments import reference_solution

sys = fitwave.build_wave_system()
ops = sys.structure
print("unknowns:", sys.n, " h:", ops.n_h, " e:", ops.n_e, " free e:", int((~ops.pec_mask).sum()))

# The source current peaks at sigma_t = 2e-8 s.

t = np.linspace(0, 6e-8, 7)
print(np.round(fitwave.line_current(t), 4))

# ## Energy of the three solutions

dt, t_end = 2e-9, 6e-8
seq = integrate(sys, (0, t_end), dt)
run = paraexp_solve(sys, t_end, p=3, dt=dt, cfg=ExpmConfig(mode="taylor"))
ref = reference_solution(sys, t_end, seq.times)

w_ref = fitwave.state_energy(ref.states, ops)
w_rk4 = fitwave.state_energy(seq.states, ops)
w_pe = fitwave.state_energy(run.total.states, ops)
scale = w_ref.max()
for k in range(0, len(seq), 5):
    print(f"t={seq.times[k]:.1e}  W={w_ref[k]:.4e} J  "
          f"rk4 {abs(w_rk4[k] - w_ref[k]) / scale:.2e}  paraexp {abs(w_pe[k] - w_ref[k]) / scale:.2e}")

# ## The field at t = 4.4e-8 s
#
# A coarse text picture of e_z in the plane; the pattern is four-fold symmetric.

_, e = ops.split(run.total.at(4.4e-8))
ez = fitwave.ez_snapshot(e, ops)[:, 3].reshape(21, 21)
levels = " .:-=+*#%@"
norm = np.abs(ez) / np.abs(ez).max()
for row in norm[::2]:
    print("".join(levels[min(int(v * 10), 9)] * 2 for v in row[::1]))
