# # Leapfrog and RK4 on the cavity
#
# Leapfrog is second order and needs dt * omega_max <= 2; RK4 is fourth order
# and stable up to about 2.83 on the imaginary axis.

import numpy as np

from paraexp import cfl_number, expm_dense, integrate
from paraexp import fitwave

sys = fitwave.build_wave_system(fitwave.FitGrid(7, 7, 2)).homogeneous()
ops = sys.structure
rng = np.random.default_rng(0)
u0 = rng.standard_normal(sys.n)
u0[ops.n_h:][ops.pec_mask] = 0.0
sys = sys.with_initial(u0)

info = cfl_number(sys, 1e-9, "leapfrog", warn=False)
print(f"omega_max = {info['omega_max']:.3e} 1/s")

# ## Convergence against the exact propagator

t_end = 20.0 / info["omega_max"]
exact = expm_dense(sys.a, t_end) @ u0
mass = ops.mass()


def error(sol):
    d = sol.final - exact
    return np.sqrt(np.sum(mass * d * d) / np.sum(mass * exact * exact))


for n in (40, 80, 160, 320):
    dt = t_end / n
    lf = integrate(sys, (0, t_end), dt, "leapfrog")
    rk = integrate(sys, (0, t_end), dt, "rk4")
    print(f"n={n:3d}  leapfrog {error(lf):.3e}  rk4 {error(rk):.3e}")

# ## Energy over a long run
#
# Leapfrog keeps the energy bounded; RK4 slowly damps it.

dt = 1.0 / info["omega_max"]
lf = integrate(sys, (0, 2000 * dt), dt, "leapfrog")
rk = integrate(sys, (0, 2000 * dt), dt, "rk4")
w0 = fitwave.state_energy(u0, ops)[0]
for name, sol in (("leapfrog", lf), ("rk4", rk)):
    w = fitwave.state_energy(sol.states, ops) / w0
    print(f"{name:8s}  min {w.min():.6f}  max {w.max():.6f}  final {w[-1]:.6f}")
