# # Action of the matrix exponential without forming it
#
# exp(tA) b is approximated by s repetitions of a degree-m Taylor polynomial
# of exp((t/s) A), evaluated with sparse products only.

import numpy as np

from paraexp import SparseMatrix, expm_action_taylor, expm_dense, select_taylor_params

# A rotation generator: exp(tA) turns vectors by the angle t.

a = SparseMatrix.from_dense([[0.0, 1.0], [-1.0, 0.0]])
print(expm_action_taylor(a, [1.0, 0.0], np.pi / 2, m=20, s=2))

# ## Choosing the number of substeps
#
# s is picked so that each substep has ||(t/s) A||_1 <= 1.

for t in (0.5, 3.0, 40.0):
    print(t, select_taylor_params(a, t))

# ## Accuracy against a dense reference on a random sparse matrix

rng = np.random.default_rng(1)
dense = rng.standard_normal((60, 60)) * (rng.random((60, 60)) < 0.05)
a = SparseMatrix.from_dense(dense)
b = rng.standard_normal(60)
t = 10.0 / a.norm1()
m, s = select_taylor_params(a, t)
y = expm_action_taylor(a, b, t, m, s)
ref = expm_dense(a, t) @ b
print(f"m={m} s={s}  relative error {np.linalg.norm(y - ref) / np.linalg.norm(ref):.2e}")

# A low order needs more substeps for the same accuracy.

for s in (1, 2, 4, 8, 16):
    y = expm_action_taylor(a, b, t, 6, s)
    print(f"m=6 s={s:2d}  error {np.linalg.norm(y - ref) / np.linalg.norm(ref):.2e}")
