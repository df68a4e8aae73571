# # Hermite functions and the filtered kernel
#
# The orthonormal Hermite functions are built by a three-term recurrence that
# never forms the polynomials themselves, so they stay bounded by pi^{-1/4}
# even at high degree.  Summing them with a smooth low-pass filter gives a
# reproducing-type kernel that is sharply peaked on the diagonal.

import numpy as np

from hermpio.basis import PI_M14, enumerate_indices, hermite_table
from hermpio.pio import PioConfig, kernel_diag, kernel_eval

x = np.linspace(-6, 6, 7)
table = hermite_table(x, 40)
print("psi_0 at x:", np.round(table[0], 6))
print("largest |psi_k(x)| for k <= 40:", np.abs(table).max(), "<= pi^{-1/4} =", PI_M14)

# far from the origin the rescaled recurrence keeps tiny values accurate
print("psi_60(40) =", hermite_table(np.array([40.0]), 60)[60, 0])

# multi-indices come in graded-lex order, so smaller index sets are prefixes
print("q=2 indices with |k| < 3:", enumerate_indices(2, 3).tolist())

# ## The kernel Phi_n(x, y)
#
# Moving y away from x the kernel decays quickly; its diagonal stays near a
# constant over [-n/2, n/2].
cfg = PioConfig(8, 1)
for d in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0):
    print(f"Phi_8(0, {d:4.2f}) = {kernel_eval(cfg, (0.0,), (d,)): .6f}")
print("diagonal at 0, 2, 4:", [round(kernel_diag(cfg, (t,)), 4) for t in (0.0, 2.0, 4.0)])
