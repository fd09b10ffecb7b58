# %% [markdown]
# # Spectra of kernels and random matrices
#
# The Jacobi solver gives the kernel spectrum; trace moments and the
# Hilbert-Schmidt bound on eigenvalue gaps follow.

# %%
import math

import numpy as np

from matrixldp.entrylaw import Gaussian
from matrixldp.kernel import StepKernel
from matrixldp.sampler import sample_matrix
from matrixldp.spectral import (
    eig_symmetric,
    semicircle_check,
    spectrum_of_kernel,
    trace_moment,
    weyl_gap,
)

k = StepKernel.uniform([[1.0, 0.5, 0.0], [0.5, -1.0, 0.2], [0.0, 0.2, 0.3]])
s = spectrum_of_kernel(k)
print("positives", np.round(s.positives, 6), "negatives", np.round(s.negatives, 6))
for p in (2, 3, 4):
    print(f"p={p}: trace {trace_moment(k, p):.10f}  sum {np.sum(np.asarray(s.eigenvalues) ** p):.10f}")

# %%
gap, hs = weyl_gap(k, StepKernel.constant(0.1))
print(f"eigenvalue gap {gap:.4f} <= HS distance {hs:.4f}")

# %% [markdown]
# At square-root scale a gaussian matrix follows the semicircle; with mean 0.5
# one eigenvalue sits near `n / 2`.

# %%
n = 400
x = sample_matrix(Gaussian(), n, seed=0)
print("KS to semicircle:", semicircle_check(eig_symmetric(x, "lapack") / math.sqrt(n)))
y = sample_matrix(Gaussian(1.0, mu=0.5), 200, seed=0)
print("lambda_max / n  :", eig_symmetric(y, "lapack")[-1] / 200)
