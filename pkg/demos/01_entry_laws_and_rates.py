# %% [markdown]
# # Entry laws and rate functions
#
# Each entry law knows its log-MGF; `cramer_rate` inverts it numerically.
# The rate of a step kernel is half the integral of `h` over the unit square.

# %%
import numpy as np

from matrixldp.entrylaw import Gaussian, RateProfile, TwoPoint, cramer_rate, truncated_rate
from matrixldp.kernel import StepKernel
from matrixldp.rate import canonical_dual, rate_dual, rate_primal

gauss = RateProfile(Gaussian(1.0))
signs = RateProfile(TwoPoint())
xs = np.linspace(-0.9, 0.9, 7)
print("x        ", np.round(xs, 3))
print("gaussian ", np.round(cramer_rate(gauss, xs), 4))
print("two-point", np.round(cramer_rate(signs, xs), 4))

# %% [markdown]
# A constant kernel at 0.5 costs `h(0.5) / 2`.

# %%
f = StepKernel.constant(0.5)
print("I(0.5) gaussian :", rate_primal(f, gauss))
print("I(0.5) two-point:", rate_primal(f, signs))

# %% [markdown]
# The dual functional is a lower bound for any test kernel, and it is tight
# at the blockwise optimal one.

# %%
k = StepKernel.uniform([[0.6, -0.2], [-0.2, 0.1]])
print("primal            ", rate_primal(k, signs))
print("dual at g = 0     ", rate_dual(k, signs, StepKernel.constant(0.0)))
print("dual at canonical ", rate_dual(k, signs, canonical_dual(k, signs)))

# %% [markdown]
# Clipping entries to `[-ell, ell]` narrows the law, so the truncated rate is
# larger than `h` and decreases toward it as `ell` grows.

# %%
for ell in (1.0, 2.0, 4.0, 8.0):
    print(f"ell={ell:>4}: h_ell(0.5) = {truncated_rate(gauss, ell, 0.5):.6f}")
