# %% [markdown]
# # Rare events by exponential tilting
#
# Entries are tilted so their means follow a target kernel; likelihood ratios
# undo the tilt. The rate estimate is `-log P / n^2`.

# %%
import itertools

import numpy as np

from matrixldp.cutnorm import cut_distance_exact
from matrixldp.entrylaw import Gaussian, RateProfile, TwoPoint
from matrixldp.kernel import StepKernel
from matrixldp.rate import rate_primal
from matrixldp.sampler import estimate_kernel_event

# %% [markdown]
# A 4 x 4 sign matrix has only 1024 upper-triangle patterns, so the probability
# of the cut ball can be counted directly.

# %%
f, delta, n = StepKernel.constant(0.5), 0.3, 4
iu = np.triu_indices(n)
hits = 0
for signs in itertools.product([-1.0, 1.0], repeat=iu[0].size):
    x = np.zeros((n, n))
    x[iu] = signs
    x.T[iu] = signs
    hits += cut_distance_exact(StepKernel.uniform(x), f)[0] < delta
est = estimate_kernel_event(TwoPoint(), f, delta, n, 5000, seed=0)
print(f"exact {hits / 1024:.5f}  estimate {np.exp(est.log_prob):.5f}  ESS {est.ess:.0f}")

# %% [markdown]
# A wider ball contains kernels cheaper than `f`, so as `n` grows its rate
# estimate drops below `I(f)`.

# %%
print("I(f) =", rate_primal(f, RateProfile(Gaussian())))
for n in (8, 16, 32):
    est = estimate_kernel_event(Gaussian(), f, 0.2, n, 1000, seed=0)
    print(f"n={n:>3}: rate {est.rate_estimate:.4f}  hits {est.hit_count}")
