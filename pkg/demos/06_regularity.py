# %% [markdown]
# # Weak regularity partitions
#
# Refining blocks by cut-norm witnesses yields a few classes whose averages
# approximate the kernel in cut distance.

# %%
import numpy as np

from matrixldp.kernel import StepKernel, apply_permutation, blow_up
from matrixldp.regularity import covering_demo, weak_regularize

rng = np.random.default_rng(1)
a = rng.choice([-1.0, 1.0], size=(20, 20))
k = StepKernel.uniform(np.triu(a) + np.triu(a, 1).T)
for eps in (0.25, 0.1, 0.07):
    r = weak_regularize(k, eps)
    print(f"eps={eps}: {r.parts} classes, achieved {r.achieved_eps:.4f}, "
          f"steps {r.steps}, certified {r.certified}")

# %% [markdown]
# A shuffled blow-up of a 3-block kernel is recovered exactly.

# %%
base = StepKernel.uniform([[1.0, 0.0, -1.0], [0.0, 2.0, 0.5], [-1.0, 0.5, 0.0]])
r = weak_regularize(apply_permutation(blow_up(base, 5), rng.permutation(15)), 1e-9)
print(r.parts, "classes\n", r.approximant.values)

# %% [markdown]
# Kernels that differ by a relabeling share one representative in the cover.

# %%
kernels = [apply_permutation(k, rng.permutation(20)) for _ in range(5)]
reps, assignment = covering_demo(kernels, 1.0, 0.2)
print(len(reps), "representative(s) for", len(kernels), "kernels")
