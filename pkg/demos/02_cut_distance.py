# %% [markdown]
# # Cut distance between step kernels
#
# Exact enumeration over block subsets, the alternating heuristic, and the
# distance modulo relabelings of blocks.

# %%
import numpy as np

from matrixldp.cutnorm import cut_distance_exact, cut_distance_heuristic, quotient_cut_distance
from matrixldp.kernel import StepKernel, apply_permutation

rng = np.random.default_rng(0)
a = rng.normal(size=(8, 8))
k1 = StepKernel.uniform(np.triu(a) + np.triu(a, 1).T)
k2 = StepKernel.constant(0.0)

exact, witness = cut_distance_exact(k1, k2)
heur, _ = cut_distance_heuristic(k1, k2, restarts=50)
print(f"exact {exact:.6f}  heuristic {heur:.6f}")
print("witness rows", witness.set_a, "columns", witness.set_b)

# %% [markdown]
# Relabeling the blocks changes the labelled distance but not the quotient one.

# %%
k3 = apply_permutation(k1, rng.permutation(8))
print("labelled distance", cut_distance_exact(k1, k3)[0])
print("quotient distance", quotient_cut_distance(k1, k3)[0])
