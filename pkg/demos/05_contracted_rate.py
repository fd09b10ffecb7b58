# %% [markdown]
# # The contracted rate of a spectrum
#
# `solve_j` minimizes the kernel rate over step kernels with a prescribed
# spectrum. For gaussian entries every such kernel costs `sum(lambda^2) / 4`.

# %%
from matrixldp.entrylaw import Gaussian, RateProfile, TwoPoint
from matrixldp.jsolve import JProblem, solve_j
from matrixldp.spectral import Spectrum, spectrum_of_kernel

target = Spectrum.from_eigenvalues([1.0, -0.5])
j, k_star, residual = solve_j(JProblem(target, 6, RateProfile(Gaussian()), restarts=4))
print(f"gaussian J = {j:.6f} (sum lambda^2 / 4 = {(1 + 0.25) / 4})  residual {residual:.1e}")

# %% [markdown]
# For sign entries, compare with the constant kernel 0.5, which has spectrum
# {0.5} and rate 0.0654.

# %%
j, k_star, _ = solve_j(JProblem(Spectrum.from_eigenvalues([0.5]), 6, RateProfile(TwoPoint()),
                                restarts=8))
print("two-point J({0.5}) =", j)
print("minimizer spectrum:", spectrum_of_kernel(k_star).positives)
