import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_kernel, random_symmetric
from matrixldp.cutnorm import cut_distance_exact
from matrixldp.errors import NonConvergence
from matrixldp.kernel import StepKernel, apply_permutation, blow_up, embed_matrix, hs_norm_sq, truncate
from matrixldp.spectral import (
    Spectrum,
    eig_symmetric,
    semicircle_cdf,
    semicircle_check,
    spectrum_distance,
    spectrum_of_kernel,
    trace_moment,
    weyl_gap,
)


def test_eig_examples():
    np.testing.assert_array_equal(eig_symmetric(np.diag([3.0, -1.0, 2.0])), [-1.0, 2.0, 3.0])
    np.testing.assert_allclose(eig_symmetric([[0.0, 2.0], [2.0, 0.0]]), [-2.0, 2.0], atol=1e-15)
    assert eig_symmetric([[5.0]]).tolist() == [5.0]


@pytest.mark.parametrize("m", [3, 8, 20, 60])
def test_eig_trace_identities(m):
    a = random_symmetric(np.random.default_rng(m), m)
    e = eig_symmetric(a)
    assert np.all(np.diff(e) >= 0)
    assert e.sum() == pytest.approx(np.trace(a), abs=1e-9)
    assert (e**2).sum() == pytest.approx((a**2).sum(), abs=1e-9)
    np.testing.assert_allclose(e, eig_symmetric(a, method="lapack"), atol=1e-10)


def test_eig_degenerate_and_bad_input():
    np.testing.assert_allclose(eig_symmetric(np.ones((4, 4))), [0, 0, 0, 4], atol=1e-14)
    with pytest.raises(NonConvergence):
        eig_symmetric([[1.0, np.nan], [np.nan, 0.0]])
    with pytest.raises(ValueError):
        eig_symmetric(np.zeros((2, 3)))


def test_spectrum_type():
    s = Spectrum.from_eigenvalues([0.5, -2.0, 1e-14, 3.0, -0.1])
    assert s.positives == (3.0, 0.5)
    assert s.negatives == (-2.0, -0.1)
    assert s.rank == 4
    assert Spectrum.from_dict(s.to_dict()) == s
    with pytest.raises(ValueError):
        Spectrum((1.0, -1.0))


def test_spectrum_of_kernel_examples():
    assert spectrum_of_kernel(StepKernel.constant(2.5)).eigenvalues == pytest.approx((2.5,))
    a = 1.4
    s = spectrum_of_kernel(StepKernel.uniform([[0.0, a], [a, 0.0]]))
    assert s.positives == pytest.approx((a / 2,))
    assert s.negatives == pytest.approx((-a / 2,))
    x = random_symmetric(np.random.default_rng(1), 6)
    s = spectrum_of_kernel(embed_matrix(x))
    np.testing.assert_allclose(sorted(s.eigenvalues), np.linalg.eigvalsh(x) / 6, atol=1e-12)


def test_nonuniform_spectrum_via_blow_up():
    # widths 1/4, 3/4 equal a uniform 4-grid kernel with one block repeated
    k = StepKernel(np.array([0.0, 0.25, 1.0]), np.array([[1.0, -2.0], [-2.0, 0.5]]))
    u = StepKernel.uniform(k.values[np.ix_([0, 1, 1, 1], [0, 1, 1, 1])])
    assert spectrum_of_kernel(k).eigenvalues == pytest.approx(spectrum_of_kernel(u).eigenvalues)


def test_distance_examples():
    s1 = Spectrum.from_eigenvalues([1.0])
    assert spectrum_distance(s1, s1) == 0.0
    assert spectrum_distance(s1, Spectrum()) == pytest.approx(0.25)
    assert spectrum_distance(Spectrum.from_eigenvalues([1.0, -2.0]),
                             Spectrum.from_eigenvalues([0.5])) == pytest.approx(0.625)
    # second positive is weighted 1/8
    assert spectrum_distance(Spectrum.from_eigenvalues([2.0, 1.0]),
                             Spectrum.from_eigenvalues([2.0])) == pytest.approx(0.125)


spectra = st.lists(st.floats(-5, 5).filter(lambda x: abs(x) > 1e-6), max_size=6).map(
    Spectrum.from_eigenvalues)


@given(spectra, spectra, spectra)
def test_distance_is_metric(a, b, c):
    assert spectrum_distance(a, b) == spectrum_distance(b, a)
    assert spectrum_distance(a, c) <= spectrum_distance(a, b) + spectrum_distance(b, c) + 1e-12
    assert spectrum_distance(a, a) == 0.0


def test_trace_moment_examples():
    assert trace_moment(StepKernel.constant(1.5), 3) == pytest.approx(1.5**3)
    k = random_kernel(np.random.default_rng(2), 5, uniform=False)
    assert trace_moment(k, 2) == pytest.approx(hs_norm_sq(k), abs=1e-10)
    k6 = random_kernel(np.random.default_rng(3), 6)
    lam = np.array(spectrum_of_kernel(k6).eigenvalues)
    assert trace_moment(k6, 4) == pytest.approx((lam**4).sum(), abs=1e-9)
    with pytest.raises(ValueError):
        trace_moment(k6, 1)


def test_trace_moment_matches_integral():
    # direct sum over block chains for p = 3 on a non-uniform grid
    k = random_kernel(np.random.default_rng(4), 3, uniform=False)
    w, v = k.widths, k.values
    direct = sum(v[a, b] * v[b, c] * v[c, a] * w[a] * w[b] * w[c]
                 for a in range(3) for b in range(3) for c in range(3))
    assert trace_moment(k, 3) == pytest.approx(direct, abs=1e-12)


@given(st.integers(0, 10_000))
def test_weyl_bound(seed):
    rng = np.random.default_rng(seed)
    a = random_kernel(rng, int(rng.integers(1, 6)), uniform=False)
    b = random_kernel(rng, int(rng.integers(1, 6)), uniform=False)
    gap, hs = weyl_gap(a, b)
    assert gap <= hs + 1e-9
    assert weyl_gap(a, a) == (0.0, 0.0)


def test_weyl_truncation():
    k = random_kernel(np.random.default_rng(5), 5, scale=2.0)
    t, delta = truncate(k, 1.0)
    gap, hs = weyl_gap(k, t)
    assert hs == pytest.approx(math.sqrt(delta), abs=1e-12)
    assert gap <= math.sqrt(delta) + 1e-9


def test_permutation_leaves_spectrum():
    k = random_kernel(np.random.default_rng(6), 6)
    p = apply_permutation(k, [3, 1, 5, 0, 2, 4])
    np.testing.assert_allclose(spectrum_of_kernel(p).positives, spectrum_of_kernel(k).positives,
                               atol=1e-12)


def test_sum_of_squares_is_hs_norm():
    k = random_kernel(np.random.default_rng(7), 8, uniform=False)
    lam = np.array(spectrum_of_kernel(k).eigenvalues)
    assert (lam**2).sum() == pytest.approx(hs_norm_sq(k), abs=1e-9)


def test_moments_continuous_in_cut_distance():
    # k_j -> k in cut norm with |k_j| <= 1 bounded; moment gaps shrink along the sequence
    rng = np.random.default_rng(8)
    base = StepKernel.uniform(0.5 * np.tanh(random_symmetric(rng, 3)))
    noise = rng.choice([-1.0, 1.0], size=(12, 12))
    noise = np.triu(noise) + np.triu(noise, 1).T
    fine = blow_up(base, 4)
    dists, gaps = [], {p: [] for p in (3, 4, 5)}
    for eps in [0.4, 0.2, 0.1, 0.05]:
        kj = StepKernel.uniform(fine.values + eps * noise)
        dists.append(cut_distance_exact(kj, base)[0])
        for p in gaps:
            gaps[p].append(abs(trace_moment(kj, p) - trace_moment(base, p)))
    assert all(a > b for a, b in zip(dists, dists[1:]))
    for p in gaps:
        assert all(a > b for a, b in zip(gaps[p], gaps[p][1:]))


def test_semicircle_examples():
    assert semicircle_check([0.0]) == pytest.approx(0.5)
    n = 1000
    u = (np.arange(1, n + 1) - 0.5) / n
    grid = np.linspace(-2, 2, 200001)
    quantiles = np.interp(u, semicircle_cdf(grid), grid)
    assert semicircle_check(quantiles) <= 1.0 / n
    assert semicircle_cdf(0.0) == 0.5
    assert semicircle_cdf(-5.0, 2.0) == 0.0 and semicircle_cdf(5.0, 2.0) == 1.0


def test_semicircle_cdf_matches_density_quadrature():
    from scipy import integrate

    sigma = 1.3
    dens = lambda x: math.sqrt(max(4 * sigma**2 - x * x, 0.0)) / (2 * math.pi * sigma**2)
    for x in [-2.0, -0.7, 0.3, 1.9]:
        val = integrate.quad(dens, -2 * sigma, x)[0]
        assert semicircle_cdf(x, sigma) == pytest.approx(val, abs=1e-9)
