import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_kernel, random_symmetric
from matrixldp.errors import AsymmetricInput, NonUniformGrid
from matrixldp.kernel import (
    StepKernel,
    apply_permutation,
    blow_up,
    coarse_grain,
    common_refinement,
    embed_matrix,
    hs_norm_sq,
    kernel_to_csv,
    l1_norm,
    lcm_grid,
    load_kernel,
    rearrange,
    refine,
    save_kernel,
    truncate,
)


def integral(k):
    return float(k.weighted().sum())


def point_eval(k, x, y):
    i = min(np.searchsorted(k.breakpoints, x, side="right") - 1, k.m - 1)
    j = min(np.searchsorted(k.breakpoints, y, side="right") - 1, k.m - 1)
    return k.values[i, j]


def test_validation():
    with pytest.raises(AsymmetricInput):
        StepKernel.uniform([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        StepKernel(np.array([0.0, 0.6, 0.5, 1.0]), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        StepKernel(np.array([0.1, 1.0]), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        StepKernel(np.array([0.0, 0.5, 1.0]), np.zeros((3, 3)))
    with pytest.raises(AsymmetricInput):
        embed_matrix(np.array([[0.0, 1.0], [1.0 + 1e-15, 0.0]]))


def test_immutable():
    k = StepKernel.uniform(np.eye(2))
    with pytest.raises(ValueError):
        k.values[0, 0] = 3.0


def test_embed_matrix_spectrum():
    rng = np.random.default_rng(0)
    x = random_symmetric(rng, 7)
    k = embed_matrix(x)
    assert k.is_uniform and k.m == 7
    s = np.sqrt(k.widths)
    np.testing.assert_allclose(np.linalg.eigvalsh(s[:, None] * k.values * s),
                               np.linalg.eigvalsh(x) / 7, atol=1e-12)


def test_coarse_grain_examples():
    k = StepKernel.uniform([[1.0, 2.0], [2.0, 3.0]])
    assert coarse_grain(k, 1).values[0, 0] == pytest.approx(2.0)
    np.testing.assert_allclose(coarse_grain(k, 2).values, k.values)
    np.testing.assert_allclose(coarse_grain(blow_up(k, 3), 2).values, k.values, atol=1e-14)


def test_coarse_grain_matches_quadrature():
    # 3-grid averages of a 2-block kernel by midpoint-rule integration
    rng = np.random.default_rng(1)
    k = random_kernel(rng, 4, uniform=False)
    g = coarse_grain(k, 3)
    pts = (np.arange(3000) + 0.5) / 3000
    rows = np.minimum(np.searchsorted(k.breakpoints, pts, side="right") - 1, k.m - 1)
    dense = k.values[np.ix_(rows, rows)]
    oracle = dense.reshape(3, 1000, 3, 1000).mean(axis=(1, 3))
    np.testing.assert_allclose(g.values, oracle, atol=2e-3)
    assert integral(g) == pytest.approx(integral(k), abs=1e-12)


def test_truncate():
    k = StepKernel.uniform([[3.0, -0.5], [-0.5, -2.0]])
    t, delta = truncate(k, 1.0)
    np.testing.assert_array_equal(t.values, [[1.0, -0.5], [-0.5, -1.0]])
    assert delta == pytest.approx((4.0 + 1.0) / 4)
    assert truncate(k, 5.0)[1] == 0.0
    with pytest.raises(ValueError):
        truncate(k, 0.0)


def test_common_refinement_preserves_function():
    rng = np.random.default_rng(2)
    a = random_kernel(rng, 3, uniform=False)
    b = random_kernel(rng, 4, uniform=False)
    ra, rb = common_refinement(a, b)
    assert np.array_equal(ra.breakpoints, rb.breakpoints)
    for x, y in rng.uniform(size=(200, 2)):
        assert point_eval(ra, x, y) == point_eval(a, x, y)
        assert point_eval(rb, x, y) == point_eval(b, x, y)
    assert integral(ra) == pytest.approx(integral(a), abs=1e-14)


def test_refinement_merges_close_breakpoints():
    a = StepKernel(np.array([0.0, 0.3, 1.0]), np.eye(2))
    b = StepKernel(np.array([0.0, 0.3 + 1e-14, 1.0]), np.eye(2))
    ra, _ = common_refinement(a, b)
    assert ra.m == 2


def test_arithmetic():
    a = StepKernel.uniform([[1.0, 2.0], [2.0, 0.0]])
    b = StepKernel.constant(1.0)
    np.testing.assert_array_equal((a - b).values, [[0.0, 1.0], [1.0, -1.0]])
    np.testing.assert_array_equal((2 * a).values, 2 * a.values)
    assert -(-a) == a
    assert hash(a) == hash(StepKernel.uniform([[1.0, 2.0], [2.0, 0.0]]))


def test_norms():
    k = StepKernel(np.array([0.0, 0.25, 1.0]), np.array([[2.0, -1.0], [-1.0, 0.0]]))
    assert hs_norm_sq(k) == pytest.approx(4 * 0.0625 + 2 * 0.25 * 0.75)
    assert l1_norm(k) == pytest.approx(2 * 0.0625 + 2 * 0.25 * 0.75)


@given(st.permutations(range(5)), st.permutations(range(5)))
def test_permutation_group_law(s, t):
    k = random_kernel(np.random.default_rng(4), 5)
    s, t = np.array(s), np.array(t)
    assert apply_permutation(apply_permutation(k, s), t) == apply_permutation(k, s[t])


def test_permutation_requires_uniform():
    k = random_kernel(np.random.default_rng(5), 3, uniform=False)
    with pytest.raises(NonUniformGrid):
        apply_permutation(k, [1, 0, 2])
    with pytest.raises(ValueError):
        apply_permutation(StepKernel.uniform(np.eye(3)), [0, 0, 1])


def test_rearrange_is_measure_preserving():
    rng = np.random.default_rng(6)
    k = random_kernel(rng, 4, uniform=False)
    r = rearrange(k, [2, 0, 3, 1])
    assert integral(r) == pytest.approx(integral(k), abs=1e-14)
    assert hs_norm_sq(r) == pytest.approx(hs_norm_sq(k), abs=1e-14)
    u = random_kernel(rng, 4)
    assert rearrange(u, [2, 0, 3, 1]) == apply_permutation(u, [2, 0, 3, 1])


def test_blow_up_and_lcm():
    k = StepKernel.uniform([[1.0, 2.0], [2.0, 3.0]])
    b = blow_up(k, 3)
    assert b.m == 6 and b.is_uniform
    assert integral(b) == pytest.approx(integral(k))
    a2, b2 = lcm_grid(StepKernel.uniform(np.eye(2)), StepKernel.uniform(np.eye(3)))
    assert a2.m == b2.m == 6
    nu = random_kernel(np.random.default_rng(7), 3, uniform=False)
    assert integral(blow_up(nu, 2)) == pytest.approx(integral(nu))


def test_refine_requires_superset():
    k = StepKernel.uniform([[1.0, 2.0], [2.0, 3.0]])
    r = refine(k, np.array([0.0, 0.25, 0.5, 1.0]))
    np.testing.assert_array_equal(r.values[:2, :2], [[1.0, 1.0], [1.0, 1.0]])


def test_io_round_trip(tmp_path):
    k = random_kernel(np.random.default_rng(8), 3, uniform=False)
    path = tmp_path / "k.json"
    save_kernel(k, path)
    assert load_kernel(path) == k
    assert set(json.loads(path.read_text())) == {"breakpoints", "values"}
    lines = kernel_to_csv(k).splitlines()
    assert lines[0] == "i,j,t_lo_i,t_hi_i,t_lo_j,t_hi_j,value"
    assert len(lines) == 1 + 9
