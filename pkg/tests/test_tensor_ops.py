import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btrt.tensor_ops import (
    cp_compose,
    inner,
    margin_contract,
    matricize,
    stack_contract_all,
    stack_contract_except,
    summand_project,
    tucker_compose,
    vectorize,
)


def random_tensor(rng, dims):
    return rng.standard_normal(dims)


dims_strategy = st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=4)


# ----------------------------------------------------------------------
# vectorize / matricize


def test_vectorize_first_index_fastest():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])  # a[0,0]=1 a[1,0]=3 a[0,1]=2 a[1,1]=4
    assert vectorize(a).tolist() == [1.0, 3.0, 2.0, 4.0]


def test_vectorize_identity_on_vectors():
    assert vectorize(np.array([5.0, 6.0])).tolist() == [5.0, 6.0]


def test_vectorize_constant_tensor():
    assert vectorize(np.ones((2, 2, 2))).tolist() == [1.0] * 8


def test_matricize_mode0_keeps_matrix():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert matricize(a, 0).tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_matricize_mode1_transposes_matrix():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert matricize(a, 1).tolist() == [[1.0, 3.0], [2.0, 4.0]]


def test_matricize_index_map_bruteforce():
    # row l holds entries with mode index l; columns enumerate the remaining
    # indices with earlier modes fastest
    rng = np.random.default_rng(0)
    t = random_tensor(rng, (2, 3, 2))
    m = matricize(t, 2)
    assert m.shape == (2, 6)
    for idx in itertools.product(range(2), range(3), range(2)):
        col = idx[0] + 2 * idx[1]
        assert m[idx[2], col] == t[idx]


def test_matricize_mode_out_of_range():
    with pytest.raises(ValueError):
        matricize(np.ones((2, 2)), 2)


@settings(max_examples=40, deadline=None)
@given(dims=dims_strategy, mode_seed=st.integers(0, 10**6))
def test_matricize_roundtrip_all_modes(dims, mode_seed):
    rng = np.random.default_rng(mode_seed)
    t = random_tensor(rng, tuple(dims))
    for mode in range(len(dims)):
        m = matricize(t, mode)
        # inverse placement by brute-force index enumeration
        rebuilt = np.zeros_like(t)
        other_dims = [d for k, d in enumerate(dims) if k != mode]
        for idx in itertools.product(*[range(d) for d in dims]):
            rest = [idx[k] for k in range(len(dims)) if k != mode]
            col = 0
            stride = 1
            for r, d in zip(rest, other_dims):
                col += r * stride
                stride *= d
            rebuilt[idx] = m[idx[mode], col]
        np.testing.assert_array_equal(rebuilt, t)


# ----------------------------------------------------------------------
# inner


def test_inner_identity_pattern():
    assert inner(np.eye(2), np.eye(2)) == 2.0


def test_inner_zero_tensor():
    rng = np.random.default_rng(1)
    a = random_tensor(rng, (3, 2))
    assert inner(a, np.zeros((3, 2))) == 0.0


def test_inner_matches_elementwise_sum():
    rng = np.random.default_rng(2)
    a = random_tensor(rng, (3, 4))
    b = random_tensor(rng, (3, 4))
    brute = sum(a[i, j] * b[i, j] for i in range(3) for j in range(4))
    assert inner(a, b) == pytest.approx(brute, rel=1e-12)


def test_inner_shape_mismatch():
    with pytest.raises(ValueError):
        inner(np.ones((2, 2)), np.ones((2, 3)))


@settings(max_examples=30, deadline=None)
@given(dims=dims_strategy, seed=st.integers(0, 10**6))
def test_inner_equals_vectorized_dot(dims, seed):
    rng = np.random.default_rng(seed)
    a = random_tensor(rng, tuple(dims))
    b = random_tensor(rng, tuple(dims))
    assert inner(a, b) == pytest.approx(float(vectorize(a) @ vectorize(b)), rel=1e-12, abs=1e-12)


# ----------------------------------------------------------------------
# compositions


def test_cp_single_outer_product():
    b1 = np.array([[1.0], [0.0]])
    b2 = np.array([[0.0], [1.0]])
    out = cp_compose([b1, b2])
    expected = np.zeros((2, 2))
    expected[0, 1] = 1.0
    np.testing.assert_array_equal(out, expected)


def test_cp_zero_summand_is_noop():
    rng = np.random.default_rng(3)
    f1 = rng.standard_normal((3, 1))
    f2 = rng.standard_normal((4, 1))
    padded = [np.hstack([f1, np.zeros((3, 1))]), np.hstack([f2, np.zeros((4, 1))])]
    np.testing.assert_allclose(cp_compose(padded), cp_compose([f1, f2]))


def test_cp_matches_elementwise_oracle():
    rng = np.random.default_rng(4)
    factors = [rng.standard_normal((p, 2)) for p in (3, 2, 4)]
    out = cp_compose(factors)
    for idx in itertools.product(range(3), range(2), range(4)):
        brute = sum(
            factors[0][idx[0], r] * factors[1][idx[1], r] * factors[2][idx[2], r]
            for r in range(2)
        )
        assert out[idx] == pytest.approx(brute, rel=1e-12, abs=1e-12)


def test_cp_mismatched_columns():
    with pytest.raises(ValueError):
        cp_compose([np.ones((2, 2)), np.ones((3, 1))])


def test_tucker_single_cell_core():
    b1 = np.array([[1.0], [0.0]])
    b2 = np.array([[0.0], [1.0]])
    out = tucker_compose(np.array([[2.0]]), [b1, b2])
    expected = np.zeros((2, 2))
    expected[0, 1] = 2.0
    np.testing.assert_array_equal(out, expected)


def test_tucker_superdiagonal_equals_cp():
    rng = np.random.default_rng(5)
    factors = [rng.standard_normal((p, 3)) for p in (4, 2, 3)]
    core = np.zeros((3, 3, 3))
    for r in range(3):
        core[r, r, r] = 1.0
    np.testing.assert_allclose(
        tucker_compose(core, factors), cp_compose(factors), rtol=1e-12, atol=1e-12
    )


def test_tucker_matches_exhaustive_sum():
    rng = np.random.default_rng(6)
    core = rng.standard_normal((2, 3))
    factors = [rng.standard_normal((4, 2)), rng.standard_normal((5, 3))]
    out = tucker_compose(core, factors)
    assert out.shape == (4, 5)
    for v0 in range(4):
        for v1 in range(5):
            brute = sum(
                core[r0, r1] * factors[0][v0, r0] * factors[1][v1, r1]
                for r0 in range(2)
                for r1 in range(3)
            )
            assert out[v0, v1] == pytest.approx(brute, rel=1e-12, abs=1e-12)


def test_tucker_factor_count_mismatch():
    with pytest.raises(ValueError):
        tucker_compose(np.ones((2, 2)), [np.ones((3, 2))])


# ----------------------------------------------------------------------
# projections / contractions


def test_summand_project_picks_out_coordinate():
    x = np.zeros((2, 2))
    x[0, 1] = 7.0
    assert summand_project(x, [np.array([1.0, 0.0]), np.array([0.0, 1.0])]) == 7.0


def test_summand_project_zero_vector():
    rng = np.random.default_rng(7)
    x = random_tensor(rng, (3, 2))
    assert summand_project(x, [np.zeros(3), rng.standard_normal(2)]) == 0.0


def test_summand_project_equals_composed_inner():
    rng = np.random.default_rng(8)
    x = random_tensor(rng, (3, 2, 4))
    betas = [rng.standard_normal(p) for p in (3, 2, 4)]
    composed = cp_compose([b[:, None] for b in betas])
    assert summand_project(x, betas) == pytest.approx(inner(composed, x), rel=1e-12)


def test_margin_contract_matrix_vector_case():
    m = margin_contract(np.eye(2), 0, [np.array([1.0, 1.0])])
    np.testing.assert_allclose(m, [1.0, 1.0])


def test_margin_contract_zero_tensor():
    out = margin_contract(np.zeros((3, 2)), 1, [np.ones(3)])
    np.testing.assert_array_equal(out, np.zeros(2))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), mode=st.integers(0, 2))
def test_margin_contract_defines_summand_project(seed, mode):
    rng = np.random.default_rng(seed)
    dims = (3, 2, 4)
    x = random_tensor(rng, dims)
    betas = [rng.standard_normal(p) for p in dims]
    others = [b for k, b in enumerate(betas) if k != mode]
    m = margin_contract(x, mode, others)
    for _ in range(10):
        beta = rng.standard_normal(dims[mode])
        full = betas.copy()
        full[mode] = beta
        assert float(beta @ m) == pytest.approx(
            summand_project(x, full), rel=1e-10, abs=1e-10
        )


def test_margin_contract_linearity():
    rng = np.random.default_rng(9)
    dims = (3, 4)
    x = random_tensor(rng, dims)
    y = random_tensor(rng, dims)
    other = [rng.standard_normal(4)]
    np.testing.assert_allclose(
        margin_contract(x + y, 0, other),
        margin_contract(x, 0, other) + margin_contract(y, 0, other),
        rtol=1e-12,
    )


def test_stack_contractions_match_per_subject_ops():
    rng = np.random.default_rng(10)
    dims = (3, 4, 2)
    ranks = (2, 2, 3)
    xs = rng.standard_normal((5,) + dims)
    factors = [rng.standard_normal((p, r)) for p, r in zip(dims, ranks)]
    all_c = stack_contract_all(xs, factors)
    assert all_c.shape == (5,) + ranks
    for i in (0, 3):
        for r in itertools.product(*[range(r) for r in ranks]):
            cols = [factors[j][:, r[j]] for j in range(3)]
            assert all_c[(i,) + r] == pytest.approx(
                summand_project(xs[i], cols), rel=1e-10, abs=1e-10
            )
    for skip in range(3):
        part = stack_contract_except(xs, factors, skip)
        contracted = np.tensordot(part, factors[skip], axes=(1, 0))
        moved = np.moveaxis(contracted, -1, 1 + skip)
        np.testing.assert_allclose(moved, all_c, rtol=1e-10)
