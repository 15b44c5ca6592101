import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_sparse
from vsmm.decompose import (DecomposeError, Permutation, SparseMatrixCOO,
                            apply_Sigma, apply_Sigma_T, apply_delta,
                            apply_delta_T, bundle_from_json, bundle_to_json,
                            decompose_full, decompose_row_column, is_p_type,
                            is_q_type, load_bundle, pad_perm, read_coo_text,
                            reconstruct_dense, save_bundle, write_coo_text)


def test_permutation_basics():
    p = Permutation([2, 0, 1])
    x = np.array([10, 20, 30])
    assert np.array_equal(p.apply(x), [30, 10, 20])
    assert np.array_equal(p.inverse().apply(p.apply(x)), x)
    assert np.array_equal(p.matrix() @ x, p.apply(x))
    assert p.matrix().T.tolist() == p.inverse().matrix().tolist()


def test_permutation_validation():
    with pytest.raises(DecomposeError):
        Permutation([0, 0, 1])
    with pytest.raises(DecomposeError):
        Permutation([0, 2])


def test_coo_validation():
    with pytest.raises(DecomposeError):
        SparseMatrixCOO.from_entries(2, 2, [(0, 0, 1.0), (0, 0, 2.0)])
    with pytest.raises(DecomposeError):
        SparseMatrixCOO.from_entries(2, 2, [(2, 0, 1.0)])
    with pytest.raises(DecomposeError):
        SparseMatrixCOO.from_entries(2, 2, [(0, 0, 0.0)])


def test_sigma_delta_inverses(rng):
    v = rng.integers(0, 100, (7, 3)).astype(np.uint64)
    assert np.array_equal(apply_delta(apply_Sigma(v)), v)
    assert np.array_equal(apply_Sigma_T(apply_delta_T(v)), v)


def test_pad_perm_fills_numerically():
    p = pad_perm({0: 3, 2: 1}, 4)
    # fixed outputs keep their inputs; the rest fill in numerical order
    assert p.p[0] == 3 and p.p[2] == 1
    assert sorted(p.p.tolist()) == [0, 1, 2, 3]
    assert p.p[1] == 0 and p.p[3] == 2


def test_pad_perm_validation():
    with pytest.raises(DecomposeError):
        pad_perm({0: 1, 2: 1}, 3)
    with pytest.raises(DecomposeError):
        pad_perm({5: 0}, 3)


def test_row_column_split_types(rng):
    a = random_sparse(rng, 9, 7, 15)
    p_mat, lam, sigma3, q_mat = decompose_row_column(a)
    assert is_p_type(np.array(p_mat.rows), np.array(p_mat.cols), p_mat.t)
    assert is_q_type(np.array(q_mat.rows), np.array(q_mat.cols), q_mat.t)
    prod = p_mat.to_dense() @ np.diag(lam) @ sigma3.matrix() @ q_mat.to_dense()
    assert np.allclose(prod, a.to_dense())


def test_identity_decomposition_trivial():
    a = SparseMatrixCOO.from_dense(np.eye(4))
    b = decompose_full(a)
    assert (b.m, b.n, b.t, b.ncol, b.nrow) == (4, 4, 4, 4, 4)
    assert np.allclose(reconstruct_dense(b), np.eye(4))


def test_single_entry_matrix():
    a = SparseMatrixCOO.from_entries(3, 5, [(1, 4, -2.5)])
    b = decompose_full(a)
    assert np.allclose(reconstruct_dense(b), a.to_dense())


@given(st.integers(1, 24), st.integers(1, 24), st.integers(1, 80),
       st.integers(0, 10 ** 6))
@settings(max_examples=60, deadline=None)
def test_decompose_reconstruct_property(m, n, t, seed):
    rng = np.random.default_rng(seed)
    a = random_sparse(rng, m, n, max(t, 1))
    b = decompose_full(a)
    assert np.allclose(reconstruct_dense(b), a.to_dense(), atol=1e-9)


def test_coo_text_roundtrip(tmp_path, rng):
    a = random_sparse(rng, 6, 8, 11)
    path = tmp_path / "a.txt"
    write_coo_text(str(path), a)
    b = read_coo_text(str(path))
    assert np.allclose(a.to_dense(), b.to_dense())


def test_coo_text_error_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 2 1\n1 1\n")
    with pytest.raises(DecomposeError, match=":2:"):
        read_coo_text(str(path))


def test_bundle_json_roundtrip(tmp_path, rng):
    a = random_sparse(rng, 5, 7, 9)
    b = decompose_full(a)
    obj = bundle_to_json(b)
    b2 = bundle_from_json(obj)
    assert np.allclose(reconstruct_dense(b2), a.to_dense(), atol=2e-5)
    path = tmp_path / "b.json"
    save_bundle(str(path), b)
    b3 = load_bundle(str(path))
    assert np.allclose(reconstruct_dense(b3), a.to_dense(), atol=2e-5)
