import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import solve as dense_solve

from capspectral.bbb import (BandedBlockBanded, MaskError, NotDecoupledError, SingularSystemError, bbb_matvec,
                             identity, partition_by_mode, product, solve)
from capspectral.coeffs import BasisSpec, CoefficientVector, Ordering, OrderingError, block_sizes
from capspectral.operators import Kind, OperatorSpec, assemble, variable_coefficient

FM = Ordering.FOURIER_MAJOR


def dense_mask(A):
    """Reference mask built entry by entry from the block/sub-block band definitions."""
    M = np.zeros(A.shape, dtype=bool)
    r0 = np.concatenate([[0], np.cumsum(A.row_sizes)])
    c0 = np.concatenate([[0], np.cumsum(A.col_sizes)])
    for (I, J) in A.stored_blocks():
        lo, up = A.block_band(I, J)
        for r in range(A.row_sizes[I]):
            for c in range(A.col_sizes[J]):
                if -lo <= c - r <= up:
                    M[r0[I] + r, c0[J] + c] = True
    return M


def random_bbb(seed, sizes=(3, 4, 5, 2), L=1, U=1, lam=1, mu=2):
    rng = np.random.default_rng(seed)
    A = BandedBlockBanded(sizes, sizes, (L, U), (lam, mu))
    A.data[:] = rng.standard_normal(A.data.shape)
    return A


@given(st.integers(0, 2**31), st.integers(0, 2), st.integers(0, 2), st.integers(0, 3), st.integers(0, 3))
def test_dense_round_trip_and_mask(seed, L, U, lam, mu):
    A = random_bbb(seed, L=L, U=U, lam=lam, mu=mu)
    D = A.toarray()
    M = dense_mask(A)
    assert np.all(D[~M] == 0)
    np.testing.assert_array_equal(A.mask_pattern().toarray(), M)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        r, c = rng.integers(0, A.shape[0]), rng.integers(0, A.shape[1])
        assert A[r, c] == D[r, c]


def test_write_outside_mask_rejected():
    A = random_bbb(0, L=0, U=0, lam=0, mu=0)
    with pytest.raises(MaskError):
        A[0, 1] = 1.0
    A[1, 1] = 7.0
    assert A[1, 1] == 7.0
    assert A[0, 1] == 0.0


@given(st.integers(0, 2**31))
def test_matvec_matches_dense(seed):
    A = random_bbb(seed)
    v = np.random.default_rng(seed + 1).standard_normal(A.shape[1])
    np.testing.assert_allclose(bbb_matvec(A, v), A.toarray() @ v, rtol=1e-13, atol=1e-13)


def test_matvec_trivial_cases():
    sizes = block_sizes(4, FM)
    v = CoefficientVector(np.arange(25.0), FM, BasisSpec(0.2, 0, 4))
    np.testing.assert_array_equal(bbb_matvec(identity(sizes, FM), v).values, v.values)
    np.testing.assert_array_equal(bbb_matvec(random_bbb(3, sizes=sizes), np.zeros(25)), 0.0)


def test_ordering_mismatch():
    sizes = block_sizes(3, FM)
    v = CoefficientVector(np.ones(16), Ordering.DEGREE_MAJOR, BasisSpec(0.2, 0, 3))
    with pytest.raises(OrderingError):
        bbb_matvec(identity(sizes, FM), v)


def test_arithmetic_matches_dense():
    A, B = random_bbb(1), random_bbb(2, L=0, U=2, lam=2, mu=0)
    np.testing.assert_allclose((A + B).toarray(), A.toarray() + B.toarray())
    np.testing.assert_allclose((A - B).toarray(), A.toarray() - B.toarray())
    np.testing.assert_allclose((2.5 * A).toarray(), 2.5 * A.toarray())
    np.testing.assert_allclose(product(A, B).toarray(), A.toarray() @ B.toarray(), atol=1e-14)


@given(st.integers(0, 2**31))
def test_json_serialization_bit_exact(seed):
    A = random_bbb(seed)
    A.data[0] = 1 / 3
    B = BandedBlockBanded.from_json(A.to_json())
    np.testing.assert_array_equal(A.data, B.data)
    assert B.stored_blocks() == A.stored_blocks()


def test_npz_serialization_bit_exact(tmp_path):
    A = random_bbb(11)
    path = tmp_path / "A.npz"
    A.save_npz(path)
    np.testing.assert_array_equal(BandedBlockBanded.load_npz(path).data, A.data)


def test_operator_serialization_bit_exact():
    A = assemble(OperatorSpec.of(Kind.WEIGHTED_LAPLACIAN_A1, 0.2, 10))
    B = BandedBlockBanded.from_json(A.to_json())
    np.testing.assert_array_equal(A.toarray(), B.toarray())
    assert B.ordering is FM


def test_certified_bandwidths():
    A = BandedBlockBanded((4, 4), (4, 4), (1, 1), (2, 2))
    A[1, 0] = 1.0
    A[0, 6] = 1.0   # block (0, 1), offset +2
    assert A.certified_bandwidths() == ((0, 1), (1, 2))


def test_partition_weighted_laplacian():
    A = assemble(OperatorSpec.of(Kind.WEIGHTED_LAPLACIAN_A1, 0.2, 10))
    system = partition_by_mode(A, np.ones(A.shape[0]))
    assert len(system.blocks) == 11
    assert system.blocks[0].lower == 1 and system.blocks[0].upper == 1
    assert all((b.lower, b.upper) == (2, 2) for b in system.blocks[1:10])


def test_partition_rejects_coupling():
    V = variable_coefficient(lambda x, y, z: x, BasisSpec(0.2, 0, 6), degree=2)
    with pytest.raises(NotDecoupledError):
        partition_by_mode(V, np.ones(V.shape[0]))


def test_partition_zero_matrix():
    sizes = block_sizes(5, FM)
    A = BandedBlockBanded(sizes, sizes, (0, 0), (1, 1), FM)
    system = partition_by_mode(A, np.zeros(A.shape[0]))
    assert len(system.blocks) == 6
    assert all(not b.ab.any() for b in system.blocks)


def test_solve_identity():
    sizes = block_sizes(4, FM)
    b = np.arange(25.0)
    res = solve(identity(sizes, FM), b)
    np.testing.assert_array_equal(res.solution, b)
    assert res.path == "decoupled"


@pytest.mark.parametrize("path", ["auto", "coupled"])
@given(seed=st.integers(0, 2**31))
def test_solve_random_well_conditioned(path, seed):
    sizes = block_sizes(8, FM)
    A = BandedBlockBanded(sizes, sizes, (1, 1), (1, 2), FM)
    rng = np.random.default_rng(seed)
    A.data[:] = 0.1 * rng.standard_normal(A.data.shape)
    for I in range(len(sizes)):
        ab = A.band_data(I, I)
        lo, up = A.block_band(I, I)
        ab[up] += 4.0   # diagonal dominance
    b = rng.standard_normal(A.shape[0])
    res = solve(A, b, path)
    assert res.path == "coupled"
    np.testing.assert_allclose(res.solution, dense_solve(A.toarray(), b), rtol=1e-10, atol=1e-12)


def test_paths_agree_on_weighted_laplacian():
    A = assemble(OperatorSpec.of(Kind.WEIGHTED_LAPLACIAN_A1, 0.2, 40))
    b = np.random.default_rng(5).standard_normal(A.shape[0])
    x1 = solve(A, b, "decoupled")
    x2 = solve(A, b, "coupled")
    assert x1.path == "decoupled" and x2.path == "coupled"
    np.testing.assert_allclose(x1.solution, x2.solution, rtol=1e-11, atol=1e-12 * np.abs(x1.solution).max())
    assert x1.residual < 1e-12


def test_singular_block_reports_mode():
    sizes = block_sizes(3, FM)
    A = identity(sizes, FM)
    A[5, 5] = 0.0   # inside mode k = 1
    with pytest.raises(SingularSystemError) as info:
        solve(A, np.ones(16))
    assert info.value.mode == 1


def test_decoupled_path_refuses_coupled_matrix():
    V = variable_coefficient(lambda x, y, z: 2 + x, BasisSpec(0.2, 0, 5), degree=2)
    with pytest.raises(NotDecoupledError):
        solve(V, np.ones(V.shape[0]), "decoupled")
    res = solve(V, np.ones(V.shape[0]))
    assert res.path == "coupled" and res.residual < 1e-12
