import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segqe.pauli import (
    DimensionError,
    PauliString,
    basis_index,
    commutes,
    complement,
    embed,
    multiply,
    pauli_basis,
    pauli_basis_matrices,
    qubitwise_commutes,
    restrict,
    shared_support,
)

from conftest import dense_pauli, pauli_strings


def sp(text, n):
    return PauliString.from_sparse(text, n)


def test_xz_is_minus_i_y():
    prod = multiply(PauliString.from_dense("XI"), PauliString.from_dense("ZI"))
    assert prod.pauli == PauliString.from_dense("YI")
    assert prod.coefficient == -1j


@given(pauli_strings())
def test_identity_times_p(p):
    prod = multiply(PauliString.identity(p.n), p)
    assert prod.pauli == p and prod.coefficient == 1


def test_y2y4_times_x1x2_against_dense():
    a, b = sp("Y2 Y4", 5), sp("X1 X2", 5)
    prod = multiply(a, b)
    assert np.allclose(prod.to_matrix(), a.to_matrix() @ b.to_matrix())
    assert prod.pauli == sp("X1 Z2 Y4", 5)


@given(st.data())
@settings(max_examples=60)
def test_multiply_matches_dense(data):
    n = data.draw(st.integers(1, 4))
    a = data.draw(pauli_strings(n=n))
    b = data.draw(pauli_strings(n=n))
    prod = multiply(a, b)
    assert np.allclose(prod.coefficient * dense_pauli(prod.pauli.dense()), dense_pauli(a.dense()) @ dense_pauli(b.dense()))


def test_to_matrix_matches_kron_oracle():
    for p in pauli_basis(3):
        assert np.array_equal(p.to_matrix(), dense_pauli(p.dense()))


@pytest.mark.parametrize(
    "a, b, expected",
    [("X1", "Z1", False), ("X1 X2", "Z1 Z2", True), ("X1", "Z2", True), ("Y1 Z3", "X1 X3", True)],
)
def test_commutes_examples(a, b, expected):
    assert commutes(sp(a, 3), sp(b, 3)) is expected


@given(st.data())
@settings(max_examples=60)
def test_commutes_matches_commutator_norm(data):
    a = data.draw(pauli_strings(n=4))
    b = data.draw(pauli_strings(n=4))
    ma, mb = dense_pauli(a.dense()), dense_pauli(b.dense())
    assert commutes(a, b) == bool(np.linalg.norm(ma @ mb - mb @ ma) < 1e-12)


@pytest.mark.parametrize(
    "a, b, expected, shared",
    [("X1 X2", "X1", True, 1), ("X1 X2", "Z2", False, 1), ("Z2", "Z4", True, 0), ("Z1 Y2", "Z1 Y2", True, 2)],
)
def test_qubitwise_commutes(a, b, expected, shared):
    pa, pb = sp(a, 4), sp(b, 4)
    assert qubitwise_commutes(pa, pb) is expected
    assert shared_support(pa, pb) == shared


@given(st.data())
def test_qubitwise_implies_commuting(data):
    a = data.draw(pauli_strings(n=4))
    b = data.draw(pauli_strings(n=4))
    if qubitwise_commutes(a, b):
        assert commutes(a, b)


def test_restrict_examples():
    p = sp("X1 Z3", 3)
    assert restrict(p, [0, 1]) == PauliString.from_dense("XI")
    assert restrict(p, [2]) == PauliString.from_dense("Z")


@given(pauli_strings(min_n=2, max_n=6))
def test_restrict_embed_round_trip(p):
    support = p.support
    rest = complement(support, p.n)
    assert embed(restrict(p, support), support, p.n) == p
    assert restrict(p, rest).is_identity()


def test_labels():
    p = sp("X1 Y4", 5)
    assert p.dense() == "XIIYI"
    assert p.sparse() == "X1 Y4"
    assert p.support == (0, 3)
    assert p.weight == 2
    assert PauliString.parse("XIIYI") == p
    assert PauliString.parse("X1 Y4", 5) == p
    assert PauliString.identity(3).sparse() in ("I", "")


@pytest.mark.parametrize("text", ["X0", "X6", "Q1", "X1 Z1"])
def test_bad_sparse_labels(text):
    with pytest.raises(ValueError):
        sp(text, 5)


def test_mismatched_sizes():
    with pytest.raises(DimensionError):
        multiply(PauliString.identity(2), PauliString.identity(3))


def test_basis_ordering():
    basis = pauli_basis(2)
    assert len(basis) == 16 and basis[0].is_identity()
    assert all(basis_index(p) == k for k, p in enumerate(basis))
    mats = pauli_basis_matrices(2)
    gram = np.einsum("aij,bji->ab", mats, mats) / 4
    assert np.allclose(gram, np.eye(16))
