import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gjm.matqm import (
    NormalizationError,
    NotPSDError,
    POVMError,
    ShapeError,
    ancilla_embedding,
    bloch_projector,
    herm,
    herm_sqrt,
    is_psd,
    naimark_dilate,
    pinv_sqrt,
    random_density,
    random_psd,
    real_embedding,
    support_projector,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 6)


def test_is_psd_examples(rng):
    assert is_psd(np.eye(2), 1e-9)
    assert not is_psd(np.diag([1.0, -0.5]), 1e-9)
    r = rng.standard_normal(3)
    assert is_psd(bloch_projector(r / np.linalg.norm(r)), 1e-9)


def test_non_square_rejected():
    with pytest.raises(ShapeError):
        is_psd(np.ones((2, 3)))


def test_herm_sqrt_examples():
    assert np.allclose(herm_sqrt(np.eye(2)), np.eye(2))
    assert np.allclose(herm_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    with pytest.raises(NotPSDError):
        herm_sqrt(np.diag([1.0, -1e-6]))


def test_pinv_sqrt_examples():
    assert np.allclose(pinv_sqrt(np.eye(2)), np.eye(2))
    assert np.allclose(pinv_sqrt(np.diag([4.0, 0.0])), np.diag([0.5, 0.0]))


def test_bloch_projector_examples():
    assert np.allclose(bloch_projector([0, 0, 1], 1), np.diag([1, 0]))
    assert np.allclose(bloch_projector([1, 0, 0], 1), 0.5 * np.ones((2, 2)))
    with pytest.raises(NormalizationError):
        bloch_projector([0, 0, 2], 1)


@given(seeds, dims)
def test_herm_is_exactly_hermitian(seed, d):
    rng = np.random.default_rng(seed)
    m = herm(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    assert np.max(np.abs(m - m.conj().T)) == 0


@given(seeds, dims)
def test_herm_sqrt_squares_back(seed, d):
    m = random_psd(d, np.random.default_rng(seed))
    s = herm_sqrt(m)
    assert np.max(np.abs(s @ s - m)) <= 1e-9 * max(1.0, np.abs(m).max())


@given(seeds, dims, st.integers(1, 5))
def test_pinv_sqrt_gives_support_projector(seed, d, rank):
    rank = min(rank, d - 1)
    m = random_psd(d, np.random.default_rng(seed), rank=rank)
    r = pinv_sqrt(m)
    assert np.max(np.abs(r @ m @ r - support_projector(m))) <= 1e-9


def test_naimark_projective_input():
    projs, big = naimark_dilate([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    v = ancilla_embedding(2, 2)
    assert big == 4
    for p, e in zip(projs, [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]):
        assert np.allclose(v.conj().T @ p @ v, e, atol=1e-12)


def test_naimark_trine(rng):
    kets = [np.array([np.cos(a), np.sin(a)]) for a in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
    trine = [2 / 3 * np.outer(k, k) for k in kets]
    projs, big = naimark_dilate(trine)
    assert big == 6 and len(projs) == 3
    v = ancilla_embedding(2, 3)
    for _ in range(20):
        rho = random_density(2, rng)
        big_rho = v @ rho @ v.conj().T
        for p, e in zip(projs, trine):
            assert abs(np.trace(rho @ e) - np.trace(big_rho @ p)) <= 1e-10


def test_naimark_single_outcome():
    projs, big = naimark_dilate([np.eye(2)])
    assert big == 2 and np.allclose(projs[0], np.eye(2))


def test_naimark_rejects_non_povm():
    with pytest.raises(POVMError):
        naimark_dilate([np.eye(2), np.eye(2)])


@given(seeds, st.integers(2, 4), st.integers(2, 4))
def test_naimark_projectors_orthogonal(seed, d, k):
    rng = np.random.default_rng(seed)
    raw = [random_psd(d, rng) for _ in range(k)]
    tot = sum(raw)
    w, v = np.linalg.eigh(tot)
    inv = (v / np.sqrt(w)) @ v.conj().T
    effects = [inv @ e @ inv for e in raw]
    projs, big = naimark_dilate(effects)
    for i, p in enumerate(projs):
        for j, q in enumerate(projs):
            assert np.max(np.abs(p @ q - (p if i == j else 0))) <= 1e-10
    assert np.max(np.abs(sum(projs) - np.eye(big))) <= 1e-12


@given(seeds, dims)
def test_real_embedding_preserves_psd(seed, d):
    rng = np.random.default_rng(seed)
    m = herm(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    w = np.linalg.eigvalsh(m)
    we = np.linalg.eigvalsh(real_embedding(m))
    # every eigenvalue appears twice in the embedding
    assert np.allclose(np.sort(np.repeat(w, 2)), we, atol=1e-10)
    assert is_psd(m) == is_psd(real_embedding(m))
