"""Dense Hermitian matrix helpers and qubit/Bloch-sphere utilities.

Every operator in the package is a plain ``numpy`` complex array. The helpers
here symmetrize on construction, take PSD square roots and pseudo-inverse
square roots, build Bloch projectors and compute Naimark dilations.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg as sla

DECISION_TOL = 1e-9
HYGIENE_TOL = 1e-12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


class ShapeError(ValueError):
    """Raised when a matrix does not have the expected shape."""


class NotPSDError(ValueError):
    """Raised when an operator that must be PSD has a negative eigenvalue."""


class NormalizationError(ValueError):
    """Raised when a Bloch vector that must be unit length is not."""


class POVMError(ValueError):
    """Raised when a collection of effects is not a valid POVM."""


def _square(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ShapeError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def herm(m) -> np.ndarray:
    """Return ``(M + M^dagger) / 2`` as a fresh complex array.

    The result is exactly Hermitian: ``np.max(abs(H - H.conj().T)) == 0``.
    """
    m = _square(m)
    h = (m + m.conj().T) / 2
    # force the diagonal to be real so that H == H^dagger bitwise
    h[np.diag_indices_from(h)] = h.diagonal().real
    return h


def is_hermitian(m, tol: float = HYGIENE_TOL) -> bool:
    m = _square(m)
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def eigh(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of the Hermitian part of ``m`` (ascending)."""
    return np.linalg.eigh(herm(m))


def min_eig(m) -> float:
    return float(np.linalg.eigvalsh(herm(m))[0])


def max_eig(m) -> float:
    return float(np.linalg.eigvalsh(herm(m))[-1])


def is_psd(m, tol: float = DECISION_TOL) -> bool:
    """True iff the smallest eigenvalue of ``m`` is at least ``-tol``."""
    return min_eig(m) >= -tol


def herm_sqrt(m, tol: float = 1e-10) -> np.ndarray:
    """PSD square root. Eigenvalues below ``1e-12`` are clamped to zero."""
    w, v = eigh(m)
    if w[0] < -tol:
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} < -{tol:g}")
    w = np.where(w < HYGIENE_TOL, 0.0, w)
    return herm((v * np.sqrt(w)) @ v.conj().T)


def pinv_sqrt(m, rank_tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of ``sqrt(M)``.

    Eigenvalues ``<= rank_tol`` are treated as kernel. The result ``R``
    satisfies ``R M R = Pi_supp(M)``.
    """
    w, v = eigh(m)
    inv = np.zeros_like(w)
    keep = w > rank_tol
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return herm((v * inv) @ v.conj().T)


def support_basis(m, rank_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal columns spanning the eigenvectors of ``m`` above ``rank_tol``."""
    w, v = eigh(m)
    return v[:, w > rank_tol]


def support_projector(m, rank_tol: float = 1e-10) -> np.ndarray:
    basis = support_basis(m, rank_tol)
    return herm(basis @ basis.conj().T)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return herm(rho / np.trace(rho).real)


def random_psd(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    return herm(g @ g.conj().T)


# --- Bloch sphere ---------------------------------------------------------

def as_bloch(r, tol: float = HYGIENE_TOL) -> np.ndarray:
    """Validate a unit Bloch vector and return it as a float array of length 3."""
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.shape != (3,):
        raise ShapeError(f"Bloch vector must have 3 components, got {r.shape}")
    norm = np.linalg.norm(r)
    if abs(norm - 1.0) > tol:
        raise NormalizationError(f"Bloch vector has norm {norm!r}, expected 1")
    return r


def unit(r) -> np.ndarray:
    """Normalize ``r`` to unit length (zero vectors are rejected)."""
    r = np.asarray(r, dtype=float).reshape(-1)
    norm = np.linalg.norm(r)
    if r.shape != (3,) or norm == 0:
        raise NormalizationError("cannot normalize a zero or non-3D vector")
    return r / norm


def bloch_operator(r) -> np.ndarray:
    """``r . sigma`` for an arbitrary real 3-vector."""
    r = np.asarray(r, dtype=float)
    return r[0] * PAULI_X + r[1] * PAULI_Y + r[2] * PAULI_Z


def bloch_projector(r, sign: int = 1) -> np.ndarray:
    """Rank-one projector ``(1 + sign * r . sigma) / 2`` onto the Bloch direction ``sign * r``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    r = as_bloch(r, tol=1e-9)
    return herm((np.eye(2) + sign * bloch_operator(r)) / 2)


def bloch_vector(rho) -> np.ndarray:
    """Bloch vector ``(tr(rho X), tr(rho Y), tr(rho Z))`` of a qubit operator."""
    rho = _square(rho)
    return np.array([np.trace(rho @ p).real for p in PAULIS])


# --- Naimark dilation -----------------------------------------------------

def validate_povm(effects: Sequence[np.ndarray], tol: float = 1e-10) -> list[np.ndarray]:
    effects = [herm(e) for e in effects]
    if not effects:
        raise POVMError("a POVM needs at least one effect")
    d = effects[0].shape[0]
    for e in effects:
        if e.shape != (d, d):
            raise POVMError("effects have inconsistent dimensions")
        if min_eig(e) < -tol:
            raise POVMError("effect is not positive semidefinite")
    if np.max(np.abs(sum(effects) - np.eye(d))) > tol:
        raise POVMError("effects do not sum to the identity")
    return effects


def naimark_dilate(effects: Sequence[np.ndarray]) -> tuple[list[np.ndarray], int]:
    """Projective dilation of a POVM onto ``H (x) C^k`` with the ancilla last.

    Uses the square-root isometry ``W = sum_b sqrt(B_b) (x) |b>``, completed to
    a unitary ``U`` whose columns ``|i> (x) |0>`` equal ``W``. The returned
    projectors ``P_b = U^dagger (1 (x) |b><b|) U`` satisfy
    ``tr[rho B_b] = tr[(rho (x) |0><0|) P_b]``.

    Returns
    -------
    projectors : list of ndarray
        ``k`` mutually orthogonal projectors summing to the identity on
        dimension ``d * k``.
    embed_dim : int
        ``d * k``.
    """
    effects = validate_povm(effects)
    d, k = effects[0].shape[0], len(effects)
    big = d * k
    w = np.zeros((big, d), dtype=complex)
    for b, e in enumerate(effects):
        w[b::k, :] = herm_sqrt(e)
    u = np.zeros((big, big), dtype=complex)
    first = np.arange(d) * k
    u[:, first] = w
    rest = np.setdiff1d(np.arange(big), first)
    if rest.size:
        u[:, rest] = sla.null_space(w.conj().T)
    projectors = []
    for b in range(k):
        sel = np.zeros((big, big))
        sel[np.arange(d) * k + b, np.arange(d) * k + b] = 1.0
        projectors.append(herm(u.conj().T @ sel @ u))
    return projectors, big


def ancilla_embedding(d: int, k: int) -> np.ndarray:
    """Isometry ``|psi> -> |psi> (x) |0>`` from dimension ``d`` into ``d * k``."""
    v = np.zeros((d * k, d), dtype=complex)
    v[np.arange(d) * k, np.arange(d)] = 1.0
    return v


def real_embedding(m) -> np.ndarray:
    """Real symmetric embedding ``[[Re, -Im], [Im, Re]]`` of a Hermitian matrix."""
    m = np.asarray(m, dtype=complex)
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])
