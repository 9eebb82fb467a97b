"""Closed-form 2x2 Hermitian algebra, Bloch geometry and affine qubit maps.

Bloch vectors are plain float arrays with a trailing axis of length 3; density
matrices are complex arrays with trailing shape ``(2, 2)``. Every function
broadcasts over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Eigenvalue clamp for entropy/log arguments; anything below -EPS is a genuine
# negativity and raises.
EPS = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
IDENTITY = np.eye(2, dtype=complex)


def _is_matrix(x: np.ndarray) -> bool:
    return x.ndim >= 2 and x.shape[-2:] == (2, 2)


def state_from_bloch(r) -> np.ndarray:
    """Return ``(1 + r.sigma) / 2``.

    Vectors with norm above one are accepted on purpose: non-positive maps
    produce them and the domain analysis needs the resulting operators.
    """
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    rho = np.empty(r.shape[:-1] + (2, 2), dtype=complex)
    rho[..., 0, 0] = 0.5 * (1 + z)
    rho[..., 1, 1] = 0.5 * (1 - z)
    rho[..., 0, 1] = 0.5 * (x - 1j * y)
    rho[..., 1, 0] = 0.5 * (x + 1j * y)
    return rho


def bloch_from_state(rho, atol: float = 1e-10) -> np.ndarray:
    """Inverse of :func:`state_from_bloch`.

    Raises:
        ValueError: if ``rho`` is not Hermitian or its trace differs from one
            by more than ``atol``.
    """
    rho = np.asarray(rho, dtype=complex)
    if not _is_matrix(rho):
        raise ValueError(f"expected trailing shape (2, 2), got {rho.shape}")
    if np.any(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))) > atol):
        raise ValueError("operator is not Hermitian")
    tr = np.real(rho[..., 0, 0] + rho[..., 1, 1])
    if np.any(np.abs(tr - 1) > atol):
        raise ValueError(f"trace must be 1, got {tr}")
    r = np.empty(rho.shape[:-2] + (3,))
    r[..., 0] = 2 * np.real(rho[..., 1, 0])
    r[..., 1] = 2 * np.imag(rho[..., 1, 0])
    r[..., 2] = np.real(rho[..., 0, 0] - rho[..., 1, 1])
    return r


def as_bloch(state) -> np.ndarray:
    """Accept either Bloch vectors or density matrices and return Bloch vectors."""
    state = np.asarray(state)
    if _is_matrix(state):
        return bloch_from_state(state)
    if state.shape[-1:] != (3,):
        raise ValueError(f"not a Bloch vector or 2x2 matrix: shape {state.shape}")
    return state.astype(float, copy=False)


def eigenvalues_2x2(a) -> np.ndarray:
    """Eigenvalues of Hermitian 2x2 operators, sorted descending.

    Uses ``tr/2 +- sqrt((tr/2)^2 - det)`` with the discriminant written as
    ``((a00 - a11)/2)^2 + |a01|^2`` so it is never negative.
    """
    a = np.asarray(a, dtype=complex)
    a00 = np.real(a[..., 0, 0])
    a11 = np.real(a[..., 1, 1])
    half_tr = 0.5 * (a00 + a11)
    rad = np.hypot(0.5 * (a00 - a11), np.abs(a[..., 0, 1]))
    return np.stack([half_tr + rad, half_tr - rad], axis=-1)


def trace_norm(a) -> np.ndarray:
    """Sum of absolute eigenvalues of a Hermitian 2x2 operator."""
    ev = eigenvalues_2x2(a)
    return np.abs(ev[..., 0]) + np.abs(ev[..., 1])


def binary_entropy(p):
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("probability must lie in [0, 1]")
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return out[()] if out.ndim == 0 else out


def entropy_of_norm(rn):
    """Von Neumann entropy (bits) of a qubit whose Bloch vector has norm ``rn``.

    Norms in ``(1, 1 + 2*EPS]`` are clamped to 1 (eigenvalue ``-EPS`` clamp);
    larger norms mean a negative eigenvalue and raise.
    """
    rn = np.asarray(rn, dtype=float)
    if np.any(rn > 1 + 2 * EPS):
        raise ValueError("state has a negative eigenvalue beyond tolerance")
    return binary_entropy(0.5 * (1 - np.minimum(rn, 1.0)))


def von_neumann_entropy(state):
    """Von Neumann entropy in bits of Bloch vectors or density matrices."""
    state = np.asarray(state)
    if _is_matrix(state):
        ev = eigenvalues_2x2(state)
        if np.any(ev < -EPS):
            raise ValueError("state has a negative eigenvalue beyond tolerance")
        ev = np.clip(ev, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(ev > 0, ev * np.log2(ev), 0.0)
        out = -terms.sum(axis=-1)
        return out[()] if out.ndim == 0 else out
    return entropy_of_norm(np.linalg.norm(as_bloch(state), axis=-1))


@dataclass(frozen=True, eq=False)
class AffineMap:
    """Bloch-space action ``r -> diag * r + shift`` of a qubit map.

    ``diag`` and ``shift`` may carry leading batch axes (e.g. one map per time
    point); they broadcast against Bloch vectors like any numpy operands.
    Positivity is a query, not an invariant: expanding maps are representable.
    """

    diag: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        k = np.asarray(self.shift, dtype=float)
        if d.shape[-1:] != (3,) or k.shape[-1:] != (3,):
            raise ValueError("diag and shift need a trailing axis of length 3")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "shift", k)

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(np.ones(3), np.zeros(3))

    @classmethod
    def from_lambdas(cls, lx, ly, lz, kappa=(0.0, 0.0, 0.0)) -> "AffineMap":
        return cls(np.array([lx, ly, lz], dtype=float), np.asarray(kappa, dtype=float))

    def __call__(self, r):
        return apply_affine(self, r)

    def __getitem__(self, idx) -> "AffineMap":
        return AffineMap(self.diag[idx], self.shift[idx])

    @property
    def is_unital(self) -> bool:
        return bool(np.all(self.shift == 0))

    def allclose(self, other: "AffineMap", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.diag, other.diag, rtol=0, atol=atol)
            and np.allclose(self.shift, other.shift, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"AffineMap(diag={self.diag.tolist()}, shift={self.shift.tolist()})"


def apply_affine(m: AffineMap, r) -> np.ndarray:
    return m.diag * np.asarray(r, dtype=float) + m.shift


def compose_affine(m2: AffineMap, m1: AffineMap) -> AffineMap:
    """The map ``m2 o m1`` (apply ``m1`` first)."""
    return AffineMap(m2.diag * m1.diag, m2.diag * m1.shift + m2.shift)


def invert_affine(m: AffineMap) -> AffineMap:
    if np.any(m.diag == 0):
        raise ValueError("affine map is singular (some lambda is zero)")
    inv = 1.0 / m.diag
    return AffineMap(inv, -inv * m.shift)
