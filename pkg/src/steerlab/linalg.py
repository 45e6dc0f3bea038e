"""Dense complex linear algebra for two-qubit systems and a single detector qubit.

Conventions used everywhere in the package:

* tensor ordering is system ⊗ detector, detector basis ``(|up>, |down>)``;
* operators are vectorized by column stacking, so that
  ``vectorize(A @ rho @ B) == kron(B.T, A) @ vectorize(rho)``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
PSD_ATOL = 1e-10
NORM_ATOL = 1e-12

# detector basis: index 0 is |up>, index 1 is |down>
UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma^- = (sigma_x - i sigma_y) / 2 lowers |up> to |down>
SIGMA_MINUS = (SIGMA_X - 1j * SIGMA_Y) / 2
SIGMA_PLUS = (SIGMA_X + 1j * SIGMA_Y) / 2


class StateValidationError(ValueError):
    """A matrix failed one of the density-matrix checks.

    ``check`` names the failed invariant: ``"shape"``, ``"hermiticity"``,
    ``"trace"``, ``"psd"`` or ``"norm"``.
    """

    def __init__(self, check: str, message: str):
        super().__init__(f"{check}: {message}")
        self.check = check


def as_matrix(m) -> np.ndarray:
    return np.asarray(m, dtype=complex)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def ket(amplitudes) -> np.ndarray:
    """Return a normalized copy of ``amplitudes`` as a 1-D complex vector."""
    v = np.asarray(amplitudes, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise StateValidationError("norm", "zero vector cannot be normalized")
    return v / n


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def check_pure_state(v, atol: float = NORM_ATOL) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    err = abs(np.linalg.norm(v) - 1.0)
    if err > atol:
        raise StateValidationError("norm", f"state norm deviates from 1 by {err:.3e}")
    return v


def check_hermitian(m: np.ndarray, atol: float) -> None:
    m = as_matrix(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StateValidationError("shape", f"expected a square matrix, got shape {m.shape}")
    err = np.max(np.abs(m - dagger(m))) if m.size else 0.0
    if err > atol:
        raise StateValidationError("hermiticity", f"max |m - m^dagger| = {err:.3e} exceeds {atol:.1e}")


def check_density_matrix(rho, dim: int | None = None, *,
                         herm_atol: float = HERMITIAN_ATOL,
                         trace_atol: float = TRACE_ATOL,
                         psd_atol: float = PSD_ATOL) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a complex array.

    Raises :class:`StateValidationError` naming the first failed check.
    """
    rho = as_matrix(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StateValidationError("shape", f"expected a square matrix, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise StateValidationError("shape", f"expected dimension {dim}, got {rho.shape[0]}")
    check_hermitian(rho, herm_atol)
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_atol:
        raise StateValidationError("trace", f"trace is {tr.real:.12g}, expected 1")
    lam_min = np.linalg.eigvalsh(rho).min()
    if lam_min < -psd_atol:
        raise StateValidationError("psd", f"smallest eigenvalue {lam_min:.3e} is negative")
    return rho


def partial_trace_detector(joint) -> np.ndarray:
    """Trace out the detector qubit of an 8x8 system ⊗ detector operator."""
    joint = as_matrix(joint)
    if joint.shape != (8, 8):
        raise StateValidationError("shape", f"joint operator must be 8x8, got {joint.shape}")
    return np.einsum("idjd->ij", joint.reshape(4, 2, 4, 2))


def herm_eig(m, atol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as the *columns* of the second array.
    """
    m = as_matrix(m)
    check_hermitian(m, atol)
    # symmetrize so round-off in the lower triangle is not silently dropped
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def sqrt_psd(m, atol: float = PSD_ATOL, floor: float = 0.0) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-atol, 0)`` are clamped to zero; anything more
    negative raises ``StateValidationError("psd")``. Eigenvalues below
    ``floor`` are treated as zero as well.
    """
    w, v = herm_eig(m)
    if w.min() < -atol:
        raise StateValidationError("psd", f"eigenvalue {w.min():.3e} below -{atol:.0e}")
    w = np.where(w < floor, 0.0, w)
    return (v * np.sqrt(w)) @ dagger(v)


def expm_hermitian_generator(h, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h`` via its spectral decomposition."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def expm(m) -> np.ndarray:
    """General matrix exponential (scaling and squaring)."""
    return scipy.linalg.expm(as_matrix(m))


def vectorize(m) -> np.ndarray:
    """Column-stacking vectorization of a square matrix."""
    m = as_matrix(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StateValidationError("shape", f"expected a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def devectorize(v, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise StateValidationError("shape", f"vector of length {v.size} is not a vectorized {dim}x{dim} matrix")
    return v.reshape(dim, dim, order="F")


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real
