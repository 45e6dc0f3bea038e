"""Correlation measures for two-qubit states and the two-parameter example family.

Computational basis order is ``|up up>, |up down>, |down up>, |down down>``.
Entropies are in bits, with ``0 log 0 = 0``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from .linalg import SIGMA_X, SIGMA_Y, SIGMA_Z, dagger, kron, sqrt_psd

PPT_ATOL = 1e-10
# eigenvalues below this are treated as round-off before taking square roots
SQRT_FLOOR = 1e-15

_S2 = 1 / math.sqrt(2)
#: family eigenbasis: up-up, psi+, psi-, down-down (columns)
FAMILY_BASIS = np.array([
    [1, 0, 0, 0],
    [0, _S2, _S2, 0],
    [0, _S2, -_S2, 0],
    [0, 0, 0, 1],
], dtype=complex)


def _check_params(alpha: float, beta: float) -> None:
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise ValueError(f"alpha and beta must lie in [0, 1], got alpha={alpha}, beta={beta}")


def family_probabilities(alpha: float, beta: float) -> np.ndarray:
    """Weights of up-up, psi+, psi-, down-down in the family state."""
    _check_params(alpha, beta)
    p_edge = (1 - beta + alpha * (1 + beta)) / 4
    return np.array([
        p_edge,
        (1 - alpha) * (1 - beta) / 4,
        (1 - alpha) * (1 + 3 * beta) / 4,
        p_edge,
    ])


def family_state(alpha: float, beta: float) -> np.ndarray:
    p = family_probabilities(alpha, beta)
    return (FAMILY_BASIS * p) @ dagger(FAMILY_BASIS)


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    # trace norm of sqrt(rho) sqrt(sigma) is symmetric in its arguments by construction
    s = np.linalg.svd(sqrt_psd(rho, floor=SQRT_FLOOR) @ sqrt_psd(sigma, floor=SQRT_FLOOR),
                      compute_uv=False)
    return float(np.sum(s) ** 2)


def fidelity_deviation(rho, target) -> float:
    return float(np.clip(1.0 - fidelity(rho, target), 0.0, 1.0))


_YY = kron(SIGMA_Y, SIGMA_Y)


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    rho_tilde = _YY @ rho.conj() @ _YY
    # singular values of sqrt(rho) sqrt(rho_tilde) are the square roots of eig(rho rho_tilde)
    lam = np.linalg.svd(sqrt_psd(rho, floor=SQRT_FLOOR) @ sqrt_psd(rho_tilde, floor=SQRT_FLOOR),
                        compute_uv=False)
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def separability_boundary(beta: float) -> float:
    """``alpha`` below which the family state is entangled."""
    return (3 * beta - 1) / (3 * beta + 1)


def concurrence_family(alpha: float, beta: float) -> float:
    _check_params(alpha, beta)
    if alpha < separability_boundary(beta):
        return (3 * beta * (1 - alpha) - (1 + alpha)) / 2
    return 0.0


def discord_family(alpha: float, beta: float) -> float:
    """Closed-form discord of the family state (z-axis measurement).

    At ``alpha = 1`` every logarithm is singular but the prefactor vanishes,
    so the limit 0 is returned.
    """
    _check_params(alpha, beta)
    if alpha == 1.0:
        return 0.0

    def term(coef, arg):
        return 0.0 if coef == 0 else coef * math.log2(arg)

    a = 1 - alpha
    return a / 4 * (term(1 - beta, a * (1 - beta))
                    - term(2 * (1 + beta), a * (1 + beta))
                    + term(1 + 3 * beta, a * (1 + 3 * beta)))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def _binary_entropy_term(c: float) -> float:
    # 1 - H2((1 + c) / 2)
    return 1.0 - shannon_entropy([(1 + c) / 2, (1 - c) / 2])


def discord_family_optimal(alpha: float, beta: float) -> float:
    """Discord of the family state optimized over all measurement axes.

    The family is Bell-diagonal with correlation coefficients
    ``c_x = c_y = -(1 - alpha) beta`` and ``c_z = alpha - (1 - alpha) beta``;
    the optimal local measurement is along the axis of largest ``|c|``.
    """
    p = family_probabilities(alpha, beta)
    mutual = 2.0 - shannon_entropy(p)
    c_xy = (1 - alpha) * beta
    c_z = abs(alpha - (1 - alpha) * beta)
    return max(0.0, mutual - _binary_entropy_term(max(c_xy, c_z)))


def von_neumann_entropy(rho) -> float:
    w = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    return shannon_entropy(np.clip(w, 0.0, None))


def reduced_states(rho) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    return np.einsum("abcb->ac", r), np.einsum("abad->bd", r)


def mutual_information(rho) -> float:
    rho_a, rho_b = reduced_states(rho)
    return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_b) - von_neumann_entropy(rho)


def _measured_conditional_entropy(rho, theta: float, phi: float) -> float:
    """``sum_k p_k S(rho_A | k)`` after measuring the second qubit along ``(theta, phi)``."""
    n_sigma = (math.sin(theta) * math.cos(phi) * SIGMA_X
               + math.sin(theta) * math.sin(phi) * SIGMA_Y
               + math.cos(theta) * SIGMA_Z)
    r = rho.reshape(2, 2, 2, 2)
    total = 0.0
    for sign in (1.0, -1.0):
        proj = (np.eye(2) + sign * n_sigma) / 2
        cond = np.einsum("abcd,db->ac", r, proj)
        pk = np.trace(cond).real
        if pk > 1e-15:
            total += pk * von_neumann_entropy(cond / pk)
    return total


def discord_numeric(rho, angular_resolution: int = 400, n_refine: int = 4) -> float:
    """Discord with projective measurements on the second qubit, by direct search.

    A ``theta x phi`` grid with about ``angular_resolution`` points (poles
    included) is scanned, then the ``n_refine`` best cells are polished with
    Nelder-Mead.
    """
    if angular_resolution < 64:
        raise ValueError("angular_resolution must be at least 64")
    rho = np.asarray(rho, dtype=complex)
    rho = (rho + dagger(rho)) / 2
    n_theta = max(5, math.ceil(math.sqrt(angular_resolution / 2)) + 1)
    n_phi = 2 * (n_theta - 1)
    thetas = np.linspace(0.0, math.pi, n_theta)
    phis = np.linspace(0.0, 2 * math.pi, n_phi, endpoint=False)

    def objective(x):
        return _measured_conditional_entropy(rho, x[0], x[1])

    grid = [(objective((t, f)), t, f) for t in thetas for f in phis]
    grid.sort()
    best = grid[0][0]
    for _, t, f in grid[:n_refine]:
        res = minimize(objective, np.array([t, f]), method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 2000})
        best = min(best, float(res.fun))
    _, rho_b = reduced_states(rho)
    # D = I(A:B) - [S(A) - min_k sum p_k S(A|k)] = S(B) - S(AB) + min
    discord = von_neumann_entropy(rho_b) - von_neumann_entropy(rho) + best
    return max(0.0, discord)


def partial_transpose(rho) -> np.ndarray:
    """Transpose on the second qubit."""
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    return r.transpose(0, 3, 2, 1).reshape(4, 4)


def is_ppt_separable(rho, atol: float = PPT_ATOL) -> bool:
    """Peres-Horodecki test, exact for two qubits."""
    pt = partial_transpose(rho)
    return bool(np.linalg.eigvalsh((pt + dagger(pt)) / 2).min() >= -atol)


__all__ = [
    "FAMILY_BASIS",
    "concurrence",
    "concurrence_family",
    "discord_family",
    "discord_family_optimal",
    "discord_numeric",
    "family_probabilities",
    "family_state",
    "fidelity",
    "fidelity_deviation",
    "is_ppt_separable",
    "mutual_information",
    "partial_transpose",
    "reduced_states",
    "separability_boundary",
    "shannon_entropy",
    "von_neumann_entropy",
]
