"""Generalized eigenpairs of ``(L, M)``, spectral smoothing and oracles.

The smoothing operator is ``S_t = exp(-t M^{-1} L)``.  On an M-orthonormal
eigenbasis it acts by damping the coefficient of ``v_l`` by
``exp(-t lambda_l)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import KTooLarge, NegativeT, NoConvergence, NumericalError, ShapeMismatch, TooLarge, ZeroSection
from .laplace import ConnectionLaplacian, MassMatrix


def _unpack(L, M):
    if isinstance(L, ConnectionLaplacian):
        M = L.mass if M is None else M
        L = L.L
    if M is None:
        raise ValueError("mass matrix required")
    d = np.asarray(M.diag if isinstance(M, MassMatrix) else M, dtype=float)
    if d.ndim == 2:
        d = np.diag(d).copy()
    return L, d


@dataclass(frozen=True)
class EigenBasis:
    """Ascending M-orthonormal eigenpairs of ``L v = lambda M v``.

    Attributes
    ----------
    eigenvalues : ndarray, shape (k,)
    vectors : ndarray, shape (n, k)
        Column ``l`` is ``v_l``; ``vectors^* diag(mass) vectors = I``.
    mass : ndarray, shape (n,)
        Diagonal of the mass matrix.
    residuals : ndarray, shape (k,)
        ``||L v - lambda M v|| / ||v||`` at construction time.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    mass: np.ndarray
    residuals: np.ndarray

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def is_full(self) -> bool:
        return self.k == self.n

    def coefficients(self, phi) -> np.ndarray:
        """``<<v_l, phi>>`` for every mode (works column-wise on 2-D input)."""
        phi = np.asarray(phi)
        if phi.shape[0] != self.n:
            raise ShapeMismatch(f"section length {phi.shape[0]} != {self.n}")
        w = self.mass[:, None] * phi if phi.ndim == 2 else self.mass * phi
        return self.vectors.conj().T @ w

    def truncate(self, k: int) -> "EigenBasis":
        if not 1 <= k <= self.k:
            raise KTooLarge(f"cannot keep {k} of {self.k} modes")
        return EigenBasis(self.eigenvalues[:k], self.vectors[:, :k], self.mass, self.residuals[:k])

    def lambda1_multiplicity(self, rtol: float = 1e-8) -> int:
        """Number of eigenvalues within ``rtol * lambda_1`` of ``lambda_1``."""
        lam = self.eigenvalues
        tol = rtol * max(abs(lam[0]), np.finfo(float).tiny) if lam[0] > 0 else rtol
        return int(np.sum(lam - lam[0] < tol))

    @property
    def spectral_gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0]) if self.k > 1 else math.inf


def _residuals(L, d, lam, V):
    R = L @ V - (d[:, None] * V) * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)


def smallest_eigenpairs(L, M=None, k: int = 1, tol: float = 1e-9, *, maxiter: int = 10_000,
                        sigma: float | None = None, block: int | None = None, seed: int = 0) -> EigenBasis:
    """The ``k`` smallest generalized eigenpairs by shift-invert subspace iteration.

    A block of ``block`` vectors is repeatedly multiplied by
    ``(L - sigma M)^{-1} M`` (one sparse LU factorization), M-orthonormalized
    and rotated by a Rayleigh-Ritz step.  Iteration stops when every one of
    the first ``k`` Ritz pairs has relative residual below ``tol``.

    Parameters
    ----------
    L : sparse matrix or ConnectionLaplacian
    M : MassMatrix or array, optional
        Taken from ``L`` when it is a :class:`ConnectionLaplacian`.
    k : int
        Number of eigenpairs, ``1 <= k <= n``.
    tol : float
        Residual tolerance ``||L v - lambda M v|| / ||v||``.
    sigma : float, optional
        Shift.  The default is a tiny negative multiple of the mean diagonal
        ratio, which keeps ``L - sigma M`` definite even when ``L`` has a
        kernel (trivial connection).
    block : int, optional
        Subspace size, default ``min(n, max(2k, k + 8))``.

    Raises
    ------
    KTooLarge, NoConvergence
    """
    L, d = _unpack(L, M)
    L = sp.csc_matrix(L, dtype=complex)
    n = L.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} outside 1..{n}")
    p = min(n, block or max(2 * k, k + 8))
    if p < k:
        raise ValueError("block must be at least k")
    if sigma is None:
        sigma = -1e-6 * float(np.real(L.diagonal()).mean() / d.mean())
    lu = spla.splu((L - sigma * sp.diags(d)).tocsc())
    sq = np.sqrt(d)

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) + 1j * rng.standard_normal((n, p))
    for it in range(1, maxiter + 1):
        Y = lu.solve(d[:, None] * X)
        Q, _ = np.linalg.qr(sq[:, None] * Y)
        X = Q / sq[:, None]
        H = X.conj().T @ (L @ X)
        theta, C = np.linalg.eigh(0.5 * (H + H.conj().T))
        X = X @ C
        res = _residuals(L, d, theta[:k], X[:, :k])
        if np.all(res < tol):
            break
    else:
        raise NoConvergence(f"eigensolver did not converge in {maxiter} iterations (max residual {res.max():.2e})")
    V = X[:, :k]
    # one last M-orthonormalization of the kept block against rounding drift
    Q, R = np.linalg.qr(sq[:, None] * V)
    V = (Q * np.sign(np.diag(R)).conj()) / sq[:, None]
    lam = theta[:k]
    return EigenBasis(lam, V, d, _residuals(L, d, lam, V))


def dense_eigenbasis(L, M=None, *, max_n: int = 3000) -> EigenBasis:
    """Full spectrum through the reduction ``M^{-1/2} L M^{-1/2}`` (oracle)."""
    L, d = _unpack(L, M)
    n = L.shape[0]
    if n > max_n:
        raise TooLarge(f"dense eigensolve refused for n={n} > {max_n}")
    Ld = L.toarray() if sp.issparse(L) else np.asarray(L)
    s = 1.0 / np.sqrt(d)
    H = s[:, None] * Ld * s[None, :]
    lam, U = sla.eigh(0.5 * (H + H.conj().T))
    V = s[:, None] * U
    return EigenBasis(lam, V, d, _residuals(sp.csr_matrix(Ld), d, lam, V))


def smooth_section(basis: EigenBasis, phi, t: float) -> np.ndarray:
    """Apply the smoothing operator spectrally.

    ``sum_l exp(-t lambda_l) <<v_l, phi>> v_l``.  With a truncated basis
    this also projects onto the kept modes.  ``phi`` may be 2-D with one
    section per column.
    """
    if t < 0:
        raise NegativeT(f"t must be >= 0, got {t}")
    c = basis.coefficients(phi)
    damp = np.exp(-t * basis.eigenvalues)
    c = damp[:, None] * c if c.ndim == 2 else damp * c
    return basis.vectors @ c


def _taylor_expm(B, tol=1e-16):
    """exp(-B) for Hermitian B by Taylor series with scaling and squaring."""
    nrm = np.linalg.norm(B, 1)
    s = max(0, math.ceil(math.log2(nrm / 0.25))) if nrm > 0.25 else 0
    A = -B / 2.0**s
    n = B.shape[0]
    T = np.eye(n, dtype=B.dtype)
    term = np.eye(n, dtype=B.dtype)
    for j in range(1, 60):
        term = term @ A / j
        T = T + term
        if np.linalg.norm(term, 1) <= tol * np.linalg.norm(T, 1):
            break
    for _ in range(s):
        T = T @ T
    return T


def expm_apply_oracle(L, M, phi, t: float, *, max_n: int = 500, rtol: float = 1e-9) -> np.ndarray:
    """Dense ``exp(-t M^{-1} L) phi`` (validation oracle).

    Two independent evaluations are made on the symmetrized matrix
    ``B = M^{-1/2} L M^{-1/2}``: scipy's Pade-based ``expm`` and a Taylor
    series with scaling and squaring.  They must agree to ``rtol``.
    """
    if t < 0:
        raise NegativeT(f"t must be >= 0, got {t}")
    L, d = _unpack(L, M)
    n = L.shape[0]
    if n > max_n:
        raise TooLarge(f"dense exponential refused for n={n} > {max_n}")
    phi = np.asarray(phi, dtype=complex)
    if t == 0:
        return phi.copy()
    Ld = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=complex)
    s = np.sqrt(d)
    B = t * (Ld / s[:, None] / s[None, :])
    B = 0.5 * (B + B.conj().T)
    x = s[:, None] * phi if phi.ndim == 2 else s * phi
    y1 = sla.expm(-B) @ x
    y2 = _taylor_expm(B) @ x
    scale = np.linalg.norm(y1)
    if scale > 0 and np.linalg.norm(y1 - y2) > rtol * scale:
        raise NumericalError(f"exponential paths disagree: {np.linalg.norm(y1 - y2) / scale:.2e}")
    return y1 / s[:, None] if phi.ndim == 2 else y1 / s


def projective_distance(phi, psi, M) -> float:
    """Fubini-Study distance between the lines through ``phi`` and ``psi``.

    Computed as ``atan2(|psi_perp|, |<<phi, psi>>| / |phi|)``, which equals
    ``arccos(|<<phi, psi>>| / (|phi| |psi|))`` but stays accurate near 0.
    """
    d = np.asarray(M.diag if isinstance(M, MassMatrix) else M, dtype=float)
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    n1 = math.sqrt(np.real(np.vdot(phi, d * phi)))
    n2 = math.sqrt(np.real(np.vdot(psi, d * psi)))
    if n1 == 0 or n2 == 0:
        raise ZeroSection("projective distance needs non-zero sections")
    a = np.vdot(phi, d * psi)
    perp = psi - (a / n1**2) * phi
    sin = math.sqrt(max(np.real(np.vdot(perp, d * perp)), 0.0))
    return math.atan2(sin, abs(a) / n1)
