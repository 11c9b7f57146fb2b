"""Divergence-form diffusion operators with Robin boundary data.

Assembly is done through the symmetric bilinear form S, so the operator

    L = -W^{-1} S      (W = diagonal quadrature weights)

is self-adjoint in the weighted pairing by construction.  Fluxes use
half-grid diffusion samples, which keeps the stencil conservative: with
c = 0 every row of L sums to zero.  Off-diagonal entries of L are
nonnegative and diagonal entries nonpositive, so I - dt*L is an
M-matrix for every dt > 0; the propagation module relies on the
entrywise nonnegativity of its inverse.

Boundary rows come from eliminating the ghost node with the mirrored
half-grid diffusion sample, which is identical to a half-cell flux
balance: node 0 picks up the Robin absorption term  2*a_{1/2}*c_0/h.
Only diagonal diffusion tensors and the outward unit normal are
supported; 2-D is restricted to tensor grids on rectangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .mesh import SpatialMesh

_RESIDUAL_TOL = 1e-7


@dataclass(frozen=True)
class EllipticOperator:
    """Assembled diffusion operator on a mesh.

    ``form`` is the symmetric positive-semidefinite matrix S of the
    associated quadratic form; ``weights`` is the diagonal symmetrizer
    (the mesh quadrature weights).  ``matrix`` is the dense L = -W^{-1}S.
    """

    mesh: SpatialMesh
    a_samples: tuple[np.ndarray, ...]   # half-grid diffusion samples, per axis
    c_samples: np.ndarray               # Robin coefficient per boundary node
    form: np.ndarray                    # S, dense symmetric (n, n)
    bandwidth: int                      # half-bandwidth of S

    @property
    def weights(self) -> np.ndarray:
        return self.mesh.weights

    @property
    def matrix(self) -> np.ndarray:
        """Dense L = -W^{-1} S (rows scaled by the inverse weights)."""
        return -self.form / self.weights[:, None]

    def apply(self, u: np.ndarray) -> np.ndarray:
        """L @ u without forming the dense matrix."""
        return -(self.form @ u) / self.weights

    def banded_form(self, tau: float) -> np.ndarray:
        """Upper banded storage of W + tau*S (for scipy banded Cholesky)."""
        n = self.mesh.n_nodes
        bw = self.bandwidth
        ab = np.zeros((bw + 1, n))
        ab[bw, :] = self.weights + tau * np.diagonal(self.form)
        for k in range(1, bw + 1):
            ab[bw - k, k:] = tau * np.diagonal(self.form, offset=k)
        return ab


def _normalize_a(mesh: SpatialMesh, a_samples) -> tuple[np.ndarray, ...]:
    cnt = mesh.counts
    if mesh.dimension == 1:
        a = np.broadcast_to(np.asarray(a_samples, dtype=float), (cnt[0] - 1,)).copy()
        return (a,)
    if np.isscalar(a_samples):
        return (
            np.full((cnt[0] - 1, cnt[1]), float(a_samples)),
            np.full((cnt[0], cnt[1] - 1), float(a_samples)),
        )
    a1 = np.asarray(a_samples[0], dtype=float)
    a2 = np.asarray(a_samples[1], dtype=float)
    if a1.shape != (cnt[0] - 1, cnt[1]) or a2.shape != (cnt[0], cnt[1] - 1):
        raise ValueError(
            f"2-D diffusion samples must have shapes {(cnt[0] - 1, cnt[1])} and "
            f"{(cnt[0], cnt[1] - 1)}, got {a1.shape} and {a2.shape}"
        )
    return (a1, a2)


def _normalize_c(mesh: SpatialMesh, c_samples) -> np.ndarray:
    nb = len(mesh.boundary)
    c = np.asarray(c_samples, dtype=float)
    if c.ndim == 0:
        return np.full(nb, float(c))
    if c.shape == (nb,):
        return c.copy()
    raise ValueError(f"Robin samples must be scalar or length {nb}, got shape {c.shape}")


def build_operator(mesh: SpatialMesh, a_samples, c_samples=0.0) -> EllipticOperator:
    """Assemble the operator from half-grid diffusion and Robin samples.

    Rejects nonpositive diffusion and negative Robin coefficients.
    """
    a = _normalize_a(mesh, a_samples)
    c = _normalize_c(mesh, c_samples)
    if any(np.any(ai <= 0) for ai in a):
        raise ValueError("diffusion samples must be strictly positive")
    if np.any(c < 0):
        raise ValueError("Robin coefficients must be nonnegative")

    n = mesh.n_nodes
    S = np.zeros((n, n))

    if mesh.dimension == 1:
        h = mesh.spacing[0]
        coeff = a[0] / h
        idx = np.arange(n - 1)
        np.add.at(S, (idx, idx), coeff)
        np.add.at(S, (idx + 1, idx + 1), coeff)
        np.add.at(S, (idx, idx + 1), -coeff)
        np.add.at(S, (idx + 1, idx), -coeff)
        # Robin absorption, scaled by the adjacent half-grid sample
        S[0, 0] += a[0][0] * c[0]
        S[-1, -1] += a[0][-1] * c[1]
        bandwidth = 1
    else:
        n1, n2 = mesh.counts
        h1, h2 = mesh.spacing
        w1 = np.full(n1, h1)
        w1[0] = w1[-1] = h1 / 2
        w2 = np.full(n2, h2)
        w2[0] = w2[-1] = h2 / 2

        def flat(i, j):
            return i * n2 + j

        a1, a2 = a
        for i in range(n1 - 1):
            for j in range(n2):
                coeff = a1[i, j] * w2[j] / h1
                p, q = flat(i, j), flat(i + 1, j)
                S[p, p] += coeff
                S[q, q] += coeff
                S[p, q] -= coeff
                S[q, p] -= coeff
        for i in range(n1):
            for j in range(n2 - 1):
                coeff = a2[i, j] * w1[i] / h2
                p, q = flat(i, j), flat(i, j + 1)
                S[p, p] += coeff
                S[q, q] += coeff
                S[p, q] -= coeff
                S[q, p] -= coeff
        cmap = dict(zip(mesh.boundary.tolist(), c))
        for j in range(n2):  # left/right edges, transverse measure w2
            S[flat(0, j), flat(0, j)] += a1[0, j] * cmap[flat(0, j)] * w2[j]
            S[flat(n1 - 1, j), flat(n1 - 1, j)] += a1[-1, j] * cmap[flat(n1 - 1, j)] * w2[j]
        for i in range(n1):  # bottom/top edges, transverse measure w1
            S[flat(i, 0), flat(i, 0)] += a2[i, 0] * cmap[flat(i, 0)] * w1[i]
            S[flat(i, n2 - 1), flat(i, n2 - 1)] += a2[i, -1] * cmap[flat(i, n2 - 1)] * w1[i]
        bandwidth = n2

    return EllipticOperator(mesh=mesh, a_samples=a, c_samples=c, form=S, bandwidth=bandwidth)


@dataclass(frozen=True)
class SpectrumResult:
    """Smallest eigenvalues of -L, ascending, with L1-normalized vectors."""

    values: np.ndarray      # (k,)
    vectors: np.ndarray     # (n, k), columns normalized in discrete L1
    residuals: np.ndarray   # (k,)


def spectrum(op: EllipticOperator, k: int) -> SpectrumResult:
    """k smallest eigenvalues of -L via the weighted symmetric eigenproblem.

    -L = W^{-1} S, so the pairs solve  S v = mu W v  with S symmetric and
    W diagonal positive; all eigenvalues are real and, for c >= 0,
    nonnegative up to roundoff.
    """
    n = op.mesh.n_nodes
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    try:
        vals, vecs = scipy.linalg.eigh(
            op.form, np.diag(op.weights), subset_by_index=(0, k - 1)
        )
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericalError(f"eigensolver failed: {exc}") from exc

    residuals = np.empty(k)
    for i in range(k):
        v = vecs[:, i]
        nrm = op.mesh.norm_l1(v)
        v = v / nrm
        if op.weights @ v < 0:
            v = -v
        vecs[:, i] = v
        residuals[i] = op.mesh.norm_l1(op.apply(v) + vals[i] * v) / max(1.0, abs(vals[i]))
    if np.max(residuals) > _RESIDUAL_TOL:
        raise NumericalError(
            f"eigensolver residuals too large: {residuals.tolist()}"
        )
    return SpectrumResult(values=vals, vectors=vecs, residuals=residuals)
