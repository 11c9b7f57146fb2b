"""Tensor-product grids on an interval or rectangle.

The mesh carries trapezoid quadrature weights; those weights define the
discrete L1 norm and the duality pairing used everywhere else, and double
as the diagonal symmetrizer of the diffusion operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _axis_weights(count: int, length: float) -> np.ndarray:
    h = length / (count - 1)
    w = np.full(count, h)
    w[0] = w[-1] = h / 2
    return w


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform grid on [0, l] (1-D) or [0, l1] x [0, l2] (2-D).

    Nodes are stored flattened in C order (axis 0 slowest).  ``weights``
    are the tensorized trapezoid weights: they are positive and sum to
    the measure of the domain.
    """

    dimension: int
    extent: tuple[float, ...]
    counts: tuple[int, ...]
    spacing: tuple[float, ...]
    nodes: np.ndarray          # (n_nodes, dimension)
    weights: np.ndarray        # (n_nodes,)
    boundary: np.ndarray       # indices of boundary nodes

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def norm_l1(self, u: np.ndarray) -> float:
        """Quadrature-weighted L1 norm."""
        return float(self.weights @ np.abs(u))

    def pairing(self, dual: np.ndarray, u: np.ndarray) -> float:
        """Duality pairing <dual, u> = sum_i w_i dual_i u_i."""
        return float(self.weights @ (dual * u))


def build_mesh(dimension: int, extent, counts) -> SpatialMesh:
    """Build a tensor-product mesh.

    ``extent`` and ``counts`` are scalars in 1-D or length-2 sequences in
    2-D.  Rejects fewer than 3 nodes per axis and nonpositive extents.
    """
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    ext = tuple(float(e) for e in np.atleast_1d(extent))
    cnt = tuple(int(c) for c in np.atleast_1d(counts))
    if len(ext) != dimension or len(cnt) != dimension:
        raise ValueError(
            f"extent/counts must have {dimension} entries, got {len(ext)}/{len(cnt)}"
        )
    if any(e <= 0 for e in ext):
        raise ValueError(f"extent must be positive, got {ext}")
    if any(c < 3 for c in cnt):
        raise ValueError(f"need at least 3 nodes per axis, got {cnt}")

    axes = [np.linspace(0.0, ext[d], cnt[d]) for d in range(dimension)]
    spacing = tuple(ext[d] / (cnt[d] - 1) for d in range(dimension))
    axis_w = [_axis_weights(cnt[d], ext[d]) for d in range(dimension)]

    if dimension == 1:
        nodes = axes[0][:, None]
        weights = axis_w[0].copy()
        boundary = np.array([0, cnt[0] - 1])
    else:
        x, y = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.column_stack([x.ravel(), y.ravel()])
        weights = (axis_w[0][:, None] * axis_w[1][None, :]).ravel()
        i, j = np.meshgrid(np.arange(cnt[0]), np.arange(cnt[1]), indexing="ij")
        on_bd = (i == 0) | (i == cnt[0] - 1) | (j == 0) | (j == cnt[1] - 1)
        boundary = np.flatnonzero(on_bd.ravel())

    return SpatialMesh(
        dimension=dimension,
        extent=ext,
        counts=cnt,
        spacing=spacing,
        nodes=nodes,
        weights=weights,
        boundary=boundary,
    )
