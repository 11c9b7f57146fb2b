"""Time-dependent zero-order coefficients and their compact hulls.

A coefficient family is parametrized over a torus:

    a(t, x) = g0(x) + sum_j sin(2*pi*(omega_j*t + theta_j)) * g_j(x)

Each point of the hull is a phase vector theta in [0,1)^m; translation in
time is rotation of the phases, which makes the hull exactly compact and
the translation flow an explicit torus rotation.  The reference
coefficient sits at theta = 0.  At most three frequencies are allowed so
hull sampling stays dense at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import SpatialMesh

KINDS = ("constant", "time-periodic", "quasi-periodic")

PROFILE_NAMES = ("const", "cos-kx", "gaussian-bump")

# generalized golden ratios: successive powers of 1/phi_m where
# phi_m is the positive root of x^(m+1) = x + 1 (Kronecker lattice)
_LATTICE_ALPHA = {
    2: (0.7548776662466927, 0.5698402909980532),
    3: (0.8191725133961645, 0.6710436067037893, 0.5497004779019703),
}


@dataclass(frozen=True)
class Profile:
    """Named spatial profile; the built-ins cover every shipped scenario.

    const:         amplitude
    cos-kx:        amplitude * cos(k*pi*x/l)   (along the first axis)
    gaussian-bump: amplitude * exp(-|x - center|^2 / width^2)
    """

    name: str
    amplitude: float = 1.0
    k: int = 1
    center: float = 0.5
    width: float = 0.1

    def __post_init__(self):
        if self.name not in PROFILE_NAMES:
            raise ValueError(f"unknown profile {self.name!r}, expected one of {PROFILE_NAMES}")
        if self.name == "gaussian-bump" and self.width <= 0:
            raise ValueError("gaussian-bump width must be positive")
        if self.name == "cos-kx" and self.k < 0:
            raise ValueError("cos-kx wavenumber must be nonnegative")

    def sample_at(self, points: np.ndarray, extent: tuple[float, ...]) -> np.ndarray:
        """Evaluate at arbitrary points of shape (N,) or (N, dim)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if self.name == "const":
            return np.full(pts.shape[0], self.amplitude)
        if self.name == "cos-kx":
            return self.amplitude * np.cos(self.k * np.pi * pts[:, 0] / extent[0])
        r2 = np.sum((pts - self.center) ** 2, axis=1)
        return self.amplitude * np.exp(-r2 / self.width**2)

    def sample(self, mesh: SpatialMesh) -> np.ndarray:
        return self.sample_at(mesh.nodes, mesh.extent)


def _wrap_unit(x: float) -> float:
    # np.mod can round to exactly 1.0 for arguments just below an integer
    y = float(np.mod(x, 1.0))
    return 0.0 if y >= 1.0 else y


@dataclass(frozen=True)
class HullPoint:
    """A point of the hull: torus phases in [0, 1)^m (empty for constants)."""

    phases: tuple[float, ...] = ()

    def __post_init__(self):
        if any(not 0.0 <= p < 1.0 for p in self.phases):
            raise ValueError(f"phases must lie in [0, 1), got {self.phases}")


@dataclass(frozen=True)
class CoefficientField:
    """Almost-periodic coefficient family sampled on a mesh.

    ``bound`` is the essential supremum R of |a| over the hull; for this
    parametric family it equals max_x (|g0(x)| + sum_j |g_j(x)|), which
    the torus orbit attains in closure.
    """

    kind: str
    offset: np.ndarray                      # g0 at mesh nodes
    modes: tuple[np.ndarray, ...]           # g_j at mesh nodes
    frequencies: tuple[float, ...]          # omega_j > 0, cycles per unit time
    bound: float = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}, expected one of {KINDS}")
        m = len(self.modes)
        if len(self.frequencies) != m:
            raise ValueError("one frequency per mode required")
        expected = {"constant": (0,), "time-periodic": (1,), "quasi-periodic": (2, 3)}
        if m not in expected[self.kind]:
            raise ValueError(f"kind {self.kind!r} admits {expected[self.kind]} modes, got {m}")
        if any(om <= 0 for om in self.frequencies):
            raise ValueError("frequencies must be positive")
        total = np.abs(self.offset).copy()
        for g in self.modes:
            total += np.abs(g)
        object.__setattr__(self, "bound", float(total.max()))

    @property
    def n_phases(self) -> int:
        return len(self.modes)

    def reference_point(self) -> HullPoint:
        return HullPoint((0.0,) * self.n_phases)

    def _check_point(self, b: HullPoint) -> None:
        if len(b.phases) != self.n_phases:
            raise ValueError(
                f"hull point has {len(b.phases)} phases, field has {self.n_phases}"
            )

    def translate(self, b: HullPoint, t: float) -> HullPoint:
        """Translation flow on the hull: phases advance by t*omega mod 1."""
        self._check_point(b)
        phases = tuple(
            _wrap_unit(p + t * om) for p, om in zip(b.phases, self.frequencies)
        )
        return HullPoint(phases)

    def values(self, b: HullPoint, t: float) -> np.ndarray:
        """Coefficient of the hull element b at time t, on all nodes."""
        self._check_point(b)
        out = self.offset.copy()
        for g, om, th in zip(self.modes, self.frequencies, b.phases):
            out += np.sin(2.0 * np.pi * (om * t + th)) * g
        return out

    def values_many(self, b: HullPoint, ts: np.ndarray) -> np.ndarray:
        """Vectorized ``values`` over a batch of times; shape (len(ts), n)."""
        self._check_point(b)
        ts = np.asarray(ts, dtype=float)
        out = np.broadcast_to(self.offset, (ts.size, self.offset.size)).copy()
        for g, om, th in zip(self.modes, self.frequencies, b.phases):
            out += np.sin(2.0 * np.pi * (om * ts + th))[:, None] * g[None, :]
        return out

    def evaluate(self, b: HullPoint, t: float, node: int) -> float:
        self._check_point(b)
        val = self.offset[node]
        for g, om, th in zip(self.modes, self.frequencies, b.phases):
            val += np.sin(2.0 * np.pi * (om * t + th)) * g[node]
        return float(val)

    def multiply_state(self, b: HullPoint, t: float, u: np.ndarray) -> np.ndarray:
        """Pointwise product a(t, .) * u; L1-bounded by ``bound`` * ||u||_1."""
        return self.values(b, t) * u

    def hull_sample(self, count: int, seed=None, mode: str = "grid") -> list[HullPoint]:
        """Deterministic phase samples covering the torus.

        grid mode: uniform grid for one phase, Kronecker lattice for two
        or three (both include the reference phase 0).  random mode draws
        uniformly with the given seed.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        m = self.n_phases
        if m == 0:
            return [HullPoint(())] * count
        if mode == "random":
            rng = np.random.default_rng(seed)
            return [HullPoint(tuple(rng.uniform(0.0, 1.0, m))) for _ in range(count)]
        if mode != "grid":
            raise ValueError(f"unknown hull sampling mode {mode!r}")
        if m == 1:
            return [HullPoint((i / count,)) for i in range(count)]
        alpha = _LATTICE_ALPHA[m]
        return [
            HullPoint(tuple(_wrap_unit(i * a) for a in alpha)) for i in range(count)
        ]


def field_from_profiles(
    mesh: SpatialMesh,
    kind: str,
    offset: Profile | None = None,
    modes: list[tuple[float, Profile]] | None = None,
) -> CoefficientField:
    """Sample profiles on the mesh and build the coefficient family."""
    g0 = offset.sample(mesh) if offset is not None else np.zeros(mesh.n_nodes)
    modes = modes or []
    return CoefficientField(
        kind=kind,
        offset=g0,
        modes=tuple(p.sample(mesh) for _, p in modes),
        frequencies=tuple(float(f) for f, _ in modes),
    )
