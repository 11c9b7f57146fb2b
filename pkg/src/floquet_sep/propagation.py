"""One-step schemes for the reaction-diffusion cocycle and its adjoint.

The default scheme is Strang splitting

    u' = E_{dt/2}(second half) o D_dt o E_{dt/2}(first half) u

where E_s multiplies pointwise by exp(s * a(t_mid, .)) with the
coefficient sampled at the midpoint of each half-interval, and D_dt is
one implicit Euler diffusion step, realized as the banded Cholesky solve

    (W + dt*S) w = W u.

W + dt*S is a Stieltjes matrix, so its Cholesky factor has nonpositive
off-diagonal entries and forward/back substitution only ever adds
nonnegative quantities: the solve maps nonnegative data to nonnegative
data *in floating point*, not merely in exact arithmetic.  Combined with
the positive reaction factors this makes every step unconditionally
positivity-preserving, which the uniqueness experiments require.

Crank-Nicolson diffusion is available as a diagnostic scheme only; it is
second order but violates positivity at large steps.

The implicit Euler solve is self-adjoint in the weighted pairing and the
reaction factors are diagonal, so the exact adjoint of a propagation is
obtained by reversing the step sequence and swapping the two reaction
half-factors of each step; no transposed matrices are ever formed.

Propagators are immutable after construction (the main factorization is
precomputed); distinct trajectories may be evolved concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .coefficients import CoefficientField, HullPoint
from .errors import NumericalError
from .operators import EllipticOperator

SCHEMES = ("strang", "crank-nicolson")

_CHUNK = 512
_RENORM_HI = 1e100
_RENORM_LO = 1e-100
_ALIGN_EPS = 1e-9


@dataclass(frozen=True)
class PropagatorConfig:
    """Stepper configuration.

    dt must divide 1 exactly (dt = 1/q) so that time-one maps compose
    exactly with the unit hull rotation.
    """

    dt: float = 1e-3
    scheme: str = "strang"
    solve_tol: float = 1e-10
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        q = round(1.0 / self.dt)
        if q < 1 or abs(q * self.dt - 1.0) > 1e-9:
            raise ValueError(f"dt must equal 1/q for an integer q, got {self.dt}")

    @property
    def steps_per_unit(self) -> int:
        return round(1.0 / self.dt)


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of one propagation; ``start`` is the hull point at times[0]."""

    times: np.ndarray        # (K+1,)
    states: np.ndarray       # (K+1, n)
    start: HullPoint

    def state_at(self, t: float) -> np.ndarray:
        """State at a recorded time (nearest grid point within rounding)."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-8 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not on the recorded grid")
        return self.states[idx]


class _SubstepSolver:
    """One diffusion substep of length tau: forward map and its W-adjoint."""

    def __init__(self, op: EllipticOperator, tau: float, scheme: str):
        self.tau = tau
        self.scheme = scheme
        self.w = op.weights[:, None]
        self.S = op.form
        half = tau / 2 if scheme == "crank-nicolson" else tau
        try:
            self.cb = cholesky_banded(op.banded_form(half), lower=False, check_finite=False)
        except LinAlgError as exc:
            raise NumericalError(
                f"diffusion factorization failed (tau={tau}, scheme={scheme}): {exc}"
            ) from exc

    def _solve(self, rhs):
        return cho_solve_banded((self.cb, False), rhs, check_finite=False)

    def forward(self, U):
        if self.scheme == "strang":
            return self._solve(self.w * U)
        rhs = self.w * U - (self.tau / 2) * (self.S @ U)
        return self._solve(rhs)

    def adjoint(self, U):
        if self.scheme == "strang":
            # (W + tau S)^{-1} W is W-self-adjoint
            return self._solve(self.w * U)
        # W^{-1} (W - tau/2 S) (W + tau/2 S)^{-1} W
        r = self._solve(self.w * U)
        return (self.w * r - (self.tau / 2) * (self.S @ r)) / self.w

    def residual(self, U, X):
        """Defect of the forward solve, for the construction-time sanity check."""
        if self.scheme == "strang":
            return self.w * X + self.tau * (self.S @ X) - self.w * U
        return (
            self.w * X + (self.tau / 2) * (self.S @ X)
            - (self.w * U - (self.tau / 2) * (self.S @ U))
        )


class Propagator:
    """Solution operator of u_t = L u + a(t,x) u for one coefficient family."""

    def __init__(
        self,
        op: EllipticOperator,
        field: CoefficientField,
        config: PropagatorConfig | None = None,
    ):
        if field.offset.shape[0] != op.mesh.n_nodes:
            raise ValueError("coefficient field and operator live on different meshes")
        self.op = op
        self.field = field
        self.config = config or PropagatorConfig()
        self.mesh = op.mesh
        self._main = _SubstepSolver(op, self.config.dt, self.config.scheme)
        u = np.ones((self.mesh.n_nodes, 1))
        res = self._main.residual(u, self._main.forward(u))
        rel = float(np.max(np.abs(res)) / np.max(op.weights))
        if not np.isfinite(rel) or rel > max(self.config.solve_tol, 1e-12) * 1e4:
            raise NumericalError(f"diffusion solve residual {rel:.3e} too large at dt")

    # -- core loop -------------------------------------------------------

    def _split_span(self, t0: float, t1: float) -> tuple[int, float]:
        span = t1 - t0
        if span < 0:
            raise ValueError(f"t1 must be >= t0, got span {span}")
        dt = self.config.dt
        n_full = int(np.floor(span / dt + _ALIGN_EPS))
        rem = span - n_full * dt
        if rem < 1e-12 * max(1.0, abs(t1) + abs(t0)):
            rem = 0.0
        total = n_full + (1 if rem else 0)
        if total > self.config.max_steps:
            raise ValueError(f"{total} steps exceed max_steps={self.config.max_steps}")
        return n_full, rem

    def _apply_steps(self, U, b, times, solver, adjoint, record=None, offset=0):
        """Apply one step per entry of ``times``, in the given order."""
        tau = solver.tau
        for lo in range(0, len(times), _CHUNK):
            batch = times[lo : lo + _CHUNK]
            e1 = np.exp((tau / 2) * self.field.values_many(b, batch + tau / 4))
            e2 = np.exp((tau / 2) * self.field.values_many(b, batch + 3 * tau / 4))
            for i in range(len(batch)):
                if adjoint:
                    U = e2[i][:, None] * U
                    U = solver.adjoint(U)
                    U = e1[i][:, None] * U
                else:
                    U = e1[i][:, None] * U
                    U = solver.forward(U)
                    U = e2[i][:, None] * U
                if record is not None:
                    record[offset + lo + i + 1] = U[:, 0]
        return U

    def _evolve(self, b, t0, t1, U0, *, adjoint=False, renorm=False, record=None):
        U = np.array(U0, dtype=float, copy=True)
        squeeze = U.ndim == 1
        if squeeze:
            U = U[:, None]
        if U.shape[0] != self.mesh.n_nodes:
            raise ValueError("state has wrong number of nodes")
        n_full, rem = self._split_span(t0, t1)
        dt = self.config.dt
        full_times = t0 + dt * np.arange(n_full)
        log_scale = 0.0

        def maybe_renorm(U, log_scale):
            m = float(np.max(np.abs(U)))
            if m > 0 and not _RENORM_LO < m < _RENORM_HI:
                U = U / m
                log_scale += float(np.log(m))
            return U, log_scale

        try:
            if adjoint:
                if rem:
                    U = self._apply_steps(
                        U, b, np.array([t0 + n_full * dt]),
                        _SubstepSolver(self.op, rem, self.config.scheme), adjoint=True,
                    )
                rev = full_times[::-1]
                for lo in range(0, n_full, _CHUNK):
                    U = self._apply_steps(
                        U, b, rev[lo : lo + _CHUNK], self._main, adjoint=True
                    )
                    if renorm:
                        U, log_scale = maybe_renorm(U, log_scale)
            else:
                for lo in range(0, n_full, _CHUNK):
                    U = self._apply_steps(
                        U, b, full_times[lo : lo + _CHUNK], self._main,
                        adjoint=False, record=record, offset=lo,
                    )
                    if renorm:
                        U, log_scale = maybe_renorm(U, log_scale)
                if rem:
                    U = self._apply_steps(
                        U, b, np.array([t0 + n_full * dt]),
                        _SubstepSolver(self.op, rem, self.config.scheme),
                        adjoint=False, record=record, offset=n_full,
                    )
        except (LinAlgError, FloatingPointError) as exc:
            raise NumericalError(f"linear solve failed during propagation: {exc}") from exc
        if not np.all(np.isfinite(U)):
            raise NumericalError(
                f"non-finite state after propagation over [{t0}, {t1}] "
                f"(scheme={self.config.scheme}, dt={dt}); consider renormalization"
            )
        if squeeze:
            U = U[:, 0]
        return U, log_scale

    # -- public surface ----------------------------------------------------

    def step(self, u: np.ndarray, b: HullPoint, t: float, dt: float | None = None) -> np.ndarray:
        """One step from time t; uses the configured dt by default."""
        u = np.asarray(u, dtype=float)
        U = u[:, None] if u.ndim == 1 else u
        if dt is None or dt == self.config.dt:
            solver = self._main
        else:
            solver = _SubstepSolver(self.op, float(dt), self.config.scheme)
        out = self._apply_steps(U, b, np.array([t]), solver, adjoint=False)
        return out[:, 0] if u.ndim == 1 else out

    def propagate(self, b: HullPoint, t0: float, t1: float, u0: np.ndarray) -> Trajectory:
        """Full trajectory on [t0, t1]; linear in u0, records every step."""
        u0 = np.asarray(u0, dtype=float)
        if u0.ndim != 1:
            raise ValueError("propagate records vector states only")
        n_full, rem = self._split_span(t0, t1)
        k_total = n_full + (1 if rem else 0)
        states = np.empty((k_total + 1, self.mesh.n_nodes))
        states[0] = u0
        times = t0 + self.config.dt * np.arange(n_full + 1)
        if rem:
            times = np.append(times, t1)
        if k_total:
            self._evolve(b, t0, t1, u0, record=states)
        return Trajectory(times=times, states=states, start=b)

    def propagate_final(
        self, b: HullPoint, t0: float, t1: float, u0: np.ndarray, renorm: bool = True
    ) -> tuple[np.ndarray, float]:
        """Final state only, with overflow guarding.

        Returns (u, log_scale): the mathematically propagated state is
        exp(log_scale) * u.
        """
        return self._evolve(b, t0, t1, u0, renorm=renorm)

    def time_one_map(self, b: HullPoint, t0: float = 0.0) -> np.ndarray:
        """Dense matrix of the time-one solution operator starting at t0.

        Entrywise positive for the default scheme (strong positivity of
        the cocycle after one unit of time).
        """
        eye = np.eye(self.mesh.n_nodes)
        out, _ = self._evolve(b, t0, t0 + 1.0, eye)
        return out

    def propagate_adjoint(self, b: HullPoint, t0: float, t1: float, w: np.ndarray) -> np.ndarray:
        """Exact adjoint of ``propagate`` over [t0, t1] in the weighted pairing.

        <w, psi u> = <psi* w, u> holds to roundoff by construction.
        """
        out, _ = self._evolve(b, t0, t1, w, adjoint=True)
        return out

    def propagate_adjoint_final(
        self, b: HullPoint, t0: float, t1: float, w: np.ndarray, renorm: bool = True
    ) -> tuple[np.ndarray, float]:
        return self._evolve(b, t0, t1, w, adjoint=True, renorm=renorm)

    def verify_cocycle(self, b: HullPoint, t1: float, t2: float, u0: np.ndarray) -> float:
        """Relative L1 defect between one-shot and composed propagation.

        psi(t1+t2, b) versus psi(t1, b.t2) o psi(t2, b); zero up to
        floating-point accumulation when both spans sit on the step grid.
        """
        one_shot, _ = self._evolve(b, 0.0, t1 + t2, u0)
        mid, _ = self._evolve(b, 0.0, t2, u0)
        composed, _ = self._evolve(self.field.translate(b, t2), 0.0, t1, mid)
        denom = self.mesh.norm_l1(one_shot)
        if denom == 0.0:
            return 0.0
        return self.mesh.norm_l1(one_shot - composed) / denom
