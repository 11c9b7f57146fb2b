"""Scenario orchestration: build objects, run experiments, emit reports.

One deterministic pseudo-random stream per scenario, seeded from the
config; every random draw (hull samples, test vectors, uniqueness seeds)
comes from it in a fixed order, so reruns with identical config and seed
produce byte-identical CSVs.  Timestamps live only in the manifest.

CSV conventions: RFC-4180-style (comma separated, CRLF line endings),
header row, '.' decimal separator, 17 significant digits.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import (
    PrincipalFiber,
    _phase_key,
    estimate_separation,
    orbit_fibers,
    principal_fiber,
)
from .coefficients import field_from_profiles
from .config import EXPERIMENTS, ScenarioConfig
from .errors import NumericalError
from .experiments import approximate_global_positive, bundle_membership_test, uniqueness_test
from .mesh import build_mesh
from .operators import build_operator, spectrum
from .propagation import Propagator, PropagatorConfig

_DEPENDENCIES = {
    "spectrum": (),
    "simulate": (),
    "bundle": (),
    "separation": ("bundle",),
    "uniqueness": ("bundle", "separation"),
    "membership": ("bundle", "separation"),
}


def dependency_closure(run) -> list[str]:
    """Requested experiments plus prerequisites, in canonical order."""
    wanted: set[str] = set()

    def add(name):
        if name not in wanted:
            for dep in _DEPENDENCIES[name]:
                add(dep)
            wanted.add(name)

    for name in run:
        add(name)
    return [name for name in EXPERIMENTS if name in wanted]


def build_objects(config: ScenarioConfig):
    """Mesh, operator, coefficient field and propagator from a config."""
    mb = config.mesh
    mesh = build_mesh(mb.dimension, mb.extent, mb.counts)

    if mb.dimension == 1:
        x = mesh.nodes[:, 0]
        mid = 0.5 * (x[:-1] + x[1:])
        a_samples = config.operator.a.sample_at(mid, mesh.extent)
        c = config.operator.c
        c_samples = (c[0], c[0]) if len(c) == 1 else c
    else:
        n1, n2 = mb.counts
        ax0 = np.linspace(0.0, mb.extent[0], n1)
        ax1 = np.linspace(0.0, mb.extent[1], n2)
        mid0 = 0.5 * (ax0[:-1] + ax0[1:])
        g1x, g1y = np.meshgrid(mid0, ax1, indexing="ij")
        a1 = config.operator.a.sample_at(
            np.column_stack([g1x.ravel(), g1y.ravel()]), mesh.extent
        ).reshape(n1 - 1, n2)
        mid1 = 0.5 * (ax1[:-1] + ax1[1:])
        g2x, g2y = np.meshgrid(ax0, mid1, indexing="ij")
        a2 = config.operator.a.sample_at(
            np.column_stack([g2x.ravel(), g2y.ravel()]), mesh.extent
        ).reshape(n1, n2 - 1)
        a_samples = (a1, a2)
        c_samples = config.operator.c[0]

    op = build_operator(mesh, a_samples, c_samples)
    cf = config.coefficient
    coeff = field_from_profiles(mesh, cf.kind, offset=cf.offset, modes=list(cf.modes))
    prop = Propagator(
        op, coeff, PropagatorConfig(dt=config.propagation.dt, scheme=config.propagation.scheme)
    )
    return mesh, op, coeff, prop


@dataclass
class RunManifest:
    """Reproducibility record for one scenario run."""

    version: str
    seed: int
    run: list[str]
    config: dict
    started: str
    finished: str = ""
    status: str = "running"
    error: str = ""
    outputs: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "tool_version": self.version,
                "seed": self.seed,
                "run": self.run,
                "config": self.config,
                "started": self.started,
                "finished": self.finished,
                "status": self.status,
                "error": self.error,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Session:
    """Shared state of one scenario run."""

    def __init__(self, config: ScenarioConfig, out_dir: Path, seed: int):
        self.config = config
        self.out = out_dir
        self.rng = np.random.default_rng(seed)
        self.mesh, self.op, self.coeff, self.prop = build_objects(config)
        self.fiber_cache: dict = {}
        self.hull_points = None
        self.fibers: list[PrincipalFiber] | None = None
        self.separation = None
        self.files: list[Path] = []

    def csv(self, name: str, header, rows) -> None:
        path = self.out / name
        _write_csv(path, header, rows)
        self.files.append(path)

    def fiber_at(self, b) -> PrincipalFiber:
        key = _phase_key(b)
        if key not in self.fiber_cache:
            ex = self.config.experiment
            self.fiber_cache[key] = principal_fiber(
                self.prop, b, tol=ex.fiber_tol, max_back=ex.max_pullback
            )
        return self.fiber_cache[key]


def _run_spectrum(s: _Session) -> None:
    res = spectrum(s.op, s.config.experiment.spectrum_k)
    rows = [(i, res.values[i], res.residuals[i]) for i in range(len(res.values))]
    s.csv("spectrum.csv", ["index", "eigenvalue", "residual"], rows)


def _run_simulate(s: _Session) -> None:
    ex = s.config.experiment
    b0 = s.coeff.reference_point()
    traj = s.prop.propagate(b0, 0.0, ex.simulate_t_end, np.ones(s.mesh.n_nodes))
    stride = ex.simulate_stride
    idx = list(range(0, len(traj.times), stride))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    header = ["t"] + [f"node-{i}" for i in range(s.mesh.n_nodes)]
    rows = [[traj.times[k], *traj.states[k]] for k in idx]
    s.csv("trajectory.csv", header, rows)


def _run_bundle(s: _Session) -> None:
    ex = s.config.experiment
    seed = int(s.rng.integers(2**32))
    s.hull_points = s.coeff.hull_sample(ex.hull_samples, seed=seed, mode=ex.hull_mode)
    s.fibers = [s.fiber_at(b) for b in s.hull_points]
    fiber_rows = []
    growth_rows = []
    m = s.coeff.n_phases
    for idx, fib in enumerate(s.fibers):
        for node in range(s.mesh.n_nodes):
            fiber_rows.append((idx, node, fib.v[node], fib.vstar[node]))
        growth_rows.append([idx, *fib.b.phases, fib.growth])
    s.csv("fibers.csv", ["sample", "node", "v", "vstar"], fiber_rows)
    s.csv(
        "growth.csv",
        ["sample"] + [f"phase-{j}" for j in range(m)] + ["growth"],
        growth_rows,
    )


def _run_separation(s: _Session) -> None:
    ex = s.config.experiment
    s.separation = estimate_separation(
        s.prop,
        s.fibers,
        k_max=ex.k_max,
        trials=ex.trials,
        rng=s.rng,
        k_min=ex.k_min,
        tol=ex.fiber_tol,
        max_back=ex.max_pullback,
    )
    est = s.separation
    rows = [(int(r[0]), int(r[1]), int(r[2]), np.exp(r[3])) for r in est.table]
    s.csv("separation.csv", ["sample", "trial", "k", "r"], rows)
    s.csv(
        "separation_summary.csv",
        ["lambda", "mu", "dprime", "K", "L", "N", "residual"],
        [(est.lam, est.mu, est.dprime, est.K, est.L, est.N, est.residual)],
    )


def _run_uniqueness(s: _Session) -> None:
    ex = s.config.experiment
    b0 = s.coeff.reference_point()
    fiber = s.fiber_at(b0)
    n = s.mesh.n_nodes
    rows = []
    summary = []
    for pair in range(ex.seed_pairs):
        seed_a = s.rng.uniform(0.1, 1.0, n)
        seed_b = s.rng.uniform(0.1, 1.0, n)
        report = uniqueness_test(
            s.prop, b0, fiber, seed_a, seed_b, ex.t_back, ex.t_fwd, strict=True
        )
        for r in report.rows:
            rows.append((pair, r.t_back, r.osc_t0, r.osc_tfwd, r.kappa))
        summary.append((pair, report.rate, report.kappa))
    s.csv("uniqueness.csv", ["pair", "t_back", "osc_t0", "osc_tfwd", "kappa"], rows)
    s.csv("uniqueness_summary.csv", ["pair", "fitted_rate", "kappa"], summary)


def _run_membership(s: _Session) -> None:
    ex = s.config.experiment
    b0 = s.coeff.reference_point()
    u_seed = s.rng.uniform(0.1, 1.0, s.mesh.n_nodes)
    times = range(int(np.floor(ex.t_fwd + 1e-9)) + 1)
    fibers = orbit_fibers(
        s.prop, b0, times, tol=ex.fiber_tol, max_back=ex.max_pullback, cache=s.fiber_cache
    )
    rows = []
    for t_back in ex.t_back:
        gsol = approximate_global_positive(s.prop, b0, t_back, u_seed, ex.t_fwd)
        for t, defect in bundle_membership_test(s.prop, gsol, fibers):
            rows.append((t_back, t, defect))
    s.csv("membership.csv", ["t_back", "t", "defect"], rows)


_RUNNERS = {
    "spectrum": _run_spectrum,
    "simulate": _run_simulate,
    "bundle": _run_bundle,
    "separation": _run_separation,
    "uniqueness": _run_uniqueness,
    "membership": _run_membership,
}


def run_scenario(
    config: ScenarioConfig,
    out_dir: str | Path | None = None,
    seed: int | None = None,
    run=None,
) -> RunManifest:
    """Execute the requested experiments in dependency order.

    Writes one CSV set plus manifest.json into the output directory.  Any
    numerical failure aborts the scenario: the manifest records the
    diagnostic and the error is re-raised for the caller (the CLI maps it
    to a nonzero exit status).
    """
    out = Path(out_dir) if out_dir is not None else Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.experiment.seed if seed is None else int(seed)
    requested = list(run) if run is not None else list(config.experiment.run)
    ordered = dependency_closure(requested)

    manifest = RunManifest(
        version=__version__,
        seed=seed,
        run=ordered,
        config=config.raw,
        started=datetime.now(timezone.utc).isoformat(),
    )
    session = _Session(config, out, seed)
    try:
        for name in ordered:
            _RUNNERS[name](session)
    except NumericalError as exc:
        manifest.status = "error"
        manifest.error = str(exc)
        manifest.finished = datetime.now(timezone.utc).isoformat()
        manifest.outputs = [
            {"path": p.name, "sha256": _sha256(p)} for p in session.files
        ]
        (out / "manifest.json").write_text(manifest.to_json())
        raise
    manifest.status = "ok"
    manifest.finished = datetime.now(timezone.utc).isoformat()
    manifest.outputs = [{"path": p.name, "sha256": _sha256(p)} for p in session.files]
    (out / "manifest.json").write_text(manifest.to_json())
    return manifest
