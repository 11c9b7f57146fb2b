"""Scenario configuration: TOML-subset parsing with full validation.

Every invalid field produces a named error carrying the config path of
the offending key, and parsing reports *all* errors, not just the first.
Unknown keys are rejected (typo protection); defaults are injected only
for omitted optional keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .coefficients import KINDS, PROFILE_NAMES, Profile
from .errors import ConfigError
from .propagation import SCHEMES

EXPERIMENTS = ("spectrum", "simulate", "bundle", "separation", "uniqueness", "membership")

_PROFILE_KEYS = {"name", "amplitude", "value", "k", "center", "width"}


@dataclass(frozen=True)
class MeshBlock:
    dimension: int
    extent: tuple[float, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class OperatorBlock:
    a: Profile
    c: tuple[float, ...]    # scalar broadcast or per-end values (1-D)


@dataclass(frozen=True)
class CoefficientBlock:
    kind: str
    offset: Profile
    modes: tuple[tuple[float, Profile], ...]


@dataclass(frozen=True)
class PropagationBlock:
    dt: float
    scheme: str


@dataclass(frozen=True)
class ExperimentBlock:
    run: tuple[str, ...]
    seed: int
    spectrum_k: int
    hull_samples: int
    hull_mode: str
    trials: int
    k_min: int
    k_max: int
    fiber_tol: float
    max_pullback: int
    t_back: tuple[float, ...]
    t_fwd: float
    seed_pairs: int
    simulate_t_end: float
    simulate_stride: int


@dataclass(frozen=True)
class OutputBlock:
    directory: str


@dataclass(frozen=True)
class ScenarioConfig:
    mesh: MeshBlock
    operator: OperatorBlock
    coefficient: CoefficientBlock
    propagation: PropagationBlock
    experiment: ExperimentBlock
    output: OutputBlock
    raw: dict = field(repr=False, default_factory=dict)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


class _Ctx:
    def __init__(self):
        self.errors: list[str] = []

    def err(self, path: str, msg: str) -> None:
        self.errors.append(f"{path}: {msg}")

    def table(self, parent: dict, path: str, key: str, required=False) -> dict | None:
        if key not in parent:
            if required:
                self.err(f"{path}{key}", "required table is missing")
            return None
        val = parent[key]
        if not isinstance(val, dict):
            self.err(f"{path}{key}", f"expected a table, got {type(val).__name__}")
            return None
        return val

    def reject_unknown(self, tab: dict, path: str, allowed) -> None:
        for key in tab:
            if key not in allowed:
                self.err(f"{path}.{key}" if path else key, "unknown key")

    def num(self, tab, path, key, default=None, required=False, cond=None, cond_msg=""):
        if key not in tab:
            if required:
                self.err(f"{path}.{key}", "required key is missing")
            return default
        val = tab[key]
        if not _is_num(val):
            self.err(f"{path}.{key}", f"expected a number, got {val!r}")
            return default
        if cond is not None and not cond(val):
            self.err(f"{path}.{key}", cond_msg or "invalid value")
            return default
        return float(val)

    def integer(self, tab, path, key, default=None, required=False, cond=None, cond_msg=""):
        if key not in tab:
            if required:
                self.err(f"{path}.{key}", "required key is missing")
            return default
        val = tab[key]
        if not _is_int(val):
            self.err(f"{path}.{key}", f"expected an integer, got {val!r}")
            return default
        if cond is not None and not cond(val):
            self.err(f"{path}.{key}", cond_msg or "invalid value")
            return default
        return int(val)

    def string(self, tab, path, key, default=None, required=False, choices=None):
        if key not in tab:
            if required:
                self.err(f"{path}.{key}", "required key is missing")
            return default
        val = tab[key]
        if not isinstance(val, str):
            self.err(f"{path}.{key}", f"expected a string, got {val!r}")
            return default
        if choices is not None and val not in choices:
            self.err(f"{path}.{key}", f"expected one of {list(choices)}, got {val!r}")
            return default
        return val


def _parse_profile(ctx: _Ctx, tab, path: str, default: Profile) -> Profile:
    if tab is None:
        return default
    if not isinstance(tab, dict):
        ctx.err(path, f"expected a profile table, got {type(tab).__name__}")
        return default
    ctx.reject_unknown(tab, path, _PROFILE_KEYS)
    name = ctx.string(tab, path, "name", required=True, choices=PROFILE_NAMES)
    if "amplitude" in tab and "value" in tab:
        ctx.err(f"{path}.value", "give either amplitude or value, not both")
    amp = ctx.num(tab, path, "amplitude", default=None)
    if amp is None:
        amp = ctx.num(tab, path, "value", default=1.0)
    k = ctx.integer(tab, path, "k", default=1, cond=lambda v: v >= 0,
                    cond_msg="wavenumber must be nonnegative")
    center = ctx.num(tab, path, "center", default=0.5)
    width = ctx.num(tab, path, "width", default=0.1, cond=lambda v: v > 0,
                    cond_msg="width must be positive")
    if name is None:
        return default
    try:
        return Profile(name=name, amplitude=amp, k=k, center=center, width=width)
    except ValueError as exc:
        ctx.err(path, str(exc))
        return default


def _num_list(ctx: _Ctx, tab, path, key, default, dim=None, cond=None, cond_msg=""):
    """Scalar-or-array of numbers; scalar broadcasts to length ``dim`` (or 1)."""
    if key not in tab:
        return default
    val = tab[key]
    if _is_num(val):
        val = [val] * (dim or 1)
    if not isinstance(val, list) or not all(_is_num(v) for v in val):
        ctx.err(f"{path}.{key}", f"expected a number or array of numbers, got {val!r}")
        return default
    if dim is not None and len(val) != dim:
        ctx.err(f"{path}.{key}", f"expected {dim} entries, got {len(val)}")
        return default
    if cond is not None and not all(cond(v) for v in val):
        ctx.err(f"{path}.{key}", cond_msg or "invalid value")
        return default
    return tuple(float(v) for v in val)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario; raises ConfigError with all problems."""
    ctx = _Ctx()
    try:
        raw = tomllib.loads(text)
    except (tomllib.TOMLDecodeError, ValueError) as exc:
        raise ConfigError([f"config: not parseable: {exc}"]) from exc

    ctx.reject_unknown(
        raw, "", {"mesh", "operator", "coefficient", "propagation", "experiment", "output"}
    )

    # ---- mesh --------------------------------------------------------
    mesh_tab = ctx.table(raw, "", "mesh", required=True) or {}
    ctx.reject_unknown(mesh_tab, "mesh", {"dimension", "extent", "counts"})
    dimension = ctx.integer(
        mesh_tab, "mesh", "dimension", required=True,
        cond=lambda v: v in (1, 2), cond_msg="must be 1 or 2",
    ) or 1
    extent = _num_list(ctx, mesh_tab, "mesh", "extent", None, dim=dimension,
                       cond=lambda v: v > 0, cond_msg="extent must be positive")
    if extent is None and "extent" not in mesh_tab:
        ctx.err("mesh.extent", "required key is missing")
    counts_raw = mesh_tab.get("counts")
    counts = None
    if counts_raw is None:
        ctx.err("mesh.counts", "required key is missing")
    else:
        if _is_int(counts_raw):
            counts_raw = [counts_raw] * dimension
        if (not isinstance(counts_raw, list)
                or not all(_is_int(v) for v in counts_raw)
                or len(counts_raw) != dimension):
            ctx.err("mesh.counts", f"expected {dimension} integers, got {counts_raw!r}")
        elif any(v < 3 for v in counts_raw):
            ctx.err("mesh.counts", "need at least 3 nodes per axis")
        else:
            counts = tuple(int(v) for v in counts_raw)
    mesh_block = MeshBlock(
        dimension=dimension,
        extent=extent or (1.0,) * dimension,
        counts=counts or (3,) * dimension,
    )

    # ---- operator ----------------------------------------------------
    op_tab = ctx.table(raw, "", "operator") or {}
    ctx.reject_unknown(op_tab, "operator", {"a", "c"})
    a_profile = _parse_profile(ctx, op_tab.get("a"), "operator.a", Profile("const", 1.0))
    c_dim = 2 if dimension == 1 else 1
    c_vals = _num_list(ctx, op_tab, "operator", "c", (0.0,) * c_dim, dim=None,
                       cond=lambda v: v >= 0,
                       cond_msg="Robin coefficients must be nonnegative")
    if c_vals is not None and len(c_vals) not in (1, c_dim):
        ctx.err("operator.c", f"expected a scalar or {c_dim} values, got {len(c_vals)}")
        c_vals = (0.0,) * c_dim
    operator_block = OperatorBlock(a=a_profile, c=c_vals)

    # ---- coefficient ---------------------------------------------------
    co_tab = ctx.table(raw, "", "coefficient") or {}
    ctx.reject_unknown(co_tab, "coefficient", {"kind", "offset", "modes"})
    kind = ctx.string(co_tab, "coefficient", "kind", default="constant", choices=KINDS)
    offset = _parse_profile(ctx, co_tab.get("offset"), "coefficient.offset",
                            Profile("const", 0.0))
    modes_raw = co_tab.get("modes", [])
    modes: list[tuple[float, Profile]] = []
    if not isinstance(modes_raw, list):
        ctx.err("coefficient.modes", "expected an array of tables")
    else:
        for i, mode in enumerate(modes_raw):
            mpath = f"coefficient.modes[{i}]"
            if not isinstance(mode, dict):
                ctx.err(mpath, "expected a table")
                continue
            ctx.reject_unknown(mode, mpath, {"frequency", "profile"})
            freq = ctx.num(mode, mpath, "frequency", required=True,
                           cond=lambda v: v > 0, cond_msg="frequency must be positive")
            prof = _parse_profile(ctx, mode.get("profile"), f"{mpath}.profile",
                                  Profile("const", 1.0))
            if "profile" not in mode:
                ctx.err(f"{mpath}.profile", "required table is missing")
            modes.append((freq or 1.0, prof))
    expected_modes = {"constant": (0,), "time-periodic": (1,), "quasi-periodic": (2, 3)}
    if kind in expected_modes and len(modes) not in expected_modes[kind]:
        ctx.err("coefficient.modes",
                f"kind {kind!r} requires {expected_modes[kind]} modes, got {len(modes)}")
    coefficient_block = CoefficientBlock(kind=kind or "constant", offset=offset,
                                         modes=tuple(modes))

    # ---- propagation ---------------------------------------------------
    pr_tab = ctx.table(raw, "", "propagation") or {}
    ctx.reject_unknown(pr_tab, "propagation", {"dt", "scheme"})
    dt = ctx.num(pr_tab, "propagation", "dt", default=1e-3,
                 cond=lambda v: v > 0, cond_msg="dt must be positive")
    if dt is not None and dt > 0:
        q = round(1.0 / dt)
        if q < 1 or abs(q * dt - 1.0) > 1e-9:
            ctx.err("propagation.dt", f"dt must equal 1/q for an integer q, got {dt}")
    scheme = ctx.string(pr_tab, "propagation", "scheme", default="strang", choices=SCHEMES)
    propagation_block = PropagationBlock(dt=dt or 1e-3, scheme=scheme or "strang")

    # ---- experiment ------------------------------------------------------
    ex_tab = ctx.table(raw, "", "experiment") or {}
    allowed = {"run", "seed", "spectrum_k", "hull_samples", "hull_mode", "trials",
               "k_min", "k_max", "fiber_tol", "max_pullback", "t_back", "t_fwd",
               "seed_pairs", "simulate_t_end", "simulate_stride"}
    ctx.reject_unknown(ex_tab, "experiment", allowed)
    run_raw = ex_tab.get("run", ["spectrum"])
    if isinstance(run_raw, str):
        run_raw = [run_raw]
    run: list[str] = []
    if not isinstance(run_raw, list) or not all(isinstance(r, str) for r in run_raw):
        ctx.err("experiment.run", f"expected an array of experiment names, got {run_raw!r}")
    else:
        for r in run_raw:
            if r not in EXPERIMENTS:
                ctx.err("experiment.run", f"unknown experiment {r!r}, "
                                          f"expected subset of {list(EXPERIMENTS)}")
            else:
                run.append(r)
    seed = ctx.integer(ex_tab, "experiment", "seed", default=0,
                       cond=lambda v: v >= 0, cond_msg="seed must be nonnegative")
    t_back = _num_list(ctx, ex_tab, "experiment", "t_back", (2.0, 4.0, 8.0, 16.0),
                       cond=lambda v: v > 0, cond_msg="horizons must be positive")
    if t_back is not None and list(t_back) != sorted(set(t_back)):
        ctx.err("experiment.t_back", "horizons must be strictly increasing")
    experiment_block = ExperimentBlock(
        run=tuple(run),
        seed=seed if seed is not None else 0,
        spectrum_k=ctx.integer(ex_tab, "experiment", "spectrum_k", default=6,
                               cond=lambda v: v >= 1, cond_msg="need at least 1"),
        hull_samples=ctx.integer(ex_tab, "experiment", "hull_samples", default=8,
                                 cond=lambda v: v >= 1, cond_msg="need at least 1"),
        hull_mode=ctx.string(ex_tab, "experiment", "hull_mode", default="grid",
                             choices=("grid", "random")),
        trials=ctx.integer(ex_tab, "experiment", "trials", default=4,
                           cond=lambda v: v >= 1, cond_msg="need at least 1"),
        k_min=ctx.integer(ex_tab, "experiment", "k_min", default=2,
                          cond=lambda v: v >= 0, cond_msg="must be nonnegative"),
        k_max=ctx.integer(ex_tab, "experiment", "k_max", default=8,
                          cond=lambda v: v >= 2, cond_msg="need at least 2"),
        fiber_tol=ctx.num(ex_tab, "experiment", "fiber_tol", default=1e-10,
                          cond=lambda v: v > 0, cond_msg="tolerance must be positive"),
        max_pullback=ctx.integer(ex_tab, "experiment", "max_pullback", default=64,
                                 cond=lambda v: v >= 1, cond_msg="need at least 1"),
        t_back=t_back or (2.0, 4.0, 8.0, 16.0),
        t_fwd=ctx.num(ex_tab, "experiment", "t_fwd", default=4.0,
                      cond=lambda v: v > 0, cond_msg="must be positive"),
        seed_pairs=ctx.integer(ex_tab, "experiment", "seed_pairs", default=3,
                               cond=lambda v: v >= 1, cond_msg="need at least 1"),
        simulate_t_end=ctx.num(ex_tab, "experiment", "simulate_t_end", default=1.0,
                               cond=lambda v: v > 0, cond_msg="must be positive"),
        simulate_stride=ctx.integer(ex_tab, "experiment", "simulate_stride", default=1,
                                    cond=lambda v: v >= 1, cond_msg="need at least 1"),
    )

    # ---- output --------------------------------------------------------
    out_tab = ctx.table(raw, "", "output") or {}
    ctx.reject_unknown(out_tab, "output", {"directory"})
    directory = ctx.string(out_tab, "output", "directory", default="out")
    output_block = OutputBlock(directory=directory or "out")

    if ctx.errors:
        raise ConfigError(ctx.errors)
    return ScenarioConfig(
        mesh=mesh_block,
        operator=operator_block,
        coefficient=coefficient_block,
        propagation=propagation_block,
        experiment=experiment_block,
        output=output_block,
        raw=raw,
    )
