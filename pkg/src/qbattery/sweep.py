"""Config files, figure presets, CSV/manifest I/O and parallel parameter sweeps."""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import PositivityError, StepSizeError, Trajectory, check_step_halving, evolve
from .linalg import ContractError
from .model import SystemSpec

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "E_b", "delta_E", "ergotropy", "trace_dev", "min_eig")
MANIFEST_NAME = "manifest.txt"
INT_FIELDS = ("N", "n", "record_every")
STR_FIELDS = ("channels",)

PI = math.pi


class UsageError(ValueError):
    """Bad user input: unknown preset, malformed config, missing column."""


# ---------------------------------------------------------------------------
# values and config files
# ---------------------------------------------------------------------------

_PI_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]*)\s*\*?\s*pi\s*$", re.IGNORECASE)


def parse_number(text: str) -> float:
    """Parse a float, also accepting multiples of pi such as ``1.25pi`` or ``0.7*pi``."""
    text = text.strip()
    m = _PI_RE.match(text)
    try:
        if m:
            coef = m.group(1)
            return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * PI
        return float(text)
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None


def coerce_field(name: str, raw):
    if name not in SystemSpec.field_names():
        raise UsageError(
            f"unknown parameter {name!r}; valid keys: {', '.join(SystemSpec.field_names())}"
        )
    if name in STR_FIELDS:
        return str(raw).strip()
    value = parse_number(raw) if isinstance(raw, str) else float(raw)
    if name in INT_FIELDS:
        if value != int(value):
            raise UsageError(f"{name} must be an integer, got {raw!r}")
        return int(value)
    return value


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise UsageError(f"line {lineno}: duplicate key {key!r}")
        out[key] = coerce_field(key, value)
    return out


def load_config(path) -> SystemSpec:
    params = parse_config(Path(path).read_text())
    return spec_from_params(params)


def spec_from_params(params: dict) -> SystemSpec:
    required = ("omega_a", "omega_c", "omega_d", "g", "J", "kappa", "A", "N", "n")
    missing = [k for k in required if k not in params]
    if missing:
        raise UsageError(f"config is missing required keys: {', '.join(missing)}")
    return SystemSpec(**params)


def format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def format_spec(spec: SystemSpec) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in spec.as_dict().items())


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPlan:
    base: SystemSpec
    varied: str
    values: tuple
    label: str = "custom"
    values_note: str = ""

    def __post_init__(self):
        if self.varied not in SystemSpec.field_names() or self.varied in STR_FIELDS:
            raise UsageError(f"cannot sweep {self.varied!r}: not a numeric SystemSpec field")
        if not self.values:
            raise UsageError("sweep needs at least one value")
        values = tuple(coerce_field(self.varied, v) for v in self.values)
        if len(set(values)) != len(values):
            raise UsageError(f"swept values must be distinct, got {values}")
        object.__setattr__(self, "values", values)

    def specs(self) -> list[SystemSpec]:
        return [self.base.replace(**{self.varied: v}) for v in self.values]


# Parameter columns of the published parameter table.  ``None`` marks the
# varied cell of each panel.
TABLE1 = {
    "fig2a": dict(omega_c=0.5, omega_a=1.0, omega_d=PI, g=None, J=0.95, kappa=0.8, N=2, n=2, A=3.0),
    "fig2b": dict(omega_c=None, omega_a=0.25, omega_d=1.25 * PI, g=1.2, J=0.95, kappa=0.8, N=2, n=2, A=3.0),
    "fig2c": dict(omega_c=0.35, omega_a=None, omega_d=1.25 * PI, g=1.2, J=0.95, kappa=0.8, N=2, n=2, A=3.0),
    "fig3a": dict(omega_c=0.5, omega_a=1.0, omega_d=0.75 * PI, g=0.8, J=0.95, kappa=0.8, N=None, n=2, A=3.0),
    "fig3b": dict(omega_c=0.5, omega_a=1.0, omega_d=1.05 * PI, g=0.8, J=0.95, kappa=0.8, N=2, n=None, A=3.0),
    "fig4a": dict(omega_c=0.5, omega_a=1.0, omega_d=None, g=0.8, J=0.95, kappa=0.8, N=3, n=4, A=3.0),
    "fig4b": dict(omega_c=0.5, omega_a=1.0, omega_d=3 * PI, g=0.8, J=0.95, kappa=0.8, N=3, n=4, A=None),
    "fig4c": dict(omega_c=0.5, omega_a=1.0, omega_d=0.75 * PI, g=0.5, J=None, kappa=0.6, N=3, n=3, A=3.0),
    "fig4d": dict(omega_c=0.5, omega_a=1.0, omega_d=PI, g=0.8, J=0.95, kappa=None, N=2, n=2, A=3.0),
}

# Swept values are not part of the parameter table.  These lists are local
# defaults (marked "artifact default" in the manifest) and can be overridden.
DEFAULT_VALUES = {
    "fig2a": (0.2, 0.4, 0.8, 1.2, 1.6),
    "fig2b": (0.25, 0.5, 0.75, 1.0),
    "fig2c": (0.5, 1.0, 1.5, 2.0),
    "fig3a": (1, 2, 3),
    "fig3b": (1, 2, 3, 4),
    "fig4a": (0.7 * PI, PI, 1.3 * PI),
    "fig4b": (1.0, 3.0, 6.0, 14.5),
    "fig4c": (0.5, 0.95, 1.4),
    "fig4d": (0.1, 0.2, 0.4, 0.8),
}

PRESET_IDS = tuple(TABLE1)


def preset(figure_id: str, values=None, **overrides) -> SweepPlan:
    """Sweep plan for one figure panel; ``overrides`` change numerics such as t_max."""
    if figure_id not in TABLE1:
        raise UsageError(f"unknown preset {figure_id!r}; valid ids: {', '.join(PRESET_IDS)}")
    column = TABLE1[figure_id]
    varied = next(k for k, v in column.items() if v is None)
    note = "artifact default" if values is None else "user supplied"
    values = tuple(DEFAULT_VALUES[figure_id] if values is None else values)
    params = {k: (values[0] if v is None else v) for k, v in column.items()}
    params.update(overrides)
    return SweepPlan(SystemSpec(**params), varied, values, figure_id, note)


# ---------------------------------------------------------------------------
# CSV and manifest
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv(traj: Trajectory) -> str:
    cols = traj.columns()
    lines = [",".join(CSV_COLUMNS)]
    for row in zip(*(cols[c] for c in CSV_COLUMNS)):
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def read_csv(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise UsageError(f"{path}: empty CSV")
    header = lines[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in lines[1:] if line]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _run_name(plan: SweepPlan, index: int) -> str:
    return f"{plan.label}_{plan.varied}_{index:02d}.csv"


def _run_one(job):
    index, spec, path, check_dt, allow_nonpositive = job
    try:
        if check_dt:
            traj, _ = check_step_halving(spec, allow_nonpositive=allow_nonpositive)
        else:
            traj = evolve(spec, allow_nonpositive=allow_nonpositive)
    except PositivityError as exc:
        return index, "failed-positivity", str(exc)
    except StepSizeError as exc:
        return index, "failed-step-halving", str(exc)
    Path(path).write_text(trajectory_csv(traj))
    return index, "ok", ""


@dataclass
class RunArtifact:
    out_dir: Path
    plan: SweepPlan
    files: list
    status: list
    messages: list

    @property
    def ok(self) -> bool:
        return all(s == "ok" for s in self.status)

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / MANIFEST_NAME


def run_sweep(
    plan: SweepPlan,
    out_dir,
    jobs: int = 1,
    *,
    check_dt: bool = False,
    allow_nonpositive: bool = False,
) -> RunArtifact:
    """Run every point of ``plan`` and write one CSV per value plus a manifest.

    Output bytes do not depend on ``jobs``.  A failed point is recorded in the
    manifest and does not stop the others.
    """
    if jobs < 1:
        raise UsageError(f"jobs must be >= 1, got {jobs}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = plan.specs()
    names = [_run_name(plan, i) for i in range(len(specs))]
    work = [
        (i, s, str(out_dir / name), check_dt, allow_nonpositive)
        for i, (s, name) in enumerate(zip(specs, names))
    ]
    if jobs == 1 or len(work) == 1:
        results = [_run_one(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            results = list(pool.map(_run_one, work))
    results.sort()
    status = [r[1] for r in results]
    messages = [r[2] for r in results]
    for name, st, msg in zip(names, status, messages):
        if st != "ok":
            log.error("%s: %s", name, msg)
    artifact = RunArtifact(out_dir, plan, names, status, messages)
    write_manifest(artifact, check_dt=check_dt)
    return artifact


def write_manifest(artifact: RunArtifact, check_dt: bool = False) -> None:
    plan = artifact.plan
    lines = [
        "# qbattery run manifest",
        f"tool = qbattery {__version__}",
        f"label = {plan.label}",
        f"varied = {plan.varied}",
        "values = " + ", ".join(format_value(v) for v in plan.values),
        f"values_source = {plan.values_note or 'user supplied'}",
        "integrator = fixed-step RK4, hermitian symmetrization each step, "
        "trace renormalization above 1e-10",
        f"step_halving_check = {'yes' if check_dt else 'no'}",
        f"runs = {len(artifact.files)}",
    ]
    for i, (spec, name, st, msg) in enumerate(
        zip(plan.specs(), artifact.files, artifact.status, artifact.messages)
    ):
        lines += ["", f"[run {i:02d}]", f"file = {name}", f"status = {st}"]
        if msg:
            lines.append(f"message = {msg}")
        lines += format_spec(spec).splitlines()
    artifact.manifest_path.write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    """Parse a manifest into header fields and a list of per-run records.

    Each run record holds ``file``, ``status`` and the resolved ``spec``.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}")
    header, runs = {}, []
    current = header
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[run"):
            current = {}
            runs.append(current)
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        current[key] = value
    records = []
    for r in runs:
        params = {k: coerce_field(k, v) for k, v in r.items() if k in SystemSpec.field_names()}
        records.append(
            {"file": r["file"], "status": r["status"], "spec": SystemSpec(**params)}
        )
    return {"header": header, "runs": records}


def plan_from_manifest(path) -> SweepPlan:
    """Rebuild the sweep plan recorded in a manifest."""
    info = read_manifest(path)
    head, runs = info["header"], info["runs"]
    varied = head["varied"]
    if not runs:
        raise UsageError("manifest lists no runs")
    values = tuple(getattr(r["spec"], varied) for r in runs)
    base = runs[0]["spec"]
    for r in runs[1:]:
        if r["spec"].replace(**{varied: getattr(base, varied)}) != base:
            raise UsageError("manifest runs differ in more than the varied parameter")
    return SweepPlan(base, varied, values, head["label"], head.get("values_source", ""))


def rerun_manifest(path, out_dir, jobs: int = 1) -> RunArtifact:
    head = read_manifest(path)["header"]
    return run_sweep(
        plan_from_manifest(path),
        out_dir,
        jobs,
        check_dt=head.get("step_halving_check") == "yes",
    )


def simulate(spec: SystemSpec, out_dir, *, check_dt=False, allow_nonpositive=False) -> RunArtifact:
    """Single run, written as a one-point sweep over ``t_max``."""
    plan = SweepPlan(spec, "t_max", (spec.t_max,), "simulate", "single run")
    return run_sweep(plan, out_dir, 1, check_dt=check_dt, allow_nonpositive=allow_nonpositive)


__all__ = [
    "ContractError",
    "PRESET_IDS",
    "RunArtifact",
    "SweepPlan",
    "UsageError",
    "parse_config",
    "preset",
    "read_csv",
    "read_manifest",
    "run_sweep",
    "trajectory_csv",
]
