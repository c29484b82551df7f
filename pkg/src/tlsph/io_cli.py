"""Run configuration, snapshot/probe writers, and the command line.

Config files are plain ``key = value`` text with two sections::

    [case]
    name = oscillating_plate
    nu = 0.4

    [run]
    hourglass = on
    output_dir = out

``#`` starts a comment.  Unknown keys are rejected with their line number.
All files are written atomically (temp file + rename) and numbers are
printed with 17 significant digits so re-reading reproduces them exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tlsph import cases as cases_mod
from tlsph.cases import CASE_REGISTRY, CaseDefinition, ProbeSeries, make_case, run_case
from tlsph.errors import ConfigError, NumericalFailure
from tlsph.materials import von_mises_strain, von_mises_stress
from tlsph.solver import HourglassParams, Simulation, StepControls

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TOLERANCE = 4

_RUN_KEYS = {
    "hourglass": bool,
    "alpha": float,
    "cfl": float,
    "damping_scale": float,
    "end_time": float,
    "output_dir": str,
    "snapshot_interval": float,
    "probe_interval": float,
    "threads": int,
}


@dataclass
class RunConfig:
    case_name: str
    case_params: dict = field(default_factory=dict)
    hourglass_enabled: bool = True
    alpha: float = 8.0
    cfl: float | None = None
    damping_scale: float | None = None
    end_time: float | None = None
    output_dir: str = "out"
    snapshot_interval: float | None = None
    probe_interval: float | None = None
    threads: int = 1


def _coerce(raw: str, kind: type, line_no: int, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "on", "yes", "1"):
                return True
            if low in ("false", "off", "no", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"line {line_no}: cannot parse {key} = {raw!r} as {kind.__name__}"
        ) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration document."""
    section = None
    case_name = None
    case_raw: dict[str, tuple[str, int]] = {}
    run_raw: dict[str, tuple[str, int]] = {}

    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            section = body[1:-1].strip()
            if section not in ("case", "run"):
                raise ConfigError(f"line {line_no}: unknown section [{section}]")
            continue
        if "=" not in body:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {body!r}")
        if section is None:
            raise ConfigError(f"line {line_no}: key outside of a [case]/[run] section")
        key, raw = (part.strip() for part in body.split("=", 1))
        if section == "case":
            if key == "name":
                case_name = raw
            else:
                case_raw[key] = (raw, line_no)
        else:
            if key not in _RUN_KEYS:
                raise ConfigError(f"line {line_no}: unknown [run] key {key!r}")
            run_raw[key] = (raw, line_no)

    if case_name is None:
        raise ConfigError("missing required key 'name' in [case] section")
    if case_name not in CASE_REGISTRY:
        known = ", ".join(sorted(CASE_REGISTRY))
        raise ConfigError(f"unknown case {case_name!r}; known cases: {known}")

    entry = CASE_REGISTRY[case_name]
    params = {}
    for key, (raw, line_no) in case_raw.items():
        if key not in entry.params:
            raise ConfigError(
                f"line {line_no}: case {case_name!r} has no parameter {key!r}"
            )
        spec = entry.params[key]
        value = _coerce(raw, spec.kind, line_no, key)
        if spec.choices is not None and value not in spec.choices:
            raise ConfigError(
                f"line {line_no}: {key} must be one of {spec.choices}, got {value!r}"
            )
        params[key] = value

    cfg = RunConfig(case_name=case_name, case_params=params)
    for key, (raw, line_no) in run_raw.items():
        value = _coerce(raw, _RUN_KEYS[key], line_no, key)
        if key == "hourglass":
            cfg.hourglass_enabled = value
        else:
            setattr(cfg, key, value)
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if cfg.alpha < 0.0:
        raise ConfigError("alpha must be non-negative")
    return cfg


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------


def _atomic_write(path: Path, payload: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def snapshot_columns(dimension: int) -> list[str]:
    axes = ["x", "y", "z"][:dimension]
    cols = axes + [f"v{a}" for a in axes]
    cols += ["von_mises_stress", "von_mises_strain", "hardening_factor", "material_id"]
    return cols


def _snapshot_fields(sim: Simulation):
    pset = sim.pset
    tau = sim.physical_stress()
    J = np.linalg.det(pset.def_grad)
    vm_stress = np.array([von_mises_stress(tau[i], J[i]) for i in range(pset.n)])
    vm_strain = np.array([von_mises_strain(pset.def_grad[i]) for i in range(pset.n)])
    material_id = np.full(pset.n, sim.material.kind, dtype=int)
    return vm_stress, vm_strain, material_id


def write_snapshot(sim: Simulation, base_path: str | Path) -> tuple[Path, Path]:
    """Write one particle snapshot as legacy-VTK points plus a CSV mirror.

    Both files carry the same per-particle fields; the CSV column order is
    the header row and matches ``snapshot_columns``.
    """
    base = Path(base_path)
    pset = sim.pset
    d = pset.dimension
    vm_stress, vm_strain, material_id = _snapshot_fields(sim)
    cols = snapshot_columns(d)

    lines = [
        "# vtk DataFile Version 3.0",
        f"tlsph snapshot t={_fmt(sim.t)} columns={','.join(cols)}",
        "ASCII",
        "DATASET POLYDATA",
        f"POINTS {pset.n} double",
    ]
    for i in range(pset.n):
        xyz = [pset.pos[i, k] if k < d else 0.0 for k in range(3)]
        lines.append(" ".join(_fmt(v) for v in xyz))
    lines.append(f"POINT_DATA {pset.n}")
    lines.append("VECTORS velocity double")
    for i in range(pset.n):
        vxyz = [pset.vel[i, k] if k < d else 0.0 for k in range(3)]
        lines.append(" ".join(_fmt(v) for v in vxyz))
    for name, data in (
        ("von_mises_stress", vm_stress),
        ("von_mises_strain", vm_strain),
        ("hardening_factor", sim.xi),
    ):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in data)
    lines.append("SCALARS material_id int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(v)) for v in material_id)
    vtk_path = base.with_suffix(".vtk")
    _atomic_write(vtk_path, "\n".join(lines) + "\n")

    rows = [",".join(cols)]
    for i in range(pset.n):
        cells = [_fmt(pset.pos[i, k]) for k in range(d)]
        cells += [_fmt(pset.vel[i, k]) for k in range(d)]
        cells += [
            _fmt(vm_stress[i]),
            _fmt(vm_strain[i]),
            _fmt(sim.xi[i]),
            str(int(material_id[i])),
        ]
        rows.append(",".join(cells))
    csv_path = base.with_suffix(".csv")
    _atomic_write(csv_path, "\n".join(rows) + "\n")
    return vtk_path, csv_path


def write_probe(series: ProbeSeries, path: str | Path) -> Path:
    """Write one probe time series as CSV with a strictly increasing time column."""
    path = Path(path)
    if len(series.times) > 1 and not np.all(np.diff(series.times) > 0):
        raise ValueError("probe series times must be strictly increasing")
    header = ",".join(("time",) + series.columns)
    rows = [header]
    values = np.atleast_2d(series.values.T).T  # (k,) -> (k, 1)
    for k in range(len(series.times)):
        cells = [_fmt(series.times[k])]
        cells += [_fmt(v) for v in np.atleast_1d(values[k])]
        rows.append(",".join(cells))
    _atomic_write(path, "\n".join(rows) + "\n")
    return path


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tlsph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb")
    for verb, help_text in (
        ("run", "execute a case and write probe/snapshot files"),
        ("check", "run a case and compare probes against reference values"),
    ):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("config", help="path to a run configuration file")
        p.add_argument("--threads", type=int, default=None, help="worker thread count")
    p_list = sub.add_parser("list", help="enumerate cases and reference values")
    p_list.add_argument("--json", action="store_true", dest="as_json")
    return parser


def _set_threads(n: int) -> None:
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(n, limit)))


def _load(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def _assemble_run(cfg: RunConfig):
    case = make_case(cfg.case_name, **cfg.case_params)
    hourglass = HourglassParams(alpha=cfg.alpha, enabled=cfg.hourglass_enabled)
    overrides = {}
    for name in ("cfl", "damping_scale", "end_time"):
        value = getattr(cfg, name)
        if value is not None:
            overrides[name] = value
    controls = (
        dataclasses.replace(case.controls, **overrides) if overrides else case.controls
    )
    return case, hourglass, controls


def _execute(cfg: RunConfig, write_outputs: bool):
    case, hourglass, controls = _assemble_run(cfg)
    out_dir = Path(cfg.output_dir)
    snapshot_state = {"count": 0}

    def on_snapshot(sim: Simulation) -> None:
        idx = snapshot_state["count"]
        snapshot_state["count"] += 1
        write_snapshot(sim, out_dir / f"snapshot_{idx:05d}")

    result = run_case(
        case,
        hourglass=hourglass,
        controls=controls,
        sample_interval=cfg.probe_interval,
        snapshot_interval=cfg.snapshot_interval if write_outputs else None,
        on_snapshot=on_snapshot if write_outputs and cfg.snapshot_interval else None,
    )
    if write_outputs:
        for name, series in result.series.items():
            write_probe(series, out_dir / f"probe_{name}.csv")
        write_snapshot(result.sim, out_dir / "snapshot_final")
    return result


def _cmd_run(cfg: RunConfig) -> int:
    result = _execute(cfg, write_outputs=True)
    print(f"case {result.case.name}: finished at t = {result.sim.t:.6e} "
          f"after {result.sim.step_count} steps")
    for key, value in result.measurements.items():
        print(f"  {key} = {value:.6g}")
    return EXIT_OK

def _cmd_check(cfg: RunConfig) -> int:
    result = _execute(cfg, write_outputs=False)
    failures = 0
    checked = 0
    for ref in result.case.references:
        if ref.quantity not in result.measurements:
            continue
        checked += 1
        measured = result.measurements[ref.quantity]
        ok = ref.check(measured)
        failures += 0 if ok else 1
        if ref.value is not None:
            expect = f"{ref.value:.6g} ± {100 * ref.rel_tol:.1f}%"
        else:
            expect = f"[{ref.lo:.6g}, {ref.hi:.6g}]"
        status = "PASS" if ok else "FAIL"
        print(
            f"{status} {result.case.name}.{ref.quantity}: measured "
            f"{measured:.6g}, expected {expect} ({ref.provenance})"
        )
    if checked == 0:
        print(f"case {result.case.name}: no checkable references")
    return EXIT_TOLERANCE if failures else EXIT_OK


def _cmd_list(as_json: bool) -> int:
    if as_json:
        payload = {}
        for name, entry in CASE_REGISTRY.items():
            case = entry.factory()
            payload[name] = {
                "description": entry.description,
                "parameters": {
                    k: None if s.default is None else s.default
                    for k, s in entry.params.items()
                },
                "references": [
                    dataclasses.asdict(ref) for ref in case.references
                ],
            }
        print(json.dumps(payload, indent=2))
        return EXIT_OK
    for name, entry in CASE_REGISTRY.items():
        print(f"{name}: {entry.description}")
        for key, spec in entry.params.items():
            print(f"    {key} = {spec.default}")
        case = entry.factory()
        for ref in case.references:
            if ref.value is not None:
                print(
                    f"    reference {ref.quantity} = {ref.value:.6g} "
                    f"± {100 * ref.rel_tol:.1f}% [{ref.provenance}]"
                )
            else:
                print(
                    f"    reference {ref.quantity} in [{ref.lo:.6g}, {ref.hi:.6g}] "
                    f"[{ref.provenance}]"
                )
    return EXIT_OK


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.verb is None:
        parser.print_help()
        return EXIT_USAGE
    if args.verb == "list":
        return _cmd_list(args.as_json)
    try:
        cfg = _load(args.config)
        if args.threads is not None:
            cfg.threads = args.threads
        _set_threads(cfg.threads)
        if args.verb == "run":
            return _cmd_run(cfg)
        return _cmd_check(cfg)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
