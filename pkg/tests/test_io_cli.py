"""Config parsing, snapshot/probe writers, and CLI exit codes."""

import dataclasses
import math
import subprocess
import sys

import numpy as np
import pytest

from tlsph.cases import ProbeSeries, muscle_contraction_case, build_simulation
from tlsph.errors import ConfigError
from tlsph.io_cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_TOLERANCE,
    EXIT_USAGE,
    cli_main,
    parse_config,
    snapshot_columns,
    write_probe,
    write_snapshot,
)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config("[case]\nname = oscillating_plate\n")
    assert cfg.case_name == "oscillating_plate"
    assert cfg.case_params == {}
    assert cfg.hourglass_enabled is True
    assert cfg.alpha == 8.0
    assert cfg.threads == 1


def test_config_case_parameters_and_run_keys():
    text = """
    [case]
    name = oscillating_plate
    nu = 0.3          # Poisson ratio
    dp_ratio = 10

    [run]
    hourglass = false
    alpha = 4.0
    cfl = 0.5
    output_dir = /tmp/xyz
    """
    cfg = parse_config(text)
    assert cfg.case_params == {"nu": 0.3, "dp_ratio": 10.0}
    assert cfg.hourglass_enabled is False
    assert cfg.alpha == 4.0
    assert cfg.cfl == 0.5
    assert cfg.output_dir == "/tmp/xyz"


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("[case]\nname = oscillating_plate\nbogus = 1\n", "no parameter 'bogus'"),
        ("[case]\nname = no_such\n", "unknown case"),
        ("[case]\nname = oscillating_plate\n[run]\nwidgets = 2\n", "unknown [run] key"),
        ("[case]\nname = oscillating_plate\nnu = fast\n", "cannot parse"),
        ("nu = 0.3\n", "outside of a"),
        ("[weird]\n", "unknown section"),
        ("[case]\nname = oscillating_plate\n[run]\nthreads = 0\n", "threads"),
        ("[case]\nnu = 0.3\n", "missing required key"),
    ],
)
def test_config_rejections_carry_context(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert fragment in str(err.value)


def test_config_reports_line_numbers():
    text = "[case]\nname = oscillating_plate\nbogus = 1\n"
    with pytest.raises(ConfigError, match="line 3"):
        parse_config(text)


# ---------------------------------------------------------------------------
# Probe writer
# ---------------------------------------------------------------------------


def test_probe_empty_series_header_only(tmp_path):
    series = ProbeSeries(times=np.array([]), values=np.array([]), columns=("y",))
    path = write_probe(series, tmp_path / "probe.csv")
    assert path.read_text() == "time,y\n"


def test_probe_round_trip(tmp_path):
    times = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0])
    values = np.array([0.1, -1.234567890123456789, 3e-17])
    series = ProbeSeries(times=times, values=values, columns=("y",))
    path = write_probe(series, tmp_path / "probe.csv")
    loaded = np.genfromtxt(path, delimiter=",", skip_header=1)
    assert np.array_equal(loaded[:, 0], times)
    assert np.array_equal(loaded[:, 1], values)


def test_probe_rejects_non_monotone_times(tmp_path):
    series = ProbeSeries(
        times=np.array([0.0, 0.2, 0.2]), values=np.zeros(3), columns=("y",)
    )
    with pytest.raises(ValueError, match="increasing"):
        write_probe(series, tmp_path / "probe.csv")


# ---------------------------------------------------------------------------
# Snapshot writer
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_sim():
    case = muscle_contraction_case(Vm_top=0.0, dp=0.25)
    sim = build_simulation(case)
    sim.prime()
    sim.evaluate_forces(1e-6)
    return sim


def test_snapshot_undeformed_zero_stress(tmp_path, small_sim):
    vtk_path, csv_path = write_snapshot(small_sim, tmp_path / "snap")
    rows = csv_path.read_text().splitlines()
    header = rows[0].split(",")
    assert header == snapshot_columns(3)
    data = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
    assert data.shape == (small_sim.n, len(header))
    vm = data[:, header.index("von_mises_stress")]
    assert np.max(np.abs(vm)) < 1e-9 * small_sim.material.params.a


def test_snapshot_csv_positions_round_trip(tmp_path, small_sim):
    rng = np.random.default_rng(3)
    small_sim.pset.pos[:] += 1e-3 * rng.normal(size=small_sim.pset.pos.shape)
    _, csv_path = write_snapshot(small_sim, tmp_path / "snap2")
    header = csv_path.read_text().splitlines()[0].split(",")
    data = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
    for k, axis in enumerate(("x", "y", "z")):
        col = header.index(axis)
        assert np.array_equal(data[:, col], small_sim.pset.pos[:, k])


def test_snapshot_vtk_structure(tmp_path, small_sim):
    vtk_path, _ = write_snapshot(small_sim, tmp_path / "snap3")
    lines = vtk_path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET POLYDATA"
    assert lines[4] == f"POINTS {small_sim.n} double"
    assert f"POINT_DATA {small_sim.n}" in lines
    assert "VECTORS velocity double" in lines
    assert "SCALARS von_mises_stress double 1" in lines
    assert "SCALARS hardening_factor double 1" in lines
    assert "SCALARS material_id int 1" in lines


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def write_cfg(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_cli_usage_errors():
    assert cli_main([]) == EXIT_USAGE
    assert cli_main(["frobnicate"]) == EXIT_USAGE


def test_cli_list_mentions_cases(capsys):
    assert cli_main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "oscillating_plate" in out
    assert "taylor_bar" in out
    assert "reference" in out


def test_cli_list_json(capsys):
    import json

    assert cli_main(["list", "--json"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert "muscle_contraction" in payload
    refs = payload["muscle_contraction"]["references"]
    assert refs and refs[0]["quantity"] == "top_face_displacement"


def test_cli_run_bad_config(tmp_path):
    cfg = write_cfg(tmp_path, "[case]\nname = oscillating_plate\nbogus = 1\n")
    assert cli_main(["run", cfg]) == EXIT_CONFIG


def test_cli_run_missing_file():
    assert cli_main(["run", "/nonexistent/run.cfg"]) == EXIT_CONFIG


def test_cli_run_writes_outputs(tmp_path, capsys):
    out_dir = tmp_path / "out"
    cfg = write_cfg(
        tmp_path,
        f"""
        [case]
        name = muscle_contraction
        Vm_top = 0.0
        dp = 0.25
        end_time = 0.3

        [run]
        output_dir = {out_dir}
        probe_interval = 0.1
        snapshot_interval = 0.2
        """,
    )
    assert cli_main(["run", cfg]) == EXIT_OK
    assert (out_dir / "probe_top_center.csv").exists()
    assert (out_dir / "probe_kinetic_energy.csv").exists()
    assert (out_dir / "snapshot_final.vtk").exists()
    assert (out_dir / "snapshot_final.csv").exists()
    assert (out_dir / "snapshot_00000.vtk").exists()
    out = capsys.readouterr().out
    assert "top_face_displacement" in out


def test_cli_check_tolerance_failure(tmp_path, capsys):
    # A deliberately truncated muscle run cannot reach the published
    # displacement, so check must exit with the tolerance-failure code.
    cfg = write_cfg(
        tmp_path,
        """
        [case]
        name = muscle_contraction
        dp = 0.1
        end_time = 0.3
        """,
    )
    assert cli_main(["check", cfg]) == EXIT_TOLERANCE
    assert "FAIL" in capsys.readouterr().out


def test_cli_check_without_references(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        """
        [case]
        name = muscle_contraction
        Vm_top = 0.0
        dp = 0.25
        end_time = 0.2
        """,
    )
    assert cli_main(["check", cfg]) == EXIT_OK
    assert "no checkable references" in capsys.readouterr().out


def test_cli_thread_count_determinism(tmp_path):
    base = """
    [case]
    name = muscle_contraction
    Vm_top = 6.0
    dp = 0.2
    end_time = 1.0

    [run]
    probe_interval = 0.2
    output_dir = {out}
    threads = {threads}
    """
    outputs = []
    for threads in (1, 2):
        out_dir = tmp_path / f"out{threads}"
        cfg = write_cfg(tmp_path, base.format(out=out_dir, threads=threads))
        assert cli_main(["run", cfg]) == EXIT_OK
        outputs.append((out_dir / "probe_top_center.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_console_entry_point_help():
    proc = subprocess.run(
        [sys.executable, "-m", "tlsph.io_cli"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == EXIT_USAGE
