"""End-to-end checks of the qh command line.

Each test drives cli.main() in-process with a JSON config written to a
temp directory, then inspects the exit code, the files produced and the
stderr contract of the failure paths: exit 2 for config violations,
exit 3 for runtime failures (which name the error class).
"""

import csv
import json

import numpy as np
import pytest

from qhnbody import cli
from qhnbody.central_config import equilateral_configuration, equilateral_side
from qhnbody.model import (
    Configuration,
    MassSystem,
    PhaseState,
    PotentialParams,
    hamiltonian,
    potential_V,
)


def write_config(tmp_path, data, name):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def run(tmp_path, command, data, subdir="out"):
    cfg = write_config(tmp_path, data, name=f"{subdir}.json")
    out = tmp_path / subdir
    code = cli.main([command, "--config", str(cfg), "--out", str(out)])
    return code, out


def base_config(masses=(1.0, 2.0, 3.0), a=1.0, b=3.0, alpha=1.0, beta=0.5, **extra):
    data = {
        "schema": 1,
        "masses": list(masses),
        "potential": {"a": a, "b": b, "alpha": alpha, "beta": beta},
    }
    data.update(extra)
    return data


def load_json(out_dir, name):
    return json.loads((out_dir / name).read_text())


def load_csv(out_dir, name):
    with open(out_dir / name, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


TWO_BODY = {
    "kind": "cartesian",
    "positions": [[0.5, 0.0], [-0.5, 0.0]],
    "momenta": [[0.0, 1.2], [0.0, -1.2]],
}


# ---------------------------------------------------------------------------
# cc-collinear


def test_cc_collinear_reports_every_ordering_class(tmp_path, capsys):
    code, out = run(tmp_path, "cc-collinear", base_config())
    assert code == 0
    doc = load_json(out, "cc_collinear.json")
    assert doc["command"] == "cc-collinear"
    assert doc["schema"] == 1
    assert doc["count"] == 3
    assert doc["max_residual"] < 1e-10
    orderings = {tuple(r["ordering"]) for r in doc["results"]}
    assert len(orderings) == 3
    for rec in doc["results"]:
        assert rec["kind"] == "collinear"
        assert rec["residual"] < 1e-10
        assert min(rec["hessian_eigenvalues"]) > 0.0
    assert "wrote" in capsys.readouterr().out


def test_cc_collinear_rejects_more_than_six_bodies(tmp_path, capsys):
    code, _ = run(tmp_path, "cc-collinear", base_config(masses=[1.0] * 7))
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# cc-planar3


def test_cc_planar3_certifies_the_equilateral_side(tmp_path):
    data = base_config(alpha=2.0, beta=0.7)
    code, out = run(tmp_path, "cc-planar3", data)
    assert code == 0
    doc = load_json(out, "cc_planar3.json")
    ms = MassSystem(np.array([1.0, 2.0, 3.0]))
    assert doc["side"] == pytest.approx(equilateral_side(ms), rel=1e-12)
    cert = doc["side_certificate"]
    # with unit coefficients the side itself solves the scalar equation
    assert cert["root"] == pytest.approx(doc["side"], rel=1e-10)
    assert cert["sign_changes"] == 1
    assert cert["unit_sigma"] < 0.0
    assert len(doc["results"]) == 2
    for rec in doc["results"]:
        assert rec["kind"] == "equilateral"
        assert rec["residual"] < 1e-10


def test_cc_planar3_guards_its_preconditions(tmp_path, capsys):
    for bad in (
        base_config(a=0.5, b=2.5),  # needs a = 1
        base_config(beta=0.0),  # needs beta > 0
        base_config(masses=[1.0, 2.0]),  # needs three bodies
    ):
        code, _ = run(tmp_path, "cc-planar3", bad, subdir=f"g{id(bad) % 97}")
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# simultaneous


def test_simultaneous_detects_the_symmetric_arrangement(tmp_path):
    code, out = run(tmp_path, "simultaneous", base_config(masses=[1.0, 2.0, 1.0]))
    assert code == 0
    doc = load_json(out, "simultaneous.json")
    by_ordering = {tuple(r["ordering"]): r for r in doc["results"]}
    assert len(by_ordering) == 3
    # equal end masses: the collinear CCs of both terms coincide
    sym = by_ordering[(1, 2, 3)]
    assert sym["gap"] < 1e-10
    assert sym["simultaneous"] is True


def test_simultaneous_is_negative_for_generic_masses(tmp_path):
    code, out = run(tmp_path, "simultaneous", base_config())
    assert code == 0
    doc = load_json(out, "simultaneous.json")
    for rec in doc["results"]:
        assert rec["simultaneous"] is False
        assert rec["gap"] > 1e-6


def test_simultaneous_mass_grid_sweep(tmp_path):
    data = base_config(
        masses=[1.0, 1.0, 1.0],
        options={
            "mass_grid": {
                "m1": [0.5, 1.5],
                "m2": [0.5, 1.5],
                "m3": 1.0,
                "points": 5,
            }
        },
    )
    code, out = run(tmp_path, "simultaneous", data)
    assert code == 0
    doc = load_json(out, "simultaneous.json")
    assert doc["mass_grid"]["rows"] == 25
    assert doc["mass_grid"]["csv"] == "simultaneous_grid.csv"
    header, rows = load_csv(out, "simultaneous_grid.csv")
    assert header == ["m1", "m2", "m3", "gap"]
    assert len(rows) == 25
    for m1, m2, m3, gap in ((float(c) for c in row) for row in rows):
        assert m3 == 1.0
        if m1 == m3:  # symmetric arrangement for every middle mass
            assert gap < 1e-8
        if abs(m1 - m3) >= 0.25:
            assert gap > 1e-8


def test_simultaneous_mass_grid_rejects_bad_requests(tmp_path, capsys):
    bad_grid = base_config(
        masses=[1.0, 1.0, 1.0],
        options={"mass_grid": {"m1": [0.5, 1.5], "m2": [0.5, 1.5], "points": 1}},
    )
    code, _ = run(tmp_path, "simultaneous", bad_grid)
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# simulate


def test_simulate_writes_series_and_conserves_energy(tmp_path):
    data = base_config(
        masses=[1.0, 1.0], initial_state=TWO_BODY, options={"t_span": [0.0, 5.0]}
    )
    code, out = run(tmp_path, "simulate", data)
    assert code == 0
    doc = load_json(out, "simulate.json")
    assert doc["termination"] == "time-budget"
    assert doc["t_final"] == 5.0
    assert doc["energy_residual_max"] < 1e-8
    assert doc["angmom_residual_max"] < 1e-8
    header, rows = load_csv(out, "simulate.csv")
    assert header[0] == "t"
    assert header[-2:] == ["energy_residual", "angmom_residual"]
    assert len(rows) == doc["steps"] + 1
    assert np.asarray(doc["final_positions"]).shape == (2, 2)


def test_simulate_continues_from_its_own_csv(tmp_path):
    base = dict(masses=[1.0, 1.0], initial_state=TWO_BODY)
    code, full = run(
        tmp_path, "simulate", base_config(**base, options={"t_span": [0.0, 6.0]}),
        subdir="full",
    )
    assert code == 0
    code, _ = run(
        tmp_path, "simulate", base_config(**base, options={"t_span": [0.0, 5.0]}),
        subdir="leg1",
    )
    assert code == 0
    resumed = base_config(
        masses=[1.0, 1.0],
        initial_state={"kind": "csv", "path": "leg1/simulate.csv", "row": -1},
        options={"t_span": [5.0, 6.0]},
    )
    code, leg2 = run(tmp_path, "simulate", resumed, subdir="leg2")
    assert code == 0
    direct = load_json(full, "simulate.json")
    pieced = load_json(leg2, "simulate.json")
    gap = np.abs(
        np.asarray(direct["final_positions"]) - np.asarray(pieced["final_positions"])
    ).max()
    assert gap < 1e-9


def test_simulate_checks_a_declared_energy_level(tmp_path, capsys):
    state = PhaseState(
        Configuration(np.asarray(TWO_BODY["positions"])),
        np.asarray(TWO_BODY["momenta"]),
    )
    ms = MassSystem(np.array([1.0, 1.0]))
    pp = PotentialParams(a=1.0, b=3.0, alpha=1.0, beta=0.5)
    h0 = hamiltonian(state, ms, pp)

    good = base_config(
        masses=[1.0, 1.0], initial_state=TWO_BODY, energy_h=h0,
        options={"t_span": [0.0, 0.5]},
    )
    code, _ = run(tmp_path, "simulate", good, subdir="match")
    assert code == 0

    bad = base_config(masses=[1.0, 1.0], initial_state=TWO_BODY, energy_h=h0 + 0.1)
    code, _ = run(tmp_path, "simulate", bad, subdir="mismatch")
    assert code == 2
    assert "energy_h" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# collision-flow


CF_START = {
    "start": {
        "shape": "equilateral",
        "v_sign": -1,
        "perturbation_scale": 0.05,
        "seed": 11,
    },
    "tau_max": 5.0,
}


def test_collision_flow_runs_down_the_gradient(tmp_path):
    data = base_config(
        options=CF_START, tolerances={"rel_tol": 1e-12, "abs_tol": 1e-14}
    )
    code, out = run(tmp_path, "collision-flow", data)
    assert code == 0
    doc = load_json(out, "collision_flow.json")
    assert doc["v_start"] < 0.0
    assert doc["v_monotone_nonincreasing"] is True
    assert doc["v_decrease_total"] > 0.0
    assert doc["manifold_residual_max"] < 1e-6
    near = doc["nearest_equilibrium"]
    assert near["v_sign"] in (-1, 1)
    assert near["kind"] in ("equilateral", "collinear")
    header, rows = load_csv(out, "collision_flow.csv")
    assert header[:4] == ["tau", "v", "manifold_residual", "min_separation"]
    assert len(rows) >= 2
    assert all(float(row[3]) > 0.0 for row in rows)


def test_collision_flow_output_is_deterministic(tmp_path, monkeypatch):
    data = base_config(options=CF_START)
    _, first = run(tmp_path, "collision-flow", data, subdir="one")
    _, second = run(tmp_path, "collision-flow", data, subdir="two")
    monkeypatch.setenv("QH_THREADS", "3")
    _, third = run(tmp_path, "collision-flow", data, subdir="three")
    for name in ("collision_flow.json", "collision_flow.csv"):
        ref = (first / name).read_bytes()
        assert (second / name).read_bytes() == ref
        assert (third / name).read_bytes() == ref


def test_collision_flow_rejects_states_off_the_manifold(tmp_path, capsys):
    ms = MassSystem(np.array([1.0, 2.0, 3.0]))
    s = equilateral_configuration(ms)[0].positions  # inertia 1: already unit
    off = base_config(
        initial_state={
            "kind": "mcgehee",
            "rho": 0.0,
            "v": 0.0,  # wrong: the manifold relation forces v^2 = 2 V(s)
            "s": s.tolist(),
            "u": np.zeros_like(s).tolist(),
        }
    )
    code, _ = run(tmp_path, "collision-flow", off, subdir="offc")
    assert code == 3
    assert "error: OffManifoldError" in capsys.readouterr().err

    inflated = base_config(
        initial_state={
            "kind": "mcgehee",
            "rho": 0.1,
            "v": 0.0,
            "s": s.tolist(),
            "u": np.zeros_like(s).tolist(),
        }
    )
    code, _ = run(tmp_path, "collision-flow", inflated, subdir="rho")
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_collision_flow_needs_manev_attraction(tmp_path, capsys):
    code, _ = run(
        tmp_path, "collision-flow", base_config(a=0.5, b=2.5, options=CF_START)
    )
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# eigen


def test_eigen_reports_the_default_equilibrium_catalog(tmp_path):
    code, out = run(tmp_path, "eigen", base_config(beta=1.0))
    assert code == 0
    doc = load_json(out, "eigen.json")
    recs = doc["equilibria"]
    # equilateral and three collinear shapes, each at v = +/- sqrt(2 V)
    assert len(recs) == 8
    kinds = sorted(r["kind"] for r in recs)
    assert kinds.count("equilateral") == 2
    assert kinds.count("collinear") == 6
    for rec in recs:
        assert rec["cc_defect"] < 1e-9
        assert rec["v_value"] * rec["v_sign"] > 0.0
        ambient_dim = {"planar": 7, "collinear": 3}[rec["ambient"]]
        assert len(rec["spectrum"]) == ambient_dim + 1
        assert rec["dim_unstable"] + rec["dim_stable"] + rec["zero_modes"] \
            == ambient_dim
        assert rec["dim_energy_surface"] == {"planar": 7, "collinear": 3}[
            rec["ambient"]
        ]
        assert rec["zero_modes"] == (1 if rec["ambient"] == "planar" else 0)
        if rec["ambient"] == "planar":
            assert rec["transversality_necessary"] is True
        else:
            assert "transversality_necessary" not in rec

    def dims(kind, sign):
        match = [
            r for r in recs
            if r["kind"] == kind and r["v_sign"] == sign
            and r["ordering"] in (None, [1, 2, 3])
        ]
        assert len(match) == 1
        return match[0]["dim_unstable"], match[0]["dim_stable"]

    # reversing the flow direction swaps the stable/unstable splitting
    assert dims("equilateral", 1) == dims("equilateral", -1)[::-1]
    assert dims("collinear", 1) == dims("collinear", -1)[::-1]


def test_eigen_guards_its_preconditions(tmp_path, capsys):
    for sub, bad in (
        ("b2", base_config(b=2.0)),  # spectra need b > 2
        ("nob", base_config(beta=0.0)),
        ("nom", base_config(a=0.5, b=2.5)),
        ("empty", base_config(options={"cases": []})),
    ):
        code, _ = run(tmp_path, "eigen", bad, subdir=sub)
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# homothetic


def test_homothetic_builds_the_ejection_collision_orbit(tmp_path):
    data = base_config(
        masses=[1.0, 1.0, 1.0],
        beta=1.0,
        energy_h=-1.0,
        options={"shape": "equilateral"},
    )
    code, out = run(tmp_path, "homothetic", data)
    assert code == 0
    doc = load_json(out, "homothetic.json")
    assert doc["termination"] == "event:floor"
    assert doc["k_drift"] < 1e-9
    assert doc["rho_max_gap"] < 1e-6
    ms = MassSystem(np.array([1.0, 1.0, 1.0]))
    pp = PotentialParams(a=1.0, b=3.0, alpha=1.0, beta=1.0)
    shape, _ = equilateral_configuration(ms)
    v_star = np.sqrt(2.0 * potential_V(shape, ms, pp))
    assert doc["v_start"] == pytest.approx(v_star, abs=1e-6)
    assert doc["v_end"] == pytest.approx(-v_star, abs=1e-6)
    header, rows = load_csv(out, "homothetic.csv")
    assert header == ["tau", "rho", "v", "k_defect"]
    rhos = [float(r[1]) for r in rows]
    assert max(rhos) == pytest.approx(doc["rho_max_orbit"], rel=1e-3)


def test_homothetic_requires_a_negative_energy_level(tmp_path, capsys):
    data = base_config(
        masses=[1.0, 1.0, 1.0], beta=1.0, energy_h=1.0,
        options={"shape": "equilateral"},
    )
    code, _ = run(tmp_path, "homothetic", data)
    assert code == 3
    assert "error: EnergySignError" in capsys.readouterr().err


def test_homothetic_requires_an_energy_level_at_all(tmp_path, capsys):
    data = base_config(masses=[1.0, 1.0, 1.0], options={"shape": "equilateral"})
    code, _ = run(tmp_path, "homothetic", data)
    assert code == 2
    assert "energy_h" in capsys.readouterr().err


def test_homothetic_rejects_a_non_simultaneous_shape(tmp_path, capsys):
    # the generic collinear CC is not a CC of both terms, so the
    # invariant-plane construction does not apply to it
    data = base_config(
        energy_h=-1.0, options={"shape": {"ordering": [1, 2, 3]}}
    )
    code, _ = run(tmp_path, "homothetic", data)
    assert code == 3
    assert "error: AdmissibilityError" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# config plumbing shared by every command


def test_config_schema_and_key_validation(tmp_path, capsys):
    cases = (
        ("schema", {**base_config(), "schema": 2}),
        ("unknown", {**base_config(), "surprise": 1}),
        ("negmass", base_config(masses=[1.0, -2.0, 3.0])),
        ("order", base_config(a=2.0, b=1.0)),  # exponents must satisfy a < b
    )
    for sub, data in cases:
        code, _ = run(tmp_path, "cc-collinear", data, subdir=sub)
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")


def test_missing_and_malformed_config_files(tmp_path, capsys):
    code = cli.main(
        ["cc-collinear", "--config", str(tmp_path / "nope.json")]
    )
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")

    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    code = cli.main(["cc-collinear", "--config", str(garbled)])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_thread_cap_is_validated_and_result_invariant(tmp_path, monkeypatch):
    data = base_config()
    _, serial = run(tmp_path, "cc-collinear", data, subdir="serial")
    monkeypatch.setenv("QH_THREADS", "4")
    _, pooled = run(tmp_path, "cc-collinear", data, subdir="pooled")
    ref = (serial / "cc_collinear.json").read_bytes()
    assert (pooled / "cc_collinear.json").read_bytes() == ref

    for bad in ("zero", "0", "-3", "2.5"):
        monkeypatch.setenv("QH_THREADS", bad)
        code, _ = run(tmp_path, "cc-collinear", data, subdir=f"t{bad}")
        assert code == 2
