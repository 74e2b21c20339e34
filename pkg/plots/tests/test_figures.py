import json
import os

import numpy as np
import pytest

from cableplots import FigureSpec, recompute_margins, render
from cableplots.cli import main
from cableplots.figures import obstacle_margin, read_csv


# -- synthetic artifacts ----------------------------------------------------


def write_track_csv(path, n_rows=20, m1=5, offset=(0.0, 0.0, 0.0)):
    cols = ["t", "mode"]
    for i in range(m1):
        cols += [f"node{i}_{ax}" for ax in "xyz"]
    rows = []
    for k in range(n_rows):
        t = 0.1 * k
        mode = 0 if k < n_rows // 2 else 1
        row = [t, mode]
        for i in range(m1):
            row += [offset[0], offset[1] + 0.05 * t, offset[2] + 1.0 - i * 0.25]
        rows.append(row)
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for row in rows:
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return path


def write_energy_csv(path):
    with open(path, "w") as f:
        f.write("mode,variant,m,sigma,energy,cum_energy\n")
        for q in (0, 1):
            for v in (0, 1):
                energies = np.array([0.9, 0.08, 0.015, 0.005])
                for m, e in enumerate(energies, start=1):
                    f.write(f"{q},{v},{m},{np.sqrt(e):.6g},{e:.6g},"
                            f"{energies[:m].sum():.6g}\n")
    return path


def write_accuracy_csv(path):
    with open(path, "w") as f:
        f.write("variant,mode,R,state_dim,eps_p_rms,eps_v_rms\n")
        for v in (0, 1):
            for q in (0, 1):
                for R in (1, 2, 3):
                    dim = 6 * (R + 2) if v == 0 else 6 * (R + 1)
                    eps = (0.3 if v == 0 else 0.6) / R
                    f.write(f"{v},{q},{R},{dim},{eps:.6g},{2 * eps:.6g}\n")
    return path


def write_basis_npz(path):
    rng = np.random.default_rng(0)
    modes, _ = np.linalg.qr(rng.normal(size=(11, 4)))
    np.savez(path, modes=modes, h_d=0.1, singular_values=np.array([3.0, 1.0, 0.5, 0.1]))
    return path


def write_summary_json(path, scenario="free", solver="hilqr", ms=12.5):
    with open(path, "w") as f:
        json.dump({"schema_version": 1, "scenario": scenario, "solver": solver,
                   "summary": {"solve_ms_mean": ms}}, f)
    return path


WINDOW = [
    {"center": [1.25, 5.0, 0.0], "semi_axes": [1.0, 0.15, 1.0], "infinite_axes": [2]},
    {"center": [-1.25, 5.0, 0.0], "semi_axes": [1.0, 0.15, 1.0], "infinite_axes": [2]},
]


# -- margins ----------------------------------------------------------------


def test_margin_center_and_surface():
    obs = {"center": [1.0, 2.0, 3.0], "semi_axes": [0.5, 0.5, 0.5]}
    assert obstacle_margin(np.array([1.0, 2.0, 3.0]), obs) == pytest.approx(-1.0)
    assert obstacle_margin(np.array([1.5, 2.0, 3.0]), obs) == pytest.approx(0.0)
    assert obstacle_margin(np.array([3.0, 2.0, 3.0]), obs) > 0


def test_margin_infinite_axis_ignored():
    obs = {"center": [0.0, 0.0, 0.0], "semi_axes": [1.0, 1.0, 1.0], "infinite_axes": [2]}
    far_in_z = obstacle_margin(np.array([2.0, 0.0, 100.0]), obs)
    assert far_in_z == pytest.approx(3.0)


def test_recompute_margins_positive_run(tmp_path):
    csv = write_track_csv(tmp_path / "track.csv")  # cable near origin, window at y=5
    assert recompute_margins(str(csv), WINDOW) > 0


def test_recompute_margins_penetrating_run(tmp_path):
    csv = write_track_csv(tmp_path / "track.csv", offset=(1.25, 5.0, 0.0))
    assert recompute_margins(str(csv), WINDOW) < 0


def test_recompute_margins_missing_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,foo\n0.0,1.0\n")
    with pytest.raises(ValueError, match="node0_x"):
        recompute_margins(str(p), WINDOW)


# -- renderers --------------------------------------------------------------


def test_render_all_kinds(tmp_path):
    track = write_track_csv(tmp_path / "track.csv")
    specs = [
        FigureSpec("timelapse", [str(track)], str(tmp_path / "a.png"), obstacles=WINDOW),
        FigureSpec("mode-shapes", [str(write_basis_npz(tmp_path / "b.npz"))],
                   str(tmp_path / "b.png")),
        FigureSpec("energy-spectrum", [str(write_energy_csv(tmp_path / "e.csv"))],
                   str(tmp_path / "c.png")),
        FigureSpec("rom-accuracy", [str(write_accuracy_csv(tmp_path / "r.csv"))],
                   str(tmp_path / "d.png")),
        FigureSpec("walltime",
                   [str(write_summary_json(tmp_path / "s1.json")),
                    str(write_summary_json(tmp_path / "s2.json", solver="rti", ms=4.0))],
                   str(tmp_path / "e.png")),
    ]
    for spec in specs:
        out = render(spec)
        assert os.path.getsize(out) > 1000


def test_spec_rejects_unknown_kind(tmp_path):
    with pytest.raises(ValueError, match="kind"):
        FigureSpec("volcano", ["x.csv"], str(tmp_path / "x.png"))


def test_spec_rejects_empty_inputs(tmp_path):
    with pytest.raises(ValueError, match="input"):
        FigureSpec("timelapse", [], str(tmp_path / "x.png"))


def test_walltime_rejects_unrelated_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"hello": 1}')
    with pytest.raises(ValueError, match="wall-time"):
        render(FigureSpec("walltime", [str(p)], str(tmp_path / "x.png")))


def test_csv_header_mismatch(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1.0,2.0\n")
    with pytest.raises(ValueError):
        read_csv(str(p))


# -- CLI --------------------------------------------------------------------


def test_cli_render_timelapse_with_margin_check(tmp_path, capsys):
    track = write_track_csv(tmp_path / "track.csv")
    obs = tmp_path / "obs.json"
    obs.write_text(json.dumps({"obstacles": WINDOW}))
    rc = main(["render", "--kind", "timelapse", "--output", str(tmp_path / "o.png"),
               "--obstacles", str(obs), "--check-margins", str(track)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "min obstacle margin" in out
    assert os.path.exists(tmp_path / "o.png")


def test_cli_margin_check_fails_on_penetration(tmp_path, capsys):
    track = write_track_csv(tmp_path / "track.csv", offset=(1.25, 5.0, 0.0))
    obs = tmp_path / "obs.json"
    obs.write_text(json.dumps({"obstacles": WINDOW}))
    rc = main(["render", "--kind", "timelapse", "--output", str(tmp_path / "o.png"),
               "--obstacles", str(obs), "--check-margins", str(track)])
    assert rc == 1
    assert "penetration" in capsys.readouterr().err


def test_cli_missing_input_exits_2(tmp_path, capsys):
    rc = main(["render", "--kind", "rom-accuracy",
               "--output", str(tmp_path / "o.png"), str(tmp_path / "nope.csv")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_cli_all_over_results_dir(tmp_path, capsys):
    d = tmp_path / "results"
    d.mkdir()
    write_energy_csv(d / "pod_energy.csv")
    write_accuracy_csv(d / "rom_accuracy.csv")
    write_basis_npz(d / "basis_mode0_proposed.npz")
    write_basis_npz(d / "basis_mode1_proposed.npz")
    write_track_csv(d / "track_free_hilqr.csv")
    write_track_csv(d / "track_plan_pick_and_place.csv")
    write_summary_json(d / "summary_free_hilqr.json")
    obs = tmp_path / "obs.json"
    obs.write_text(json.dumps({"obstacles": WINDOW}))
    rc = main(["all", str(d), "--obstacles", str(obs)])
    out = capsys.readouterr().out
    assert rc == 0
    for name in ("pod_energy.png", "rom_accuracy.png", "mode_shapes_mode0.png",
                 "timelapse_free_hilqr.png", "timelapse_plan_pick_and_place.png",
                 "walltime.png"):
        assert (d / name).exists(), name
    assert out.count("wrote") >= 6


def test_cli_all_empty_dir_fails(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    rc = main(["all", str(d)])
    assert rc == 1
