import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cablempc import io
from cablempc.errors import ConfigurationError
from cablempc.mpc import InternalModel
from cablempc.params import Mode
from cablempc.planner import PlannedReference


finite_floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(
    rows=st.lists(
        st.lists(finite_floats, min_size=3, max_size=3), min_size=1, max_size=20
    )
)
@settings(max_examples=40, deadline=None)
def test_csv_roundtrip_is_lossless(tmp_path_factory, rows):
    """%.17g serialization reproduces every float64 bit-exactly."""
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    data = np.array(rows, dtype=float)
    io.write_csv(path, ["a", "b", "c"], data)
    header, back = io.read_csv(path)
    assert header == ["a", "b", "c"]
    assert np.array_equal(back, data)


def test_csv_header_mismatch(tmp_path):
    with pytest.raises(ConfigurationError):
        io.write_csv(tmp_path / "x.csv", ["a", "b"], np.zeros((2, 3)))


def test_csv_deterministic_bytes(tmp_path):
    data = np.random.default_rng(5).normal(size=(6, 4))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_csv(p1, list("wxyz"), data)
    io.write_csv(p2, list("wxyz"), data)
    assert p1.read_bytes() == p2.read_bytes()


def test_json_roundtrip(tmp_path):
    doc = {"b": [1, 2.5], "a": {"nested": True}}
    p = tmp_path / "d.json"
    io.write_json(p, doc)
    assert io.read_json(p) == doc
    # sorted keys make the byte stream deterministic
    assert p.read_text().index('"a"') < p.read_text().index('"b"')


# -- scenarios --------------------------------------------------------------


def _minimal_doc():
    return {
        "schema_version": 1,
        "name": "t",
        "initial": {"mode": 0, "top": [0, 0, 1]},
        "waypoints": [
            {"time": 0.0, "point": [0, 0, 1]},
            {"time": 1.0, "point": [1, 0, 1]},
        ],
        "mode_schedule": [[0.0, 0]],
    }


def test_load_minimal_scenario(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(_minimal_doc()))
    sc = io.load_scenario(p)
    assert sc.name == "t"
    assert sc.initial_mode == Mode.FREE
    assert len(sc.waypoints) == 2
    ref = sc.reference()
    pos, vel, acc = ref.eval(0.0)
    assert np.allclose(pos, [0, 0, 1])


def test_scenario_schema_version_checked(tmp_path):
    doc = _minimal_doc()
    doc["schema_version"] = 99
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ConfigurationError, match="schema_version"):
        io.load_scenario(p)


def test_scenario_empty_waypoints_rejected(tmp_path):
    doc = _minimal_doc()
    doc["waypoints"] = []
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ConfigurationError, match="waypoint"):
        io.load_scenario(p)


def test_scenario_attach_guard_needs_payload(tmp_path):
    doc = _minimal_doc()
    doc["guards"] = [{"kind": "attach"}]
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ConfigurationError, match="payload"):
        io.load_scenario(p)


def test_scenario_guards_and_obstacles(tmp_path):
    doc = _minimal_doc()
    doc["initial"]["payload"] = [1.0, 0.0, -0.1]
    doc["guards"] = [
        {"kind": "attach", "armed_after": 2.0},
        {"kind": "detach", "center": [0, 0, -0.2]},
    ]
    doc["obstacles"] = [
        {"center": [1, 1, 0], "semi_axes": [1, 1, 1], "infinite_axes": [2]}
    ]
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    sc = io.load_scenario(p)
    assert len(sc.guards) == 2 and len(sc.internal_guards) == 2
    # internal attach guard centers on the initial payload position
    assert np.allclose(sc.internal_guards[0].center, [1.0, 0.0, -0.1])
    assert sc.obstacles[0].infinite_axes == (2,)


def test_shipped_scenarios_load():
    for name in ("free_start", "slung_start", "pick_and_place"):
        sc = io.load_scenario(f"scenarios/{name}.json")
        sc.reference()
    spec = io.load_scenario("scenarios/pick_and_place.json").plan_spec()
    assert spec.mu_schedule[0] > spec.mu_schedule[-1]


# -- basis artifacts --------------------------------------------------------


def test_bases_save_load_roundtrip(bases, tmp_path):
    io.save_bases(tmp_path, bases)
    loaded = io.load_bases(tmp_path, "proposed")
    for q in (0, 1):
        assert np.array_equal(loaded[q].modes, bases[(q, "proposed")].modes)


def test_load_bases_missing(tmp_path):
    with pytest.raises(ConfigurationError, match="train-basis"):
        io.load_bases(tmp_path)


# -- plan persistence -------------------------------------------------------


def test_plan_save_load_roundtrip(proposed, params, tmp_path, rng):
    internal = InternalModel(proposed, params, R=2, dt=2.5e-2)
    n = 12
    zs = rng.normal(size=(n + 1, internal.nz)) * 0.1
    modes = np.array([0] * 7 + [1] * 6)
    node_ref = np.array(
        [internal.node_projection(int(q)) @ z for q, z in zip(modes, zs)]
    )
    planned = PlannedReference(
        np.arange(n + 1) * 2.5e-2, node_ref, rng.normal(size=(n, 3)),
        modes, zs, 2.5e-2,
    )
    io.save_plan(tmp_path, planned, {"scenario": "t"})
    back = io.load_plan(tmp_path, internal)
    assert np.array_equal(back.modes, planned.modes)
    assert np.array_equal(back.zs, planned.zs)
    assert np.array_equal(back.input_ref, planned.input_ref)
    assert np.max(np.abs(back.node_ref - planned.node_ref)) < 1e-12
