import numpy as np
import pytest

from mtdlms.curves import LearningCurve, max_gap_db
from mtdlms.errors import ScenarioError
from mtdlms.experiments import build_poisson_scenario, flow
from mtdlms.outputs import CURVE_HEADER, emit_outputs, read_curves, write_curves
from mtdlms.scenario_io import load_scenario, save_scenario, scenario_from_dict, scenario_to_dict


def same_scenario(a, b):
    ea, eb = a.expanded, b.expanded
    assert ea.dims == eb.dims
    assert np.array_equal(ea.D_e, eb.D_e) and np.array_equal(ea.b, eb.b)
    assert all(np.array_equal(x, y) for x, y in zip(ea.combiners, eb.combiners))
    assert all(np.array_equal(x, y) for x, y in zip(a.truth.w_o, b.truth.w_o))
    assert np.array_equal(a.truth.sigma_z2, b.truth.sigma_z2)
    assert a.truth.leak == b.truth.leak


@pytest.mark.parametrize("which", ["validation", "flow", "poisson"])
def test_scenario_file_round_trip(tmp_path, validation_imperfect, which):
    sc = {"validation": validation_imperfect,
          "flow": flow.build_flow_scenario(seed=1).scenario,
          "poisson": build_poisson_scenario(n=5).scenario}[which]
    p = tmp_path / "sc.json"
    save_scenario(sc, p)
    back = load_scenario(p)
    same_scenario(sc, back)
    # saving again gives the same bytes
    p2 = tmp_path / "sc2.json"
    save_scenario(back, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_scenario_errors_name_the_constraint(validation):
    d = scenario_to_dict(validation)
    d["constraints"][3]["blocks"][0] = [[1.0, 0.0, 0.0]]
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(d)
    assert exc.value.constraint == 3
    d = scenario_to_dict(validation)
    d["constraints"][1]["members"][0] = 99
    with pytest.raises(ScenarioError, match="not an agent") as exc:
        scenario_from_dict(d)
    assert exc.value.constraint == 1
    d = scenario_to_dict(validation)
    del d["truth"]["R_x"]
    with pytest.raises(ScenarioError, match="R_x"):
        scenario_from_dict(d)
    d = scenario_to_dict(validation)
    del d["dims"]
    with pytest.raises(ScenarioError):
        scenario_from_dict(d)


def test_scalar_variances_in_files():
    d = {"dims": [1, 1],
         "constraints": [{"members": [0, 1], "blocks": [[[1]], [[-1]]], "offset": [0]}],
         "truth": {"w_o": [[0.5], [0.5]], "sigma_x2": [1.0, 2.0], "sigma_z2": [0.1, 0.1]}}
    sc = scenario_from_dict(d)
    assert sc.truth.R_x[1][0, 0] == 2.0


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError, match="JSON"):
        load_scenario(p)


def test_curve_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    curves = [LearningCurve("diffusion-apc", "w_o", np.arange(50), rng.lognormal(size=50),
                            "simulation:200"),
              LearningCurve("diffusion-apc", "w_star", np.arange(50), rng.lognormal(size=50)),
              LearningCurve("clms", "w_o", np.arange(3), [0.0, 1e-300, 3.5])]
    p = tmp_path / "curves.csv"
    write_curves(curves, p)
    back = {c.series_label: c for c in read_curves(p)}
    for c in curves:
        # values are written with 11 significant digits; reading reproduces the written digits
        got = back[c.series_label]
        assert np.array_equal(got.iterations, c.iterations)
        assert np.array_equal(got.values, np.array(["%.10e" % v for v in c.values], float))
        assert got.provenance == c.provenance


def test_empty_curve_set_writes_header_only(tmp_path):
    emit_outputs([], [], tmp_path, plots=True)
    assert (tmp_path / "curves.csv").read_text() == ",".join(CURVE_HEADER) + "\n"
    assert read_curves(tmp_path / "curves.csv") == []


def test_decimation():
    c = LearningCurve("x", "w_o", np.arange(3001), np.ones(3001))
    d = c.decimated()
    assert d.iterations.size == 1001 + 200
    assert np.array_equal(d.iterations[1000:1003], [1000, 1010, 1020])


def test_learning_curve_validation():
    with pytest.raises(ValueError):
        LearningCurve("x", "w_o", np.arange(3), np.ones(2))
    with pytest.raises(ValueError):
        LearningCurve("x", "elsewhere", np.arange(3), np.ones(3))
    a = LearningCurve("a", "w_o", np.arange(5), np.full(5, 1.0))
    b = LearningCurve("b", "w_o", np.arange(2, 8), np.full(6, 10.0))
    assert max_gap_db(a, b) == pytest.approx(10.0)
    with pytest.raises(KeyError):
        a.at([7])


def test_field_images_have_grid_size(tmp_path):
    import matplotlib.image as mpimg

    ps = build_poisson_scenario(n=9)
    F = ps.true_field()
    emit_outputs([], [], tmp_path, {"fields": (F, F + 0.01, ps.discrete_solution())})
    for name in ("field_true.png", "field_estimated.png"):
        img = mpimg.imread(tmp_path / name)
        assert img.shape[:2] == (9, 9)
    rows = (tmp_path / "fields.csv").read_text().splitlines()
    assert len(rows) == 1 + 81


def test_flow_table_output(tmp_path):
    fs = flow.build_flow_scenario(seed=0)
    o = flow.flow_oracle(fs)
    emit_outputs([], [], tmp_path, {"flows": (fs.arcs, o, o)}, plots=False)
    rows = (tmp_path / "flows.csv").read_text().splitlines()
    assert rows[0] == "arc,tail,head,oracle,estimate" and len(rows) == 16
    assert not (tmp_path / "flows.png").exists()


def test_curves_are_bytes_stable(tmp_path):
    c = [LearningCurve("a", "w_o", np.arange(1500), np.linspace(1, 2, 1500), "simulation:3")]
    emit_outputs(c, [("a", "m", 1.0)], tmp_path / "1", {"msd": True})
    emit_outputs(c, [("a", "m", 1.0)], tmp_path / "2", {"msd": True})
    for name in ("curves.csv", "summary.csv", "msd.png"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()
