import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tailentropy import Gaussian, index_curve, threshold_grid, to_pseudo_observations
from tailentropy import io
from tailentropy.cli import main
from tailentropy.model_fit import synthetic_price_panel


@pytest.fixture
def panel_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((400, 4))
    x[:, 1:] += x[:, :1]
    path = tmp_path / "data.csv"
    dates = [f"2001-01-{i:04d}" for i in range(400)]
    io.write_table(path, ["A", "B", "C", "D"], list(x.T), index=dates)
    return path, x


def read_csv(path):
    header, values, _ = io.read_table(path)
    return header, values


def test_index_three_subsets(tmp_path, panel_csv):
    path, x = panel_csv
    out = tmp_path / "out"
    code = main(["index", str(path), "--subsets", "1,2;1,2,3;1,2,3,4",
                 "--grid", ".850:.995:.005", "--out", str(out)])
    assert code == 0
    for tag, k in [("1-2", 2), ("1-2-3", 3), ("1-2-3-4", 4)]:
        header, vals = read_csv(out / f"index_curve_{tag}.csv")
        assert header == ["b", "S_b"]
        assert vals.shape == (30, 2)
        expected = index_curve(to_pseudo_observations(x[:, :k]), threshold_grid(0.85, 0.995, 0.005))
        assert_allclose(vals[:, 1], expected.values, rtol=1e-12)


def test_index_with_tsallis_columns(tmp_path, panel_csv):
    path, _ = panel_csv
    assert main(["index", str(path), "--alpha", "2,4", "--subsets", "1,2", "--out", str(tmp_path)]) == 0
    header, vals = read_csv(tmp_path / "index_curve_1-2.csv")
    assert header == ["b", "S_b", "T_b_alpha_2", "T_b_alpha_4"]


def test_index_comonotone_csv_all_ones(tmp_path):
    x = np.arange(1.0, 4001.0)
    path = tmp_path / "como.csv"
    io.write_table(path, ["a", "b", "c"], [x, np.log(x), x**2])
    assert main(["index", str(path), "--out", str(tmp_path)]) == 0
    for tag in ("1-2", "1-2-3"):
        _, vals = read_csv(tmp_path / f"index_curve_{tag}.csv")
        assert_allclose(vals[:, 1], 1.0, rtol=1e-12)


@pytest.mark.parametrize("content", ["", "a,b\n"])
def test_empty_csv_exit_2(tmp_path, capsys, content):
    path = tmp_path / "empty.csv"
    path.write_text(content)
    assert main(["index", str(path), "--out", str(tmp_path)]) == 2
    assert "no data rows" in capsys.readouterr().err


def test_validation_messages_name_the_field(tmp_path, panel_csv, capsys):
    path, _ = panel_csv
    assert main(["index", str(path), "--grid", ".9:.8:.01", "--out", str(tmp_path)]) == 2
    assert "grid" in capsys.readouterr().err
    assert main(["index", str(path), "--alpha", "0.5", "--out", str(tmp_path)]) == 2
    assert "alpha" in capsys.readouterr().err
    assert main(["index", str(path), "--columns", "Z", "--out", str(tmp_path)]) == 2
    assert "columns" in capsys.readouterr().err


def test_seed_mandatory():
    with pytest.raises(SystemExit) as exc:
        main(["extremal", "--gumbel-xi", "2"])
    assert exc.value.code == 2


def test_extremal_gumbel_theta(tmp_path):
    assert main(["extremal", "--gumbel-xi", "1", "--j", "3", "--exact", "--seed", "0", "--out", str(tmp_path)]) == 0
    theta = json.loads((tmp_path / "theta.json").read_text())
    assert theta["gumbel"]["theta"] == 3.0
    header, vals, index = io.read_table(tmp_path / "convergence_report.csv")
    assert header == ["b", "alpha", "T", "g1", "g2", "theta"]
    assert_allclose(vals[:, 2], 3.0, rtol=1e-12)


def test_extremal_rejects_small_xi(tmp_path, capsys):
    assert main(["extremal", "--gumbel-xi", "0.5", "--seed", "0", "--out", str(tmp_path)]) == 2
    assert "gumbel-xi" in capsys.readouterr().err


def test_extremal_student_reports_conventions(tmp_path):
    args = ["extremal", "--student-nu", "2.76733", "--student-rho", ".767,.759,.624",
            "--n", "200000", "--seed", "1", "--out", str(tmp_path)]
    assert main(args) == 0
    theta = json.loads((tmp_path / "theta.json").read_text())["student"]
    assert set(theta["conventions"]) == {"standard/submatrix", "standard/partial",
                                         "literal/submatrix", "literal/partial"}
    assert theta["validated"] in theta["conventions"]
    assert theta["monte_carlo"]["n"] == 200000


def test_simulate_round_trip(tmp_path):
    path = tmp_path / "s.csv"
    assert main(["simulate", "--family", "gumbel", "--xi", "2", "--j", "3", "--n", "500",
                 "--seed", "4", "--output", str(path)]) == 0
    header, vals = read_csv(path)
    from tailentropy import Gumbel, sample
    assert_allclose(vals, sample(Gumbel(2.0, 3), 500, 4).values, rtol=1e-12, atol=0)
    assert header == ["X1", "X2", "X3"]


def test_curves_round_trip(tmp_path):
    u = np.random.default_rng(1).uniform(size=(300, 2))
    curve = index_curve(u, threshold_grid(0.85, 0.995, 0.005))
    io.write_table(tmp_path / "c.csv", ["b", "S_b"], [curve.grid, curve.values])
    _, vals = read_csv(tmp_path / "c.csv")
    assert_allclose(vals[:, 0], curve.grid, rtol=1e-12)
    assert_allclose(vals[:, 1], curve.values, rtol=1e-12)


@pytest.fixture(scope="module")
def price_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("prices") / "prices.csv"
    corr = np.full((3, 3), 0.6)
    np.fill_diagonal(corr, 1)
    p = synthetic_price_panel(Gaussian(corr), 800, 3)
    io.write_table(path, ["P1", "P2", "P3"], list(p.T))
    return path


def test_pipeline_outputs_and_byte_identical_reruns(tmp_path, price_csv):
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = main(["pipeline", str(price_csv), "--models", "gaussian,student", "--R", "20",
                     "--seed", "7", "--out", str(out)])
        assert code == 0
        runs.append(out)
    names = sorted(p.name for p in runs[0].iterdir())
    assert "fits.json" in names and "report.json" in names and "shocks.csv" in names
    assert "band_gaussian_1-2-3.csv" in names and "band_student_1-2.csv" in names
    for name in names:
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    _, band = read_csv(runs[0] / "band_gaussian_1-2.csv")
    assert band.shape == (30, 3)


def test_pipeline_single_model(tmp_path, price_csv):
    out = tmp_path / "o"
    assert main(["pipeline", str(price_csv), "--models", "student", "--subsets", "1,2,3",
                 "--R", "10", "--seed", "1", "--out", str(out)]) == 0
    bands = sorted(p.name for p in out.glob("band_*.csv"))
    assert bands == ["band_student_1-2-3.csv"]
    report = json.loads((out / "report.json").read_text())
    assert list(report["models"]) == ["student"]
    fits = json.loads((out / "fits.json").read_text())
    assert fits["models"]["student"]["method"] == "pseudo-likelihood"
    assert set(fits["garch"]) == {"P1", "P2", "P3"}


def test_fit_command_writes_estimator_names(tmp_path, panel_csv):
    path, _ = panel_csv
    assert main(["fit", str(path), "--model", "gaussian", "--out", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "fit_gaussian.json").read_text())
    assert fit["diagnostics"]["estimator"] == "kendall-tau-inversion"
    assert fit["spec"]["family"] == "gaussian"


def test_output_dir_from_environment(tmp_path, panel_csv, monkeypatch):
    path, _ = panel_csv
    target = tmp_path / "envout"
    monkeypatch.setenv("TAILENTROPY_OUT", str(target))
    assert main(["index", str(path), "--subsets", "1,2"]) == 0
    assert (target / "index_curve_1-2.csv").exists()
