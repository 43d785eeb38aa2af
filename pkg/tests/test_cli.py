import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from greedy_ldp.cli import RunConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def summary(out):
    return json.loads(out)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# greedy-ldp ")
    header = lines[1].split(",")
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    return lines[0], header, rows


def test_fluid_csv_ends_at_jamming_constant(capsys, tmp_path):
    out = tmp_path / "fluid.csv"
    code, text, _ = run(capsys, "fluid", "--regular", "3", "--out", str(out), "--every", "50")
    assert code == 0
    assert summary(text)["T_star"] == pytest.approx(0.375, abs=1e-6)
    meta, header, rows = read_csv(out)
    assert header[0] == "t"
    assert rows[-1, 0] == pytest.approx(0.375, abs=1e-6)
    assert rows[-1, -1] == 0.0


def test_simulate_path(capsys, tmp_path):
    out = tmp_path / "sim.csv"
    code, text, _ = run(capsys, "simulate", "--regular", "3", "--n", "200", "--seed", "4", "--out", str(out))
    assert code == 0
    s = summary(text)
    _, _, rows = read_csv(out)
    assert rows[-1, 0] == pytest.approx(s["T_star_steps"] / 200)
    assert "seed=4" in s["metadata"]


@pytest.mark.parametrize("argv", [["bogus"], [], ["fluid", "--regular", "3", "--no-such-flag"]])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_invalid_model_is_usage_error(capsys):
    assert run(capsys, "fluid", "--probs", "0.5,0.6")[0] == 2
    assert run(capsys, "fluid")[0] == 2


def test_rate_curve_csv_and_metadata(capsys, tmp_path):
    out = tmp_path / "rc.csv"
    code, text, err = run(capsys, "rate-curve", "--regular", "3", "--range", "-0.5,0.6", "--points", "12",
                          "--out", str(out), "--gnuplot")
    assert code == 0
    meta, header, rows = read_csv(out)
    assert header == ["alpha0", "T_alpha0", "F"]
    assert rows.shape == (12, 3)
    assert np.isnan(rows[-1, 2]) and "warning" in err
    assert "config=" in meta
    gp = (tmp_path / "rc.csv.gp").read_text()
    assert "plot" in gp and str(out) in gp


def test_deviation_single_point(capsys):
    code, text, _ = run(capsys, "deviation", "--regular", "3", "--eps", "0.05")
    assert code == 0
    s = summary(text)
    assert s["T_alpha0"] == pytest.approx(0.425, abs=1e-7)
    assert s["rate"] > 0


def test_deviation_out_of_range_exit_code(capsys):
    assert run(capsys, "deviation", "--regular", "3", "--eps", "0.2")[0] == 4
    assert run(capsys, "deviation", "--regular", "3", "--eps", "0.13", "--side", "lower")[0] == 4


def test_deviation_curve(capsys, tmp_path):
    out = tmp_path / "dev.csv"
    code, _, _ = run(capsys, "deviation", "--regular", "2", "--eps", "0.02,0.04,0.1", "--out", str(out))
    assert code == 0
    _, header, rows = read_csv(out)
    assert header == ["eps", "alpha0", "T_alpha0", "F"]
    assert rows[0, 3] < rows[1, 3] and np.isnan(rows[2, 3])


def test_hamilton_singular_exit_code(capsys):
    assert run(capsys, "hamilton", "--regular", "3", "--alpha0", "0.6")[0] == 3


def test_hamilton_path_columns(capsys, tmp_path):
    out = tmp_path / "h.csv"
    code, text, _ = run(capsys, "hamilton", "--regular", "3", "--alpha0", "0.2", "--out", str(out))
    assert code == 0
    _, header, rows = read_csv(out)
    assert header[:4] == ["t", "s", "u", "e_3"] and header[-1] == "action"
    assert rows[-1, -1] == pytest.approx(summary(text)["action"])


def test_hamilton_negative_launch_argument(capsys):
    code, text, _ = run(capsys, "hamilton", "--regular", "3", "--alpha0", "-0.3")
    assert code == 0
    assert summary(text)["T_alpha0"] < 0.375


def test_montecarlo_json_and_histogram(capsys, tmp_path):
    out, js = tmp_path / "mc.csv", tmp_path / "mc.json"
    code, _, _ = run(capsys, "montecarlo", "--regular", "3", "--n", "60", "--replicas", "500",
                     "--threshold", "0.4", "--out", str(out), "--json", str(js))
    assert code == 0
    s = json.loads(js.read_text())
    assert s["replicas"] == 500
    assert "upper:0.4" in s["tail_estimates"]
    _, header, rows = read_csv(out)
    assert header == ["fraction", "probability"]
    assert rows[:, 1].sum() == pytest.approx(1.0)


def test_montecarlo_thread_env_does_not_change_output(capsys, monkeypatch):
    argv = ["montecarlo", "--regular", "3", "--n", "100", "--replicas", "3000", "--seed", "2"]
    monkeypatch.setenv("GREEDY_LDP_THREADS", "1")
    a = summary(run(capsys, *argv)[1])
    monkeypatch.setenv("GREEDY_LDP_THREADS", "4")
    b = summary(run(capsys, *argv)[1])
    assert a["mean"] == b["mean"] and a["variance"] == b["variance"]


def test_cost_and_hamiltonian(capsys):
    code, text, _ = run(capsys, "cost", "--regular", "3", "--x", "0.1,2.5,0.5", "--beta", "1,-6,-1.5")
    assert code == 0 and summary(text)["status"] == "finite"
    code, text, _ = run(capsys, "hamiltonian", "--x", "0,3,0,0,0,1", "--alpha", "0,0,0,0,0,0")
    assert code == 0
    s = summary(text)
    assert s["H"] == pytest.approx(0.0, abs=1e-14)
    assert s["grad_alpha"][0] == 1.0


def test_config_file_supplies_defaults(capsys, tmp_path):
    saved = tmp_path / "run.cfg"
    code, first, _ = run(capsys, "fluid", "--regular", "4", "--step", "0.002", "--save-config", str(saved))
    assert code == 0
    code, second, _ = run(capsys, "fluid", "--config", str(saved))
    assert code == 0
    assert summary(first)["T_star"] == summary(second)["T_star"]
    assert summary(first)["metadata"] == summary(second)["metadata"]
    # explicit flags override the file
    code, third, _ = run(capsys, "fluid", "--config", str(saved), "--regular", "3")
    assert summary(third)["T_star"] == pytest.approx(0.375, abs=1e-6)


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("command = fluid\nregular = 3\nbogus = 1\n")
    assert run(capsys, "fluid", "--config", str(cfg))[0] == 2


_values = st.one_of(st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=False),
                    st.text(alphabet="abcxyz,.-0123", min_size=1, max_size=8).filter(lambda s: s.strip() == s),
                    st.lists(st.floats(-1e3, 1e3), max_size=4), st.booleans())


@given(st.dictionaries(st.from_regex(r"[a-z][a-z_]{0,8}", fullmatch=True).filter(lambda k: k != "command"),
                       _values, max_size=6))
def test_config_round_trip(options):
    cfg = RunConfig("fluid", options)
    back = RunConfig.from_text(cfg.to_text())
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_validate(capsys):
    code, text, err = run(capsys, "validate", "--points", "10")
    assert code == 0
    assert err.count("PASS") == 5
