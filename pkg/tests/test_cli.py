import json
import math
import subprocess
import sys

import numpy as np
import pytest

from roverann.cli import main
from roverann.network import Network, paper_network
from roverann.rover import make_world, save_scenario
from roverann.trainer import (
    Dataset,
    Pattern,
    load_network,
    save_dataset,
    save_network,
)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def paper_files(tmp_path):
    save_network(paper_network(), tmp_path / "w.json")
    save_dataset(Dataset([Pattern([0, 0], [1, 1])]), tmp_path / "d.csv")
    return tmp_path / "w.json", tmp_path / "d.csv"


class TestDemoPaper:
    def test_lines(self, capsys):
        code, out, err = run(capsys, "demo-paper")
        assert code == 0
        lines = out.splitlines()
        assert "Output of h0 = 0.524979" in lines
        assert "W00(out) = 0.132230" in lines
        assert "Output of O1 = 1.751668" in lines
        assert err == ""

    def test_repeatable(self, capsys):
        first = run(capsys, "demo-paper")
        assert run(capsys, "demo-paper") == first

    def test_modes_agree(self, capsys):
        assert run(capsys, "demo-paper", "--mode", "simultaneous") == run(capsys, "demo-paper")

    def test_mismatch_exits_one(self, capsys, monkeypatch):
        from roverann import demo

        monkeypatch.setitem(demo.PUBLISHED, "W00(out)", 0.5)
        code, _, err = run(capsys, "demo-paper")
        assert code == 1
        assert "W00(out)" in err


class TestTrain:
    def test_paper_task(self, capsys, paper_files, tmp_path):
        w, d = paper_files
        out_path = tmp_path / "out.json"
        code, out, _ = run(capsys, "train", "--weights", str(w), "--dataset", str(d),
                           "--lr", "0.25", "--out", str(out_path))
        assert code == 0
        assert out.startswith("converged after 7 epochs")
        np.testing.assert_allclose(load_network(out_path)([0, 0]), [1, 1], atol=0.01)

    def test_zero_epochs(self, capsys, paper_files):
        w, d = paper_files
        code, out, _ = run(capsys, "train", "--weights", str(w), "--dataset", str(d),
                           "--epochs", "0")
        assert code == 2
        assert "not converged" in out

    def test_avoidance_with_momentum(self, capsys, tmp_path):
        code, out, _ = run(capsys, "train", "--momentum", "0.9", "--out", str(tmp_path / "n.json"))
        assert code == 0
        assert out.startswith("converged after 51 epochs")

    def test_bundled_network_is_reproduced(self, capsys, tmp_path):
        from roverann.cli import data_file

        run(capsys, "train", "--momentum", "0.9", "--seed", "0", "--out", str(tmp_path / "n.json"))
        ours = load_network(tmp_path / "n.json")
        bundled = load_network(data_file("avoidance_network.json"))
        for a, b in zip(ours.weights, bundled.weights):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)

    def test_trace_format(self, capsys, paper_files):
        w, d = paper_files
        code, out, _ = run(capsys, "train", "--weights", str(w), "--dataset", str(d), "--trace")
        trace = [l for l in out.splitlines() if l.startswith("epoch,")]
        assert len(trace) == 7
        for n, line in enumerate(trace, 1):
            tag, k, name, e = line.split(",")
            assert (tag, int(k), name) == ("epoch", n, "max_abs_error")
            assert math.isfinite(float(e))
        assert float(trace[-1].split(",")[3]) <= 0.01

    def test_seeded_is_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        first = run(capsys, "train", "--seed", "5", "--momentum", "0.5", "--trace", "--out", str(a))
        second = run(capsys, "train", "--seed", "5", "--momentum", "0.5", "--trace", "--out", str(b))
        assert first == second
        assert a.read_bytes() == b.read_bytes()

    def test_simultaneous_mode(self, capsys, paper_files):
        w, d = paper_files
        code, _, _ = run(capsys, "train", "--weights", str(w), "--dataset", str(d),
                         "--mode", "simultaneous")
        assert code == 0

    @pytest.mark.parametrize("argv, needle", [
        (["--dataset", "missing.csv"], "missing.csv"),
        (["--weights", "missing.json"], "missing.json"),
    ])
    def test_bad_input(self, capsys, argv, needle):
        code, _, err = run(capsys, "train", *argv)
        assert code == 1
        assert needle in err

    @pytest.mark.parametrize("argv, needle", [
        (["--lr", "0"], "--lr"),
        (["--momentum", "-1"], "--momentum"),
        (["--threshold", "x"], "--threshold"),
        (["--epochs", "-3"], "--epochs"),
    ])
    def test_bad_flag(self, capsys, argv, needle):
        with pytest.raises(SystemExit) as e:
            main(["train", *argv])
        assert e.value.code == 1
        assert needle in capsys.readouterr().err

    def test_dataset_network_mismatch(self, capsys, tmp_path):
        save_network(Network.random((3, 3, 2)), tmp_path / "w.json")
        code, _, err = run(capsys, "train", "--weights", str(tmp_path / "w.json"))
        assert code == 1 and "does not fit" in err

    def test_malformed_weights(self, capsys, tmp_path):
        (tmp_path / "w.json").write_text('{"topology": [2, 3, 2]}')
        code, _, err = run(capsys, "train", "--weights", str(tmp_path / "w.json"))
        assert code == 1 and "w.json" in err

    def test_divergence_exits_one(self, capsys, paper_files):
        w, d = paper_files
        code, _, err = run(capsys, "train", "--weights", str(w), "--dataset", str(d),
                           "--lr", "50")
        assert code == 1 and "diverged" in err

    def test_weights_and_seed_exclusive(self, capsys, paper_files):
        w, _ = paper_files
        with pytest.raises(SystemExit) as e:
            main(["train", "--weights", str(w), "--seed", "1"])
        assert e.value.code == 1


class TestGradcheck:
    def test_twenty_trials(self, capsys):
        code, out, err = run(capsys, "gradcheck", "--trials", "20", "--h", "1e-5")
        assert code == 0
        last = out.splitlines()[-1]
        assert last.startswith("max relative deviation:")
        assert float(last.split(":")[1]) < 1e-6
        assert err == ""

    def test_coarse_step_fails_and_names_weight(self, capsys):
        code, out, err = run(capsys, "gradcheck", "--trials", "3", "--h", "1e-1")
        assert code == 1
        assert "weight matrix" in err and "entry [" in err

    def test_zero_trials(self, capsys):
        code, _, err = run(capsys, "gradcheck", "--trials", "0")
        assert code == 0
        assert "warning" in err

    def test_bad_step(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["gradcheck", "--h", "0"])
        assert e.value.code == 1


class TestSimulate:
    def test_paper_scenario(self, capsys, tmp_path):
        csv_path, svg_path = tmp_path / "t.csv", tmp_path / "t.svg"
        code, out, _ = run(capsys, "simulate", "--csv", str(csv_path), "--svg", str(svg_path))
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "ReachedGoal"
        assert lines[1] == "steps 147"
        fields = dict(kv.split("=") for kv in lines[2].split()[2:])
        assert math.hypot(float(fields["x"]) - 11.73, float(fields["y"])) <= 0.25
        assert len(csv_path.read_text().splitlines()) == 148
        assert svg_path.read_text().startswith("<?xml")

    def test_repeatable(self, capsys, tmp_path):
        first = run(capsys, "simulate", "--csv", str(tmp_path / "a.csv"))
        assert run(capsys, "simulate", "--csv", str(tmp_path / "b.csv")) == first
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_empty_world(self, capsys, tmp_path):
        save_scenario(make_world((0, 0), (11.73, 0)), tmp_path / "s.json")
        code, out, _ = run(capsys, "simulate", "--scenario", str(tmp_path / "s.json"),
                           "--csv", str(tmp_path / "t.csv"))
        assert code == 0
        ys = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)[:, 2]
        assert np.abs(ys).max() < 0.25

    def test_zero_network_times_out(self, capsys, tmp_path):
        save_network(Network.zeros((2, 3, 2)), tmp_path / "z.json")
        code, out, _ = run(capsys, "simulate", "--network", str(tmp_path / "z.json"))
        assert code == 2
        assert out.splitlines()[0] == "Timeout"

    def test_collision_exits_three(self, capsys, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"k_goal": 0.0}))
        net = Network((2, 1, 2), [np.zeros((1, 3)), [[0.0, 1.0], [0.0, 1.0]]])
        save_network(net, tmp_path / "n.json")
        code, out, _ = run(capsys, "simulate", "--network", str(tmp_path / "n.json"),
                           "--config", str(tmp_path / "c.json"))
        assert code == 3
        assert out.splitlines()[0] == "Collision"

    def test_config_override(self, capsys, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"max_steps": 10}))
        code, out, _ = run(capsys, "simulate", "--config", str(tmp_path / "c.json"))
        assert code == 2 and "steps 11" in out

    @pytest.mark.parametrize("flag, text", [
        ("--network", "{not json"),
        ("--scenario", '{"start": [0, 0]}'),
        ("--config", '{"warp": 9}'),
        ("--config", '{"dt": 5}'),
    ])
    def test_malformed_files(self, capsys, tmp_path, flag, text):
        (tmp_path / "f.json").write_text(text)
        code, out, err = run(capsys, "simulate", flag, str(tmp_path / "f.json"))
        assert code == 1
        assert "f.json" in err
        assert out == ""

    def test_start_inside_obstacle(self, capsys, tmp_path):
        (tmp_path / "s.json").write_text(json.dumps(
            {"start": [0, 0], "goal": [5, 0], "obstacles": [{"c": [0, 0], "r": 1}]}))
        code, _, err = run(capsys, "simulate", "--scenario", str(tmp_path / "s.json"))
        assert code == 1 and "inside" in err


class TestParser:
    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["simulate", "--bogus"])
        assert e.value.code == 1

    def test_no_subcommand(self, capsys):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == 1

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "roverann", "demo-paper"],
                           capture_output=True, text=True)
        assert r.returncode == 0
        assert "W00(out) = 0.132230" in r.stdout
