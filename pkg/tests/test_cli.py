import json

import numpy as np
import pytest

from sspbounds import from_discounted, load_problem, save_problem
from sspbounds.cli import main
import sspbounds.bounds
import sspbounds.gridworld as gw


@pytest.fixture()
def grid_reward_file(grid, tmp_path):
    path = tmp_path / "grid.json"
    save_problem(grid, path, convention="reward")
    return str(path)


@pytest.fixture()
def stay_go_file(stay_go, tmp_path):
    path = tmp_path / "stay_go.json"
    save_problem(stay_go, path, convention="cost")
    return str(path)


def values_file(tmp_path, name, values):
    path = tmp_path / name
    path.write_text(json.dumps({"values": list(values)}), encoding="utf-8")
    return str(path)


class TestSolve:
    def test_policy_iteration_emits_table_shaped_csv(self, grid_reward_file, capsys):
        code = main(["solve", "--input", grid_reward_file, "--algorithm", "pi"])
        out = capsys.readouterr().out
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "iter,J_under,m,residual,error"
        assert len(lines) == 6  # header + iterations 0..4
        row3 = lines[4].split(",")
        assert float(row3[1]) == pytest.approx(0.388, abs=0.01)
        assert float(row3[2]) == pytest.approx(16.3, abs=0.1)

    def test_zero_init_fails_when_not_improvable(self, stay_go_file, capsys):
        code = main(["solve", "--input", stay_go_file, "--init", "zero"])
        captured = capsys.readouterr()
        assert code == 3
        payload = json.loads(captured.err.strip())
        assert payload["error"] == "NotUniformlyImprovable"

    def test_malformed_input_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops", encoding="utf-8")
        code = main(["solve", "--input", str(bad)])
        captured = capsys.readouterr()
        assert code == 2
        assert json.loads(captured.err.strip())["error"] == "ProblemFormatError"

    def test_missing_input_exits_two(self, tmp_path, capsys):
        code = main(["solve", "--input", str(tmp_path / "nowhere.json")])
        capsys.readouterr()
        assert code == 2

    def test_json_output_is_deterministic(self, grid_reward_file, tmp_path):
        out1 = tmp_path / "a.json"
        out2 = tmp_path / "b.json"
        argv = ["solve", "--input", grid_reward_file, "--format", "json"]
        assert main(argv + ["--output", str(out1)]) == 0
        assert main(argv + ["--output", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        payload = json.loads(out1.read_text())
        assert payload["config"]["bounds_method"] == "positive-cost"
        assert payload["bounds"]["overrides"] == [3, 6]
        assert len(payload["values"]) == 12
        # reward-convention file: values reported in reward form
        assert payload["values"][3] == pytest.approx(1.0, abs=1e-9)
        assert len(payload["trace"]) == 5

    def test_value_iteration_with_file_init(self, grid_reward_file, grid, tmp_path, capsys):
        from sspbounds import evaluate_policy, uniform_random_policy

        start = evaluate_policy(grid, uniform_random_policy(grid))
        init = values_file(tmp_path, "init.json", (-start).tolist())  # reward form
        code = main(
            ["solve", "--input", grid_reward_file, "--algorithm", "vi", "--init", init]
        )
        out = capsys.readouterr().out
        assert code == 0
        lines = out.strip().split("\n")
        assert float(lines[1].split(",")[1]) == pytest.approx(-1.603, abs=0.01)

    def test_horizon_cap_exit_code(self, tmp_path, capsys, monkeypatch, stay_go):
        import numpy as np

        from sspbounds import SspProblem

        prob = np.zeros((2, 2, 2))
        prob[0, 0, 0] = 1.0  # free self-loop
        prob[0, 1, 1] = 1.0  # free exit
        prob[1, :, 1] = 1.0
        problem = SspProblem(
            num_states=2, num_actions=2, terminal=1, prob=prob, cost=np.zeros_like(prob)
        )
        path = tmp_path / "free_delay.json"
        save_problem(problem, path, convention="cost")
        monkeypatch.setattr(sspbounds.bounds, "DEFAULT_HORIZON_CAP", 100)
        code = main(
            [
                "solve",
                "--input",
                str(path),
                "--algorithm",
                "vi",
                "--init",
                "zero",
                "--bounds",
                "general",
            ]
        )
        captured = capsys.readouterr()
        assert code == 4
        assert json.loads(captured.err.strip())["error"] == "HorizonCapExceeded"

    def test_env_seed_overrides_flag(self, grid_reward_file, tmp_path, monkeypatch):
        monkeypatch.setenv("SSP_SEED", "777")
        out = tmp_path / "seeded.json"
        code = main(
            [
                "solve", "--input", grid_reward_file, "--format", "json",
                "--seed", "1", "--output", str(out),
            ]
        )
        assert code == 0
        assert json.loads(out.read_text())["config"]["seed"] == 777

    def test_nonpositive_epsilon_exits_two(self, grid_reward_file, capsys):
        code = main(["solve", "--input", grid_reward_file, "--epsilon", "-1"])
        captured = capsys.readouterr()
        assert code == 2
        assert "epsilon" in json.loads(captured.err.strip())["message"]


class TestBench:
    def test_table2_passes(self, capsys):
        code = main(["bench", "table2"])
        captured = capsys.readouterr()
        assert code == 0
        assert "PASS: 5 rows x 11 states compared" in captured.out

    def test_table1_pi_passes(self, capsys):
        code = main(["bench", "table1", "--algorithm", "pi"])
        captured = capsys.readouterr()
        assert code == 0
        assert "PASS: 5 rows compared" in captured.out

    def test_table1_vi_passes(self, capsys):
        code = main(["bench", "table1", "--algorithm", "vi"])
        captured = capsys.readouterr()
        assert code == 0
        assert "PASS: 13 rows compared" in captured.out

    def test_failure_lists_offenders_and_exits_one(self, capsys, monkeypatch):
        broken = list(gw.EXPECTED_TABLE2)
        broken[1] = gw.Table2Row(1, tuple([9.9] + list(broken[1].values[1:])), broken[1].steps)
        monkeypatch.setattr(gw, "EXPECTED_TABLE2", tuple(broken))
        code = main(["bench", "table2"])
        captured = capsys.readouterr()
        assert code == 1
        assert "J(0)" in captured.err
        assert "FAIL" in captured.err

    def test_table_written_to_output_file(self, tmp_path, capsys):
        out = tmp_path / "table2.csv"
        code = main(["bench", "table2", "--output", str(out)])
        capsys.readouterr()
        assert code == 0
        assert out.read_text().startswith("iter,J0,N0")


class TestCheck:
    def test_stay_go_witness(self, stay_go_file, capsys):
        code = main(["check", "--input", stay_go_file])
        payload = json.loads(capsys.readouterr().out)
        assert code == 0
        assert payload["all_policies_proper"]["all_policies_proper"] is False
        assert payload["all_policies_proper"]["witness_states"] == [0]
        assert payload["uniform_random_policy"]["proper"] is True

    def test_discounted_reduction_all_proper(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        transitions = rng.uniform(0.1, 1.0, size=(3, 2, 3))
        transitions /= transitions.sum(axis=2, keepdims=True)
        problem = from_discounted(transitions, rng.normal(size=transitions.shape), 0.9)
        path = tmp_path / "disc.json"
        save_problem(problem, path, convention="cost")
        code = main(["check", "--input", str(path)])
        payload = json.loads(capsys.readouterr().out)
        assert code == 0
        assert payload["all_policies_proper"]["all_policies_proper"] is True

    def test_values_add_certificate(self, grid_reward_file, grid_optimal_values, tmp_path, capsys):
        init = values_file(tmp_path, "opt.json", (-grid_optimal_values).tolist())
        code = main(["check", "--input", grid_reward_file, "--values", init])
        payload = json.loads(capsys.readouterr().out)
        assert code == 0
        assert payload["uniformly_improvable"] is True
        assert payload["horizon_certificate"]["m"] > 0

    def test_check_rejects_invalid_file(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"num_states": 1}), encoding="utf-8")
        code = main(["check", "--input", str(path)])
        capsys.readouterr()
        assert code == 2


class TestConvert:
    def test_round_trip(self, grid_reward_file, tmp_path, capsys):
        cost_file = tmp_path / "cost.json"
        back = tmp_path / "reward_again.json"
        assert main(["convert", "--input", grid_reward_file, "--output", str(cost_file)]) == 0
        assert json.loads(cost_file.read_text())["convention"] == "cost"
        assert main(["convert", "--input", str(cost_file), "--output", str(back)]) == 0
        import pathlib

        assert back.read_bytes() == pathlib.Path(grid_reward_file).read_bytes()
        capsys.readouterr()

    def test_converted_instances_agree(self, grid_reward_file, grid, tmp_path, capsys):
        cost_file = tmp_path / "cost.json"
        main(["convert", "--input", grid_reward_file, "--output", str(cost_file)])
        capsys.readouterr()
        loaded, convention = load_problem(cost_file)
        assert convention == "cost"
        assert np.array_equal(loaded.cost, grid.cost)

    def test_convert_to_stdout(self, stay_go_file, capsys):
        assert main(["convert", "--input", stay_go_file]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["convention"] == "reward"
        go = [r for r in payload["transitions"] if r["from"] == 0 and r["action"] == 0]
        assert go[0]["cost"] == -2.0
