import json
import os

import numpy as np
import pytest

from lodegp.gp import Dataset
from lodegp.io_cli import (
    build_result_dict,
    dump_json,
    load_model,
    load_system,
    main,
    model_from_json_dict,
    model_to_json_dict,
    read_dataset_csv,
    system_from_json_dict,
    system_to_json_dict,
    write_dataset_csv,
)
from lodegp.systems import SYSTEM_NAMES, generate_data, make_system


def write_system(tmp_path, name):
    path = tmp_path / f"{name}.json"
    dump_json(system_to_json_dict(make_system(name)), path)
    return str(path)


def write_data(tmp_path, name, count=12, noise=0.0, seed=0):
    spec = make_system(name)
    data = generate_data(spec, count, noise_std=noise, seed=seed)
    path = tmp_path / f"{name}.csv"
    write_dataset_csv(path, data)
    return str(path), data


def strip_timestamps(text: str) -> str:
    return "\n".join(
        ln for ln in text.splitlines() if '"created_at"' not in ln
    )


class TestSystemRoundTrip:
    @pytest.mark.parametrize("name", SYSTEM_NAMES)
    def test_matrix_round_trips_exactly(self, name):
        spec = make_system(name)
        doc = system_to_json_dict(spec)
        back = system_from_json_dict(json.loads(json.dumps(doc)))
        assert back.matrix == spec.matrix
        assert back.channels == spec.channels
        assert back.param_symbols == spec.param_symbols
        assert (back.ref_solution is None) == (spec.ref_solution is None)

    def test_missing_field_rejected(self):
        from lodegp.errors import ParseError

        with pytest.raises(ParseError):
            system_from_json_dict({"name": "x", "channels": ["a"]})

    def test_ragged_equations_rejected(self):
        from lodegp.errors import ParseError

        with pytest.raises(ParseError):
            system_from_json_dict(
                {"name": "x", "channels": ["a", "b"], "equations": [["D", "1"], ["D"]]}
            )


class TestCsvRoundTrip:
    def test_lossless(self, tmp_path):
        spec = make_system("bipendulum")
        data = generate_data(spec, 25, noise_std=0.012, seed=1)
        path = tmp_path / "d.csv"
        write_dataset_csv(path, data)
        back = read_dataset_csv(path, spec.channels)
        assert np.array_equal(back.times, data.times)
        assert np.array_equal(back.values, data.values)

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x,y\n0.0,1.0,2.0\n")
        from lodegp.io_cli import DataFormatError

        with pytest.raises(DataFormatError):
            read_dataset_csv(path, ("f1", "f2", "u"))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        from lodegp.io_cli import DataFormatError

        with pytest.raises(DataFormatError):
            read_dataset_csv(path, ("y",))


class TestModelRoundTrip:
    def test_bit_exact_raw_parameters(self):
        spec = make_system("heating")
        data = generate_data(spec, 8, noise_std=0.02, seed=4)
        from lodegp.kernelalg import compile_lodegp
        from lodegp.gp import init_model

        model = init_model(
            compile_lodegp(spec),
            raw_hypers={"sigma2": 0.123456789123456789, "ell2": -1.987654321},
            ode_params={"a": 2.718281828459045, "b": 0.3333333333333333},
            noise_raw=-3.5,
        )
        doc = model_to_json_dict(model, spec, data, "symbolic")
        text = json.dumps(doc)
        back, spec2, data2, mode = model_from_json_dict(json.loads(text))
        assert back.raw_hypers == model.raw_hypers
        assert back.ode_params == model.ode_params
        assert back.noise_raw == model.noise_raw
        assert np.array_equal(data2.times, data.times)
        assert np.array_equal(data2.values, data.values)


class TestCliSnf:
    def test_builtin_controllable_verdict(self, capsys):
        assert main(["snf", "bipendulum"]) == 0
        out = capsys.readouterr().out
        assert "controllable: true" in out
        assert "D =" in out

    def test_equal_lengths_not_controllable(self, capsys, tmp_path):
        path = write_system(tmp_path, "bipendulum-equal")
        assert main(["snf", path]) == 0
        out = capsys.readouterr().out
        assert "D^2 + 981/100" in out
        assert "controllable: false" in out

    def test_json_mode(self, capsys):
        assert main(["snf", "three-tank", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["controllable"] is False
        assert doc["D"][2][2] == "D"

    def test_malformed_polynomial_exit_2(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        doc = system_to_json_dict(make_system("bipendulum"))
        doc["equations"][0][0] = "D^2 + ("
        dump_json(doc, path)
        assert main(["snf", str(path)]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_file_exit_2(self, capsys):
        assert main(["snf", "/nonexistent/system.json"]) == 2


class TestCliKernel:
    def test_entry_selection(self, capsys):
        assert main(["kernel", "bipendulum", "--entry", "0", "0"]) == 0
        out = capsys.readouterr().out
        assert "K[0,0]" in out and "SE(ell2)" in out


class TestCliFit:
    def test_fit_writes_model_and_result(self, tmp_path, capsys):
        sys_path = write_system(tmp_path, "heating")
        csv_path, _ = write_data(tmp_path, "heating", count=12)
        model_path = tmp_path / "model.json"
        result_path = tmp_path / "result.json"
        code = main([
            "fit", sys_path, csv_path, "--iters", "25", "--seed", "1",
            "-o", str(model_path), "--result", str(result_path),
        ])
        assert code == 0
        result = json.loads(result_path.read_text())
        assert result["schema"] == 1
        assert result["metrics"]["mean_ode_error"] > 0
        assert "a" in result["params"] and "b" in result["params"]
        model, spec, data, mode = load_model(str(model_path))
        assert mode == "symbolic"
        assert len(data) == 12

    def test_determinism_modulo_timestamp(self, tmp_path):
        sys_path = write_system(tmp_path, "bipendulum")
        csv_path, _ = write_data(tmp_path, "bipendulum", count=10, noise=0.012, seed=2)
        outs = []
        for k in range(2):
            result_path = tmp_path / f"r{k}.json"
            assert main([
                "fit", sys_path, csv_path, "--iters", "15", "--seed", "3",
                "--result", str(result_path),
            ]) == 0
            outs.append(strip_timestamps(result_path.read_text()))
        assert outs[0] == outs[1]

    def test_channel_mismatch_exit_3(self, tmp_path, capsys):
        sys_path = write_system(tmp_path, "three-tank")
        csv_path, _ = write_data(tmp_path, "bipendulum", count=8)
        assert main(["fit", sys_path, csv_path, "--iters", "5"]) == 3

    def test_empty_csv_exit_3(self, tmp_path):
        sys_path = write_system(tmp_path, "heating")
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert main(["fit", sys_path, str(empty), "--iters", "5"]) == 3


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("fitted")
    sys_path = write_system(tmp_path, "bipendulum")
    csv_path, _ = write_data(tmp_path, "bipendulum", count=10, noise=0.012, seed=5)
    model_path = tmp_path / "model.json"
    result_path = tmp_path / "result.json"
    assert main([
        "fit", sys_path, csv_path, "--iters", "30", "--seed", "1",
        "-o", str(model_path), "--result", str(result_path),
    ]) == 0
    return tmp_path, str(model_path)


class TestCliPredictSample:

    def test_predict_shape(self, fitted, capsys):
        tmp_path, model_path = fitted
        out_csv = tmp_path / "pred.csv"
        assert main(["predict", model_path, "--grid", "1:6:25", "-o", str(out_csv)]) == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "t,mean_f1,mean_f2,mean_u,var_f1,var_f2,var_u"
        assert len(lines) == 26

    def test_loaded_model_reproduces_predictions(self, fitted):
        tmp_path, model_path = fitted
        model, spec, data, _ = load_model(model_path)
        from lodegp.gp import posterior_mean

        query = np.linspace(1.0, 8.0, 13)
        first = posterior_mean(model, data, query)
        again, _, data2, _ = load_model(model_path)
        assert np.array_equal(posterior_mean(again, data2, query), first)

    def test_predict_bad_grid_exit_2(self, fitted):
        _, model_path = fitted
        assert main(["predict", model_path, "--grid", "nope"]) == 2

    def test_sample_deterministic(self, fitted):
        tmp_path, model_path = fitted
        a = tmp_path / "s1.csv"
        b = tmp_path / "s2.csv"
        for p in (a, b):
            assert main([
                "sample", model_path, "--grid", "1:6:10", "--count", "2",
                "--seed", "9", "-o", str(p),
            ]) == 0
        assert a.read_text() == b.read_text()
        header = a.read_text().splitlines()[0]
        assert header.startswith("t,sample0_f1")

    def test_plot_files_created(self, fitted):
        tmp_path, model_path = fitted
        png1 = tmp_path / "pred.png"
        png2 = tmp_path / "samp.png"
        assert main(["predict", model_path, "--grid", "1:8:40",
                     "-o", str(tmp_path / "p.csv"), "--plot", str(png1)]) == 0
        assert main(["sample", model_path, "--grid", "1:8:20", "--count", "3",
                     "-o", str(tmp_path / "s.csv"), "--plot", str(png2)]) == 0
        assert png1.stat().st_size > 0
        assert png2.stat().st_size > 0


class TestCliVerify:
    def test_verify_report(self, tmp_path, capsys):
        sys_path = write_system(tmp_path, "heating")
        csv_path, _ = write_data(tmp_path, "heating", count=12)
        model_path = tmp_path / "model.json"
        assert main([
            "fit", sys_path, csv_path, "--iters", "40", "--seed", "2",
            "-o", str(model_path), "--result", str(tmp_path / "r.json"),
        ]) == 0
        out_path = tmp_path / "verify.json"
        assert main([
            "verify", str(model_path), sys_path, "--eig-points", "120",
            "-o", str(out_path),
        ]) == 0
        doc = json.loads(out_path.read_text())
        assert len(doc["per_equation_ode_error"]) == 2
        assert doc["eig_threshold"] == 1e-6
        assert doc["eig_count"] > 0
        assert doc["smoothing"] == "none"


class TestCliExperiment:
    def test_small_experiment_outputs(self, tmp_path, capsys):
        out_dir = tmp_path / "exp"
        assert main([
            "experiment", "heating", "--runs", "2", "--iters", "10",
            "--seed", "1", "-o", str(out_dir),
        ]) == 0
        files = set(os.listdir(out_dir))
        assert "aggregate.json" in files
        assert "run_000.lodegp.json" in files
        assert "run_001.baseline_se.json" in files
        assert "ode_errors.csv" in files
        assert "predictions_lodegp_run000.csv" in files
        assert "loss_traces_lodegp.csv" in files
        assert "posterior_lodegp_run000.png" in files
        assert "ode_error_boxplot.png" in files
        assert "loss_traces.png" in files
        agg = json.loads((out_dir / "aggregate.json").read_text())
        assert agg["completed_runs"] == 2
        assert "lodegp" in agg["models"] and "baseline_se" in agg["models"]
        assert "parameter_recovery" in agg

    def test_determinism_modulo_timestamp(self, tmp_path):
        texts = []
        for k in range(2):
            out_dir = tmp_path / f"exp{k}"
            assert main([
                "experiment", "bipendulum", "--runs", "2", "--iters", "8",
                "--seed", "7", "-o", str(out_dir),
            ]) == 0
            texts.append(strip_timestamps((out_dir / "aggregate.json").read_text()))
        assert texts[0] == texts[1]

    def test_jobs_parallel_same_aggregate(self, tmp_path):
        base = None
        for jobs in ("1", "2"):
            out_dir = tmp_path / f"jobs{jobs}"
            assert main([
                "experiment", "three-tank", "--runs", "2", "--iters", "6",
                "--seed", "3", "--jobs", jobs, "-o", str(out_dir),
            ]) == 0
            text = strip_timestamps((out_dir / "aggregate.json").read_text())
            if base is None:
                base = text
            else:
                assert text == base
