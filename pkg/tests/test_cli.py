"""Configuration parsing, artifact files, the experiment runner, and the
command line entry point."""

import copy
import json
import os

import numpy as np
import pytest

from hmc_sysid.cli import (
    ConstraintViolation,
    MissingHeader,
    NonFiniteValue,
    NonUniformSampling,
    ParseError,
    UnknownKey,
    ingest_csv,
    main,
    parse_config,
    run_experiment,
    serialize,
    simulate_only,
)
from hmc_sysid.cli.io import (
    read_chain_csv,
    read_json,
    write_chain_csv,
    write_data_csv,
)
from hmc_sysid.models import DataSet
from hmc_sysid.presets import PRESET_NAMES, load_preset, preset_text

BASE = {
    "model": {"kind": "arx", "n_a": 2, "n_b": 2, "noise": {"kind": "gaussian"}},
    "sampler": {
        "kind": "hmc", "iterations": 60, "warmup": 20,
        "epsilon": 0.15, "L_base": 0.6,
    },
    "data": {
        "simulate": {
            "T": 120,
            "input": {"kind": "random_binary", "amplitude": 1.0},
            "theta_true": [-1.5, 0.7, 0.0, 1.0, 0.5],
            "sigma_true": 0.5,
        }
    },
    "split": 1.0,
    "chains": 1,
    "seed": 7,
}


def make_config(**over):
    raw = copy.deepcopy(BASE)
    for key, value in over.items():
        raw[key] = value
    return raw


class TestParseConfig:
    def test_accepts_dict_str_bytes(self):
        text = json.dumps(BASE)
        assert parse_config(BASE) == parse_config(text) == parse_config(text.encode())

    def test_serialize_is_canonical_fixed_point(self):
        cfg = parse_config(BASE)
        canon = serialize(cfg)
        assert parse_config(canon) == cfg
        assert serialize(parse_config(canon)) == canon

    def test_unknown_keys_report_dotted_path(self):
        bad = make_config(model={**BASE["model"], "n_q": 3})
        with pytest.raises(UnknownKey, match=r"model\.n_q"):
            parse_config(bad)
        with pytest.raises(UnknownKey, match=r"priors\.bogus"):
            parse_config(make_config(priors={"bogus": {"kind": "flat"}}))
        with pytest.raises(UnknownKey, match="extra"):
            parse_config(make_config(extra=1))

    def test_invalid_json_is_parse_error(self):
        with pytest.raises(ParseError):
            parse_config("{not json")

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda raw: raw["data"]["simulate"].update(T=0),
            lambda raw: raw["data"]["simulate"].update(theta_true=[1.0, 2.0]),
            lambda raw: raw["model"].update(n_a=0),
            lambda raw: raw.update(split=1.5),
            lambda raw: raw["sampler"].update(warmup=60),
            lambda raw: raw.update(chains=0),
        ],
    )
    def test_constraint_violations(self, mutate):
        raw = make_config()
        mutate(raw)
        with pytest.raises(ConstraintViolation):
            parse_config(raw)

    def test_unknown_model_kind(self):
        with pytest.raises(ConstraintViolation):
            parse_config(make_config(model={"kind": "narmax"}))

    def test_default_priors_filled_in(self):
        cfg = parse_config(BASE)
        assert set(cfg.priors) == {"coefficients", "sigma"}
        student = make_config(
            model={**BASE["model"], "noise": {"kind": "student_t"}}
        )
        student["data"]["simulate"]["nu_true"] = 3.0
        cfg2 = parse_config(student)
        assert set(cfg2.priors) == {"coefficients", "sigma", "nu"}

    def test_data_file_variant(self):
        cfg = parse_config(make_config(data={"file": "record.csv"}))
        assert cfg.data.file == "record.csv" and cfg.data.simulate is None
        with pytest.raises(ConstraintViolation):
            parse_config(make_config(data={}))


class TestDataFiles:
    def test_write_ingest_roundtrip(self, tmp_path):
        data = DataSet(
            u=np.array([1.0, -1.0, 1.0]),
            y=np.array([0.125, -2.5, 3.75]),
            dt=0.02,
        )
        path = tmp_path / "data.csv"
        write_data_csv(path, data)
        back = ingest_csv(path)
        assert np.array_equal(back.u, data.u)
        assert np.array_equal(back.y, data.y)
        assert back.dt == data.dt

    def test_multi_output_roundtrip(self, tmp_path):
        y = np.arange(12.0).reshape(4, 3)
        data = DataSet(u=np.ones(4), y=y, dt=0.5)
        path = tmp_path / "data.csv"
        write_data_csv(path, data)
        assert path.read_text().splitlines()[0] == "t,u,y,y2,y3"
        back = ingest_csv(path)
        assert np.array_equal(back.y, y)

    def write_lines(self, tmp_path, lines):
        path = tmp_path / "in.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_empty_file_is_constraint_violation(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ConstraintViolation):
            ingest_csv(path)
        with pytest.raises(ConstraintViolation):
            ingest_csv(self.write_lines(tmp_path, ["t,u,y"]))

    def test_missing_header(self, tmp_path):
        with pytest.raises(MissingHeader):
            ingest_csv(self.write_lines(tmp_path, ["time,u,y", "0,1,2", "1,1,2"]))
        with pytest.raises(MissingHeader):
            ingest_csv(
                self.write_lines(tmp_path, ["t,u,y,z", "0,1,2,3", "1,1,2,3"])
            )

    def test_non_uniform_sampling(self, tmp_path):
        with pytest.raises(NonUniformSampling):
            ingest_csv(self.write_lines(tmp_path, ["t,u,y", "0,1,2"]))
        with pytest.raises(NonUniformSampling):
            ingest_csv(
                self.write_lines(tmp_path, ["t,u,y", "0,1,2", "1,1,2", "1,1,2"])
            )
        with pytest.raises(NonUniformSampling):
            ingest_csv(
                self.write_lines(tmp_path, ["t,u,y", "0,1,2", "1,1,2", "2.5,1,2"])
            )

    def test_non_finite_value_reports_row(self, tmp_path):
        path = self.write_lines(
            tmp_path, ["t,u,y", "0,1,2", "1,1,nan", "2,1,2"]
        )
        with pytest.raises(NonFiniteValue) as err:
            ingest_csv(path)
        assert err.value.row == 1
        with pytest.raises(NonFiniteValue):
            ingest_csv(self.write_lines(tmp_path, ["t,u,y", "0,1,abc", "1,1,2"]))
        with pytest.raises(NonFiniteValue):
            ingest_csv(self.write_lines(tmp_path, ["t,u,y", "0,1", "1,1,2"]))

    def test_tiny_time_jitter_tolerated(self, tmp_path):
        path = self.write_lines(
            tmp_path,
            ["t,u,y", "0.0,1,2", "0.1,1,2", repr(0.2 + 1e-17) + ",1,2"],
        )
        assert ingest_csv(path).T == 3

    def test_chain_csv_roundtrip(self, tmp_path):
        path = tmp_path / "chain.csv"
        draws = np.array([[0.5, -1.25], [2.0, 0.0625]])
        write_chain_csv(path, ["a1", "b0"], draws, np.array([-3.5, -4.0]),
                        np.array([True, False]))
        assert path.read_text().splitlines()[0] == "a1,b0,log_density,accepted"
        names, back, lp, acc = read_chain_csv(path)
        assert names == ["a1", "b0"]
        assert np.array_equal(back, draws)
        assert np.array_equal(lp, [-3.5, -4.0])
        assert acc.tolist() == [1, 0]


class TestRunExperiment:
    def test_artifacts_and_manifest_match_directory(self, tmp_path):
        cfg = parse_config(make_config())
        out = tmp_path / "run"
        manifest = run_experiment(cfg, str(out))
        on_disk = sorted(os.listdir(out))
        assert manifest["artifacts"] == on_disk
        assert {"data.csv", "chain.csv", "space.json", "summary.json",
                "fit.json", "manifest.json"} == set(on_disk)
        saved = read_json(out / "manifest.json")
        assert saved["artifacts"] == on_disk
        assert saved["chains"][0]["stream"] == 1

    def test_byte_identical_reruns(self, tmp_path):
        cfg = parse_config(make_config())
        run_experiment(cfg, str(tmp_path / "a"))
        run_experiment(cfg, str(tmp_path / "b"))
        for name in ("chain.csv", "data.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        run_experiment(parse_config(make_config(seed=1)), str(tmp_path / "a"))
        run_experiment(parse_config(make_config(seed=2)), str(tmp_path / "b"))
        assert (tmp_path / "a" / "chain.csv").read_bytes() != (
            tmp_path / "b" / "chain.csv"
        ).read_bytes()

    def test_multiple_chains_pool_draws(self, tmp_path):
        cfg = parse_config(make_config(chains=2))
        out = tmp_path / "run"
        manifest = run_experiment(cfg, str(out))
        assert (out / "chain.csv").exists() and (out / "chain_1.csv").exists()
        assert [c["stream"] for c in manifest["chains"]] == [1, 2]
        summary = read_json(out / "summary.json")
        assert summary["n_draws"] == 2 * 40
        _, d0, _, _ = read_chain_csv(out / "chain.csv")
        _, d1, _, _ = read_chain_csv(out / "chain_1.csv")
        assert not np.array_equal(d0, d1)

    def test_thinning(self, tmp_path):
        cfg = parse_config(make_config())
        out = tmp_path / "run"
        run_experiment(cfg, str(out), thin=4)
        _, draws, _, _ = read_chain_csv(out / "chain.csv")
        assert draws.shape[0] == 10
        assert read_json(out / "summary.json")["thin"] == 4
        with pytest.raises(ConstraintViolation):
            run_experiment(cfg, str(tmp_path / "bad"), thin=0)

    def test_failure_cleans_partial_outputs(self, tmp_path, monkeypatch):
        import hmc_sysid.cli.runner as runner_mod

        def explode(*args, **kwargs):
            raise RuntimeError("chain lost")

        monkeypatch.setattr(runner_mod, "run_chain", explode)
        out = tmp_path / "run"
        with pytest.raises(RuntimeError):
            run_experiment(parse_config(make_config()), str(out))
        assert not out.exists()

    def test_failure_preserves_foreign_files(self, tmp_path, monkeypatch):
        import hmc_sysid.cli.runner as runner_mod

        out = tmp_path / "run"
        out.mkdir()
        (out / "keep.txt").write_text("mine")
        monkeypatch.setattr(
            runner_mod, "run_chain",
            lambda *a, **k: (_ for _ in ()).throw(RuntimeError("chain lost")),
        )
        with pytest.raises(RuntimeError):
            run_experiment(parse_config(make_config()), str(out))
        assert (out / "keep.txt").read_text() == "mine"
        assert sorted(os.listdir(out)) == ["keep.txt"]

    def test_file_backed_fit(self, tmp_path):
        sim_dir = tmp_path / "sim"
        simulate_only(parse_config(make_config()), str(sim_dir))
        raw = make_config(data={"file": str(sim_dir / "data.csv")})
        out = tmp_path / "fit"
        manifest = run_experiment(parse_config(raw), str(out))
        assert "data.csv" not in manifest["artifacts"]
        assert (out / "chain.csv").exists()

    def test_empty_data_file_rejected_before_sampling(self, tmp_path, monkeypatch):
        import hmc_sysid.cli.runner as runner_mod

        empty = tmp_path / "empty.csv"
        empty.write_text("")
        called = []
        real = runner_mod.run_chain
        monkeypatch.setattr(
            runner_mod, "run_chain",
            lambda *a, **k: called.append(1) or real(*a, **k),
        )
        cfg = parse_config(make_config(data={"file": str(empty)}))
        with pytest.raises(ConstraintViolation):
            run_experiment(cfg, str(tmp_path / "out"))
        assert called == []
        assert not (tmp_path / "out").exists()

    def test_pendulum_requires_full_estimation_window(self, tmp_path):
        raw = json.loads(preset_text("pendulum_sim"))
        raw["data"]["simulate"]["T"] = 30
        raw["split"] = 0.5
        with pytest.raises(ConstraintViolation, match="split"):
            run_experiment(parse_config(raw), str(tmp_path / "out"))
        assert not (tmp_path / "out").exists()


class TestMainEntry:
    def write_config(self, tmp_path, raw):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(raw))
        return str(path)

    def test_simulate_and_fit_pipeline(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path, make_config())
        out = str(tmp_path / "run")
        assert main(["simulate", "--config", cfg_path, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "data.csv"))

        assert main(["fit", "--config", cfg_path, "--out", out,
                     "--chains", "2", "--thin", "2"]) == 0
        assert os.path.exists(os.path.join(out, "chain_1.csv"))
        _, draws, _, _ = read_chain_csv(os.path.join(out, "chain.csv"))
        assert draws.shape[0] == 20
        assert "fit complete" in capsys.readouterr().out

    def test_diagnose_and_freqresp(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path, make_config())
        out = str(tmp_path / "run")
        assert main(["fit", "--config", cfg_path, "--out", out]) == 0
        capsys.readouterr()

        chain = os.path.join(out, "chain.csv")
        space = os.path.join(out, "space.json")
        assert main(["diagnose", "--chain", chain, "--space", space]) == 0
        report = json.loads(capsys.readouterr().out)
        assert "acceptance_rate" in report
        assert {p["name"] for p in report["parameters"]} == {
            "a1", "a2", "b0", "b1", "b2", "sigma_e",
        }

        resp_path = os.path.join(out, "freqresp.json")
        assert main(["freqresp", "--chain", chain, "--model", space,
                     "--out", resp_path]) == 0
        resp = read_json(resp_path)
        assert set(resp) == {"omega", "mean", "draws", "n_excluded"}
        assert len(resp["mean"]) == len(resp["omega"])

    def test_config_errors_exit_2(self, tmp_path, capsys):
        bad = make_config(model={**BASE["model"], "n_q": 3})
        cfg_path = self.write_config(tmp_path, bad)
        assert main(["simulate", "--config", cfg_path,
                     "--out", str(tmp_path / "o")]) == 2
        assert "model.n_q" in capsys.readouterr().err

        assert main(["simulate", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_data_errors_exit_2(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        cfg_path = self.write_config(
            tmp_path, make_config(data={"file": str(empty)})
        )
        assert main(["fit", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 2

    def test_runtime_errors_exit_3(self, tmp_path, monkeypatch, capsys):
        import importlib

        # the package re-exports the main() function under the module's name
        main_mod = importlib.import_module("hmc_sysid.cli.main")
        monkeypatch.setattr(
            main_mod, "run_experiment",
            lambda *a, **k: (_ for _ in ()).throw(RuntimeError("sampler died")),
        )
        cfg_path = self.write_config(tmp_path, make_config())
        assert main(["fit", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 3
        assert "sampler died" in capsys.readouterr().err

    def test_env_seed_override(self, tmp_path, monkeypatch):
        cfg_path = self.write_config(tmp_path, make_config())
        main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "a")])
        monkeypatch.setenv("HMC_SYSID_SEED", "999")
        main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "data.csv").read_bytes()
        b = (tmp_path / "b" / "data.csv").read_bytes()
        assert a != b

        monkeypatch.setenv("HMC_SYSID_SEED", "not-a-number")
        assert main(["simulate", "--config", cfg_path,
                     "--out", str(tmp_path / "c")]) == 2

    def test_invalid_chain_flag(self, tmp_path):
        cfg_path = self.write_config(tmp_path, make_config())
        assert main(["fit", "--config", cfg_path, "--out", str(tmp_path / "o"),
                     "--chains", "0"]) == 2


def shrink_for_test(name):
    raw = json.loads(preset_text(name))
    raw["sampler"]["iterations"] = 40
    raw["sampler"]["warmup"] = 20
    raw["chains"] = 1
    if name == "pendulum_sim":
        raw["data"]["simulate"]["T"] = 40
        raw["sampler"]["max_steps"] = 16
    else:
        raw["data"]["simulate"]["T"] = 160
        if raw.get("split", 1.0) < 1.0:
            raw["split"] = 0.75
    return parse_config(raw)


class TestAssembledGradients:
    @pytest.mark.parametrize("name", sorted(PRESET_NAMES))
    def test_analytic_gradient_matches_fd(self, name):
        from hmc_sysid.cli.assemble import assemble_target, simulate_dataset
        from hmc_sysid.numerics import RngStream, fd_gradient

        cfg = shrink_for_test(name)
        data, _ = simulate_dataset(cfg, cfg.seed)
        data_est, _ = data.split(cfg.split)
        target, space = assemble_target(cfg, data_est)
        rng = RngStream(999, 0)
        for _ in range(5):
            zeta = 0.05 * rng.normal(space.dim)
            if name == "pendulum_sim":
                # park the log parameters near the prior center, where the
                # state trajectory prior is well conditioned
                zeta[:6] += np.array(cfg.priors["params"].loc)
            lp, grad = target.value_and_grad(zeta)
            assert np.isfinite(lp)
            fd = fd_gradient(target.log_density, zeta, h=1e-6)
            scale = np.maximum(np.abs(grad), np.maximum(np.abs(fd), 1.0))
            assert np.max(np.abs(grad - fd) / scale) < 1e-5


class TestPresets:
    def test_names_and_parsing(self):
        assert set(PRESET_NAMES) == {
            "arx_known_order",
            "arx_order10_gaussian",
            "arx_order10_laplace",
            "arx_order10_horseshoe",
            "oe_order10_horseshoe",
            "arx_student_t",
            "pendulum_sim",
        }
        for name in PRESET_NAMES:
            cfg = load_preset(name)
            canon = serialize(cfg)
            assert parse_config(canon) == cfg

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            load_preset("nonexistent")

    @pytest.mark.parametrize("name", sorted(PRESET_NAMES))
    def test_preset_runs_end_to_end(self, name, tmp_path):
        cfg = shrink_for_test(name)
        out = tmp_path / name
        manifest = run_experiment(cfg, str(out))
        assert manifest["artifacts"] == sorted(os.listdir(out))
        chain = manifest["chains"][0]
        assert 0.0 <= chain["acceptance_rate"] <= 1.0
        assert chain["evals_main"][0] + chain["evals_main"][1] > 0
        summary = read_json(out / "summary.json")
        assert all(np.isfinite(p["mean"]) for p in summary["parameters"])
