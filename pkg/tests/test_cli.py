"""Command line behavior: exit codes, payload determinism, manifests."""

import json

import pytest

from dilutegas.cli import main


def run(argv):
    return main(argv)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestExitCodes:
    def test_model_check_demo(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert run(["model", "check", "--model", "demo:two-level"]) == 0
        assert "model OK" in capsys.readouterr().out

    def test_missing_model_file(self, tmp_path, capsys):
        code = run(["model", "check", "--model", str(tmp_path / "nope.json"),
                    "--manifest", str(tmp_path / "m.json")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_demo(self, tmp_path, capsys):
        code = run(["model", "check", "--model", "demo:nope",
                    "--manifest", str(tmp_path / "m.json")])
        assert code == 2
        assert "unknown demo" in capsys.readouterr().err

    def test_bad_usage_is_exit_2(self, capsys):
        assert run(["smatrix"]) == 2
        capsys.readouterr()

    def test_help_is_exit_0(self, capsys):
        assert run(["--help"]) == 0
        capsys.readouterr()

    def test_invalid_pure_state_index(self, tmp_path, capsys):
        code = run(["evolve", "--model", "demo:two-level", "--rho0", "pure:5",
                    "--t", "1.0", "--dt", "0.5",
                    "--out", str(tmp_path / "e.csv")])
        assert code == 2
        assert "pure state index" in capsys.readouterr().err


class TestSmatrix:
    def test_null_coupling_blocks_are_exactly_unitary(self, tmp_path, capsys):
        out = tmp_path / "sm.csv"
        assert run(["smatrix", "--model", "demo:null-coupling",
                    "--out", str(out)]) == 0
        header, rows = read_csv(out)
        k = header.index("unit_defect")
        assert len(rows) == 16
        assert all(float(r[k]) == 0.0 for r in rows)
        assert "PASS" in capsys.readouterr().out

    def test_blocks_json_payload(self, tmp_path, capsys):
        out = tmp_path / "sm.csv"
        blocks = tmp_path / "blocks.json"
        assert run(["smatrix", "--model", "demo:degenerate-gram",
                    "--out", str(out), "--blocks-json", str(blocks)]) == 0
        capsys.readouterr()
        doc = json.loads(blocks.read_text())
        assert len(doc["bins"]) == 16
        assert all(b["degenerate"] for b in doc["bins"])

    def test_tolerance_drives_verdict(self, tmp_path, capsys):
        out = tmp_path / "sm.csv"
        code = run(["smatrix", "--model", "demo:two-level", "--out", str(out),
                    "--tol-unit", "1e-20"])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out


class TestEvolve:
    def test_trace_preserved_along_output(self, tmp_path, capsys):
        out = tmp_path / "ev.csv"
        assert run(["evolve", "--model", "demo:two-level", "--rho0", "pure:0",
                    "--t", "2.0", "--dt", "0.5", "--out", str(out)]) == 0
        capsys.readouterr()
        header, rows = read_csv(out)
        kt, ktr = header.index("t"), header.index("trace")
        assert float(rows[0][kt]) == 0.0
        assert float(rows[-1][kt]) == 2.0
        assert all(abs(float(r[ktr]) - 1.0) < 1e-10 for r in rows)

    def test_rho0_matrix_file(self, tmp_path, capsys):
        rho = tmp_path / "rho.json"
        rho.write_text(json.dumps([[[1.0, 0.0], [0.0, 0.0]],
                                   [[0.0, 0.0], [0.0, 0.0]]]))
        out = tmp_path / "ev.csv"
        assert run(["evolve", "--model", "demo:two-level",
                    "--rho0", str(rho), "--t", "1.0", "--dt", "1.0",
                    "--out", str(out)]) == 0
        capsys.readouterr()
        _, rows = read_csv(out)
        assert float(rows[0][1]) == 1.0


class TestTrajectories:
    def base(self, tmp_path, out_name, extra=()):
        out = tmp_path / out_name
        argv = ["trajectories", "--model", "demo:two-level",
                "--rho0", "pure:1", "--t-end", "2.0", "--n-traj", "40",
                "--seed", "11", "--points", "5", "--out", str(out)]
        argv.extend(extra)
        assert run(argv) == 0
        return out

    def test_payload_identical_across_runs(self, tmp_path, capsys):
        a = self.base(tmp_path, "a.csv")
        b = self.base(tmp_path, "b.csv")
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_payload_identical_across_thread_counts(self, tmp_path, capsys):
        a = self.base(tmp_path, "a.csv", ["--threads", "1"])
        b = self.base(tmp_path, "b.csv", ["--threads", "3"])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_picture_flag_changes_coherences_only(self, tmp_path, capsys):
        rho = tmp_path / "rho.json"
        rho.write_text(json.dumps([[[0.5, 0.0], [0.5, 0.0]],
                                   [[0.5, 0.0], [0.5, 0.0]]]))
        out_i = tmp_path / "i.csv"
        out_s = tmp_path / "s.csv"
        common = ["trajectories", "--model", "demo:two-level",
                  "--rho0", str(rho), "--t-end", "2.0", "--n-traj", "20",
                  "--seed", "3", "--points", "3"]
        assert run(common + ["--out", str(out_i)]) == 0
        assert run(common + ["--out", str(out_s),
                             "--schroedinger-picture"]) == 0
        capsys.readouterr()
        hi, ri = read_csv(out_i)
        hs, rs = read_csv(out_s)
        assert hi == hs
        k00 = hi.index("mean_re_00")
        k01 = hi.index("mean_re_01")
        for a, b in zip(ri[1:], rs[1:]):
            assert a[k00] == b[k00]
            assert a[k01] != b[k01]

    def test_meta_reports_rate_and_probabilities(self, tmp_path, capsys):
        out = self.base(tmp_path, "t.csv")
        capsys.readouterr()
        meta = json.loads((tmp_path / "t.csv.meta.json").read_text())
        assert meta["rate"] > 0
        assert meta["picture"] == "interaction"
        assert abs(sum(meta["bin_probabilities"]) - 1.0) < 1e-12


class TestCorrelators:
    def test_convergence_report(self, tmp_path, capsys):
        spec = tmp_path / "chan.json"
        spec.write_text(json.dumps({"factors": [[0, 1]]}))
        out = tmp_path / "corr.json"
        code = run(["correlators", "--model", "demo:two-level",
                    "--spec", str(spec), "--xis", "1e-1,1e-2,1e-3",
                    "--t", "0.0011938", "--out", str(out)])
        assert code == 0
        assert "PASS" in capsys.readouterr().out
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "PASS"
        assert doc["order"] == 1
        errs = doc["rel_errors"]
        assert errs[0] > errs[1] > errs[2]

    def test_bare_list_spec(self, tmp_path, capsys):
        spec = tmp_path / "chan.json"
        spec.write_text(json.dumps([[0, 1]]))
        out = tmp_path / "corr.json"
        assert run(["correlators", "--model", "demo:two-level",
                    "--spec", str(spec), "--xis", "1e-1,1e-2",
                    "--t", "0.0011938", "--out", str(out)]) == 0
        capsys.readouterr()

    def test_single_xi_rejected(self, tmp_path, capsys):
        spec = tmp_path / "chan.json"
        spec.write_text(json.dumps([[0, 1]]))
        code = run(["correlators", "--model", "demo:two-level",
                    "--spec", str(spec), "--xis", "1e-1",
                    "--t", "0.001", "--out", str(tmp_path / "c.json"),
                    "--manifest", str(tmp_path / "m.json")])
        assert code == 2
        assert "xi" in capsys.readouterr().err


class TestBatteries:
    def test_fock_verify_passes(self, tmp_path, capsys):
        out = tmp_path / "fock.json"
        assert run(["fock-verify", "--seed", "5", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "VERDICT: PASS" in text
        doc = json.loads(out.read_text())
        assert all(c["pass"] for c in doc["checks"])
        assert doc["space"] == {"modes": 2, "n_max": 8}

    def test_verify_all_on_demo(self, tmp_path, capsys):
        out = tmp_path / "all.json"
        assert run(["verify-all", "--model", "demo:two-level",
                    "--seed", "1", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "VERDICT: PASS" in text
        assert "FAIL" not in text
        doc = json.loads(out.read_text())
        names = [c["name"] for c in doc["checks"]]
        assert "smatrix_unitarity" in names
        assert "poisson_series_semigroup" in names
        assert "fock_ccr_exact_integer" in names


class TestManifest:
    def args(self, tmp_path, out_name):
        return ["smatrix", "--model", "demo:two-level",
                "--out", str(tmp_path / out_name)]

    def test_manifest_written_next_to_output(self, tmp_path, capsys):
        assert run(self.args(tmp_path, "sm.csv")) == 0
        capsys.readouterr()
        doc = json.loads((tmp_path / "sm.csv.manifest.json").read_text())
        assert doc["command"] == "smatrix"
        assert doc["exit_code"] == 0
        assert set(doc["timing"]) == {"timestamp_utc", "wall_time_s"}
        assert doc["inputs"]["model"]["source"] == "demo:two-level"
        assert len(doc["inputs"]["model"]["sha256"]) == 64
        for key in ("dilutegas", "numpy", "scipy", "python"):
            assert key in doc["versions"]

    def test_manifests_match_outside_timing_block(self, tmp_path, capsys):
        assert run(self.args(tmp_path, "sm.csv")) == 0
        first = json.loads((tmp_path / "sm.csv.manifest.json").read_text())
        assert run(self.args(tmp_path, "sm.csv")) == 0
        second = json.loads((tmp_path / "sm.csv.manifest.json").read_text())
        capsys.readouterr()
        first.pop("timing")
        second.pop("timing")
        assert first == second

    def test_error_recorded_in_manifest(self, tmp_path, capsys):
        man = tmp_path / "m.json"
        code = run(["model", "check", "--model", "demo:nope",
                    "--manifest", str(man)])
        capsys.readouterr()
        assert code == 2
        doc = json.loads(man.read_text())
        assert doc["exit_code"] == 2
        assert "unknown demo" in doc["error"]

    def test_model_file_hash_matches_bytes(self, tmp_path, capsys):
        import hashlib

        from dilutegas.modelfile import demo_document
        p = tmp_path / "m.json"
        p.write_text(json.dumps(demo_document("two-level")))
        out = tmp_path / "sm.csv"
        assert run(["smatrix", "--model", str(p), "--out", str(out)]) == 0
        capsys.readouterr()
        doc = json.loads((tmp_path / "sm.csv.manifest.json").read_text())
        assert doc["inputs"]["model"]["sha256"] == hashlib.sha256(
            p.read_bytes()).hexdigest()
