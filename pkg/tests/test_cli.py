import math

import pytest

from sheetlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSolve:
    def test_single_axis_quadratic(self, capsys):
        code, out, _ = run(capsys, "solve", "--kind", "btbs", "--f", "quadratic",
                           "--n", "1", "--d", "1", "--t", "1", "--x", "0")
        assert code == 0
        value = float(out.split("value=")[1])
        assert value == pytest.approx(0.7978845608, abs=1e-8)

    def test_isltbs_requires_beta(self, capsys):
        code, _, err = run(capsys, "solve", "--kind", "isltbs", "--f", "quadratic",
                           "--n", "1", "--d", "1", "--t", "1", "--x", "0")
        assert code == 2
        assert err.startswith("error: config:")

    def test_lattice_csv(self, capsys, tmp_path):
        out_path = tmp_path / "field.csv"
        code, out, _ = run(capsys, "solve", "--kind", "btbs", "--f", "quadratic",
                           "--n", "1", "--d", "1", "--t", "1", "--x", "0",
                           "--t-grid", "0,1,8", "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[0].startswith("# sheetlab ") and "config-hash=" in lines[0]
        assert lines[1] == "t1,x1,value"
        assert len(lines) == 11


class TestMoments:
    def test_closed_form(self, capsys):
        code, out, _ = run(capsys, "moments", "--beta", "1/2", "--k", "1",
                           "--route", "closed-form")
        assert code == 0
        assert float(out.split("value=")[1]) == pytest.approx(1.1283791671, abs=1e-9)

    def test_domain_failure_is_exit_3(self, capsys):
        code, _, err = run(capsys, "moments", "--beta", "1/2", "--k", "-2",
                           "--route", "closed-form")
        assert code == 3
        assert err.startswith("error: DomainError:")


class TestResidual:
    def test_half_fractional_summary(self, capsys):
        code, out, _ = run(capsys, "residual", "--system", "half-fractional",
                           "--kind", "btbs", "--f", "quadratic", "--n", "1",
                           "--tau", "0.002", "--x-steps", "64")
        assert code == 0
        inf_norm = float(out.split("inf_norm=")[1].split()[0])
        assert inf_norm < 5e-3

    def test_report_csv(self, capsys, tmp_path):
        out_path = tmp_path / "r.csv"
        pp_path = tmp_path / "pp.csv"
        code, _, _ = run(capsys, "residual", "--system", "fourth-order", "--kind", "btbs",
                         "--f", "quadratic", "--n", "1", "--tau", "0.005",
                         "--x-steps", "32", "--out", str(out_path),
                         "--per-point", str(pp_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[1] == "system,j,inf_norm,l2_norm,grid_desc"
        assert lines[2].startswith("fourth-order,1,")
        pp = pp_path.read_text().splitlines()
        assert pp[1] == "tj,x,residual"
        assert len(pp) > 10

    def test_density_pde(self, capsys):
        code, out, _ = run(capsys, "residual", "--system", "density-pde", "--beta", "1/2",
                           "--t-min", "0.5", "--t-max", "2.0", "--tau", "0.01",
                           "--x-min", "0.2", "--x-max", "3.0", "--x-steps", "128")
        assert code == 0
        assert float(out.split("inf_norm=")[1].split()[0]) < 1e-3


class TestEquivalence:
    def test_trivial_case(self, capsys):
        code, out, _ = run(capsys, "equivalence", "--variant", "btbs", "--f", "quadratic",
                           "--n", "2", "--t-frozen", "1.0", "--tau", "0.002",
                           "--x-steps", "64")
        assert code == 0
        assert float(out.split("inf_norm=")[1].split()[0]) < 1e-6


class TestConfigFile:
    def test_file_values_used(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("kind = btbs\nf = quadratic\nn = 1\nd = 1\nt = 1.0\nx = 0.0\n")
        code, out, _ = run(capsys, "solve", "--config", str(cfg))
        assert code == 0
        assert float(out.split("value=")[1]) == pytest.approx(0.7978845608, abs=1e-8)

    def test_flags_win_over_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("kind = btbs\nf = quadratic\nn = 1\nd = 1\nt = 1.0\nx = 0.0\n")
        code, out, _ = run(capsys, "solve", "--config", str(cfg), "--x", "0.5")
        assert code == 0
        assert float(out.split("value=")[1]) == pytest.approx(0.25 + 0.7978845608, abs=1e-8)

    def test_unknown_key_rejected(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        code, _, err = run(capsys, "solve", "--config", str(cfg))
        assert code == 2
        assert "bogus" in err


class TestDeterminism:
    def test_identical_runs_identical_bytes(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["solve", "--kind", "btbs", "--f", "quadratic", "--n", "1", "--d", "1",
                "--t", "1", "--x", "0", "--t-grid", "0,1,16"]
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_mc_seeded_reproducible(self, capsys):
        argv = ["mc-compare", "--kind", "btbs", "--f", "quadratic", "--n", "1", "--d", "1",
                "--t", "1", "--x", "2", "--samples", "50000", "--seed", "9"]
        code1, out1, _ = run(capsys, *argv)
        code2, out2, _ = run(capsys, *argv)
        assert code1 == code2 == 0
        assert out1 == out2
        gap = float(out1.split("gap=")[1])
        stderr = float(out1.split("stderr=")[1].split()[0])
        assert gap <= 3.0 * stderr + 1e-5
