import subprocess
import sys

import pytest

from rishwi.cli import main
from rishwi.experiments import COLUMNS, read_csv

TINY = "[system]\nM = 4\nN = 4\nK = 2\n[ga]\nmax_iters = 10\n"


@pytest.fixture
def scen(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return str(path)


def test_validate_passes(scen, tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert main(["validate", "--scenario", scen, "--mc-samples", "20000", "--out", str(out)]) == 0
    text = out.read_text()
    assert "rate(moment-ratio)" in text and "FAIL" not in text
    assert "OK" in capsys.readouterr().err


def test_validate_failure_exit_code(scen, capsys):
    # a zero tolerance cannot be met by a noisy estimate
    assert main(["validate", "--scenario", scen, "--mc-samples", "2000", "--z-max", "0"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_sweep_writes_csv(scen, tmp_path):
    out = tmp_path / "s.csv"
    code = main(["sweep", "--scenario", scen, "--var", "k_hwi", "--values", "0.1,0", "--seed", "4",
                 "--random-designs", "5", "--out", str(out)])
    assert code == 0
    meta, rows = read_csv(out)
    assert meta["seed"] == "4" and list(rows[0]) == list(COLUMNS)
    assert [r["value"] for r in rows] == ["0.0"] * 3 + ["0.1"] * 3
    again = tmp_path / "s2.csv"
    main(["sweep", "--scenario", scen, "--var", "k_hwi", "--values", "0,0.1", "--seed", "4",
          "--random-designs", "5", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_sweep_with_monte_carlo(scen, capsys):
    assert main(["sweep", "--scenario", scen, "--var", "N", "--values", "4", "--arms", "optimized",
                 "--mc-samples", "2000"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[-1].split(",")[COLUMNS.index("mc_samples")] == "2000"


def test_non_square_sweep_is_config_error(scen, capsys):
    assert main(["sweep", "--scenario", scen, "--var", "N", "--values", "4,10"]) == 2
    assert "perfect square" in capsys.readouterr().err


def test_parse_error_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\nM = 4\nN == x\n")
    assert main(["optimize", "--scenario", str(bad)]) == 2
    assert f"{bad}:3:" in capsys.readouterr().err


def test_missing_scenario(tmp_path, capsys):
    assert main(["optimize", "--scenario", str(tmp_path / "nope.ini")]) == 2


def test_optimize(scen, capsys):
    assert main(["optimize", "--scenario", scen, "--objective", "min", "--mc-samples", "0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert sum(ln.startswith("theta,") for ln in lines) == 4
    assert any(ln.startswith("fitness,min,") for ln in lines)


def test_asymptotic(scen, capsys):
    assert main(["asymptotic", "--scenario", scen, "--M-values", "64,256"]) == 0
    rows = [ln.split(",") for ln in capsys.readouterr().out.splitlines()[2:]]
    gaps = [abs(float(r[4])) for r in rows if r[1] == "0"]
    assert gaps[1] < gaps[0]


def test_asymptotic_rejects_bad_m(scen):
    assert main(["asymptotic", "--scenario", scen, "--M-values", "2.5"]) == 2


def test_argparse_errors_exit_2(scen):
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--scenario", scen, "--var", "Q", "--values", "1"])
    assert info.value.code == 2


def test_module_entry_point(scen):
    proc = subprocess.run([sys.executable, "-m", "rishwi.cli", "asymptotic", "--scenario", scen,
                           "--M-values", "64"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.count("\n") == 4
