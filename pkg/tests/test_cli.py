import csv
import json

import pytest

from barycentric_ot import cli
from barycentric_ot.cli import EXIT_INPUT, EXIT_NEGATIVE, EXIT_NOT_CONVERGED, EXIT_OK, main
from barycentric_ot.exceptions import DegeneratePotentials, OrderViolated


@pytest.fixture
def two_atom_files(write_csv):
    return (
        write_csv("mu.csv", [[0.0], [1.0]], [0.5, 0.5]),
        write_csv("nu.csv", [[0.0], [2.0]], [0.5, 0.5]),
    )


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_project_two_atom_example(capsys, two_atom_files):
    mu, nu = two_atom_files
    code, out, _ = run(capsys, "project", "--mu", mu, "--nu", nu)
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["value"] == pytest.approx(0.25, abs=1e-6)
    assert payload["converged"] is True
    assert sorted(p[0] for p in payload["mu_bar"]["points"]) == pytest.approx([0.5, 1.5], abs=1e-5)
    assert abs(payload["dual_gap"]) <= 1e-6
    assert payload["dual"]["certified"] is True
    assert payload["checks"]["c2_monotone"]["passed"] is True
    assert payload["checks"]["lipschitz"]["passed"] is True
    assert payload["checks"]["submartingale"]["passed"] is True
    assert len(payload["chain_plan"]) == 2


def test_project_identical_measures(capsys, write_csv):
    mu = write_csv("mu.csv", [[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]], [0.2, 0.3, 0.5])
    code, out, _ = run(capsys, "project", "--mu", mu, "--nu", mu, "--tol", "1e-12")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["value"] == pytest.approx(0.0, abs=1e-9)
    assert payload["mu_bar"]["weights"] == pytest.approx([0.2, 0.3, 0.5])


def test_truncated_csv_is_an_input_error(capsys, tmp_path, write_csv):
    broken = tmp_path / "broken.csv"
    broken.write_text("x0,weight\n0.0,0.5\n1.0\n", encoding="utf-8")
    nu = write_csv("nu.csv", [[0.0]], [1.0])
    code, _, err = run(capsys, "project", "--mu", str(broken), "--nu", nu)
    assert code == EXIT_INPUT
    assert "DimensionMismatch" in err


def test_missing_file_is_an_input_error(capsys, tmp_path):
    missing = str(tmp_path / "absent.csv")
    code, _, err = run(capsys, "solve", "--mu", missing, "--nu", missing)
    assert code == EXIT_INPUT
    assert "FileNotFoundError" in err


@pytest.mark.parametrize("tol", ["0", "-1e-3"])
def test_nonpositive_tolerance_is_rejected(capsys, two_atom_files, tol):
    mu, nu = two_atom_files
    code, _, err = run(capsys, "solve", "--mu", mu, "--nu", nu, "--tol", tol)
    assert code == EXIT_INPUT
    assert "InvalidArgument" in err


def test_check_order_exit_codes(capsys, write_csv):
    dirac = write_csv("dirac.csv", [[0.0]], [1.0])
    shifted = write_csv("shifted.csv", [[0.5]], [1.0])
    pair = write_csv("pair.csv", [[-1.0], [1.0]], [0.5, 0.5])
    plane = write_csv("plane.csv", [[0.0, 0.0], [1.0, 1.0]], [0.5, 0.5])

    code, out, _ = run(capsys, "check-order", "--mu", dirac, "--nu", pair)
    assert code == EXIT_OK
    assert json.loads(out)["holds"] is True

    code, out, _ = run(capsys, "check-order", "--mu", shifted, "--nu", pair)
    assert code == EXIT_NEGATIVE
    assert json.loads(out)["violation"]["amount"] > 0.0

    code, _, err = run(capsys, "check-order", "--mu", plane, "--nu", plane, "--relation", "icx")
    assert code == EXIT_INPUT
    assert "UnsupportedDimension" in err


def test_plot_data_from_solution_file(capsys, tmp_path, two_atom_files):
    mu, nu = two_atom_files
    result = tmp_path / "result.json"
    assert main(["project", "--mu", mu, "--nu", nu, "-o", str(result)]) == EXIT_OK

    code, out, _ = run(capsys, "plot-data", "--solution", str(result))
    assert code == EXIT_OK
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["kind", "x0", "b0", "weight"]
    arrows = [row for row in rows[1:] if row[0] == "arrow"]
    atoms = [row for row in rows[1:] if row[0] == "atom"]
    assert len(arrows) == 2
    assert len(atoms) == 2
    assert float(arrows[0][1]) == 0.0
    assert float(arrows[0][2]) == pytest.approx(0.5, abs=1e-5)


def test_plot_data_rejects_empty_solution(capsys, tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("", encoding="utf-8")
    code, _, err = run(capsys, "plot-data", "--solution", str(empty))
    assert code == EXIT_INPUT
    assert "MalformedFile" in err


def test_outputs_are_reproducible(tmp_path, two_atom_files):
    mu, nu = two_atom_files
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    assert main(["project", "--mu", mu, "--nu", nu, "-o", str(first)]) == EXIT_OK
    assert main(["project", "--mu", mu, "--nu", nu, "-o", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_w2_command(capsys, two_atom_files):
    mu, nu = two_atom_files
    code, out, _ = run(capsys, "w2", "--mu", mu, "--nu", nu)
    assert code == EXIT_OK
    assert json.loads(out)["value"] == pytest.approx(0.5)


def test_lambda_command(capsys, write_csv):
    mu = write_csv("mu.csv", [[0.0]], [1.0])
    nu = write_csv("nu.csv", [[1.0]], [1.0])
    code, out, _ = run(capsys, "lambda", "--mu", mu, "--nu", nu, "--lambda", "2")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["value"] == pytest.approx(2.0)
    assert payload["constant"] == pytest.approx(1.0)

    code, out, _ = run(capsys, "lambda", "--mu", mu, "--nu", nu, "--lam", "2", "--format", "csv")
    assert code == EXIT_OK
    assert out == "1.0\n"


def test_lambda_requires_a_value(two_atom_files):
    mu, nu = two_atom_files
    with pytest.raises(SystemExit):
        main(["lambda", "--mu", mu, "--nu", nu])


def test_simplex_command(capsys, write_csv):
    mu = write_csv("mu.csv", [[-2.0], [4.0]], [0.5, 0.5])
    nu = write_csv("nu.csv", [[0.0], [2.0]], [0.5, 0.5])
    code, out, _ = run(capsys, "simplex", "--mu", mu, "--simplex", nu)
    assert code == EXIT_OK
    assert json.loads(out)["value"] == pytest.approx(4.0)


def test_monotone_check_and_compare(capsys, two_atom_files):
    mu, nu = two_atom_files
    code, out, _ = run(capsys, "monotone-check", "--mu", mu, "--nu", nu)
    assert code == EXIT_OK
    assert json.loads(out)["c2_monotone"]["passed"] is True

    code, out, _ = run(capsys, "compare", "--mu", mu, "--nu", nu)
    assert code == EXIT_NEGATIVE
    payload = json.loads(out)
    assert payload["w2_squared"] == pytest.approx(0.5)
    assert payload["barycentric_value"] == pytest.approx(0.25, abs=1e-6)


def test_json_measure_files(capsys, tmp_path):
    mu = tmp_path / "mu.json"
    mu.write_text(json.dumps({"dim": 1, "points": [[0.0], [1.0]], "weights": [0.5, 0.5]}), encoding="utf-8")
    nu = tmp_path / "nu.json"
    nu.write_text(json.dumps({"dim": 1, "points": [[0.0], [2.0]], "weights": [0.5, 0.5]}), encoding="utf-8")
    code, out, _ = run(capsys, "solve", "--mu", str(mu), "--nu", str(nu))
    assert code == EXIT_OK
    assert json.loads(out)["value"] == pytest.approx(0.25, abs=1e-6)

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 1, "points": [[0.0]]}), encoding="utf-8")
    code, _, err = run(capsys, "solve", "--mu", str(bad), "--nu", str(nu))
    assert code == EXIT_INPUT
    assert "MalformedFile" in err


def test_corrupt_first_row_is_an_input_error(capsys, tmp_path, write_csv):
    corrupt = tmp_path / "corrupt.csv"
    corrupt.write_text("0.0,0.5x\n1.0,0.5\n", encoding="utf-8")
    pair = write_csv("pair.csv", [[-1.0], [1.0]], [0.5, 0.5])
    code, _, err = run(capsys, "check-order", "--mu", str(corrupt), "--nu", pair)
    assert code == EXIT_INPUT
    assert "MalformedFile" in err


def test_degenerate_potentials_mean_the_solve_failed(capsys, monkeypatch, two_atom_files):
    def broken(solution):
        raise DegeneratePotentials("subgradient condition violated by 1.0e-01")

    monkeypatch.setattr(cli, "build_dual_potential", broken)
    mu, nu = two_atom_files
    code, _, err = run(capsys, "project", "--mu", mu, "--nu", nu)
    assert code == EXIT_NOT_CONVERGED
    assert "DegeneratePotentials" in err


def test_failed_martingale_completion_means_the_solve_failed(capsys, monkeypatch, two_atom_files):
    def broken(mu_bar, nu):
        raise OrderViolated("projection is not below nu in convex order")

    monkeypatch.setattr(cli, "build_martingale_coupling", broken)
    mu, nu = two_atom_files
    code, _, _ = run(capsys, "project", "--mu", mu, "--nu", nu)
    assert code == EXIT_NOT_CONVERGED


@pytest.mark.parametrize("command", ["project", "solve", "w2", "check-order"])
def test_format_is_only_accepted_where_it_applies(capsys, two_atom_files, command):
    mu, nu = two_atom_files
    with pytest.raises(SystemExit) as excinfo:
        main([command, "--mu", mu, "--nu", nu, "--format", "csv"])
    assert excinfo.value.code == EXIT_INPUT
