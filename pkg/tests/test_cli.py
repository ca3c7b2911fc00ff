import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uqdiscord import cli, randgen
from uqdiscord.qcore import DensityOperator, PureState


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, state in {"bell": randgen.bell(), "product": randgen.product((2, 2)), "ghz": randgen.ghz(),
                        "werner": randgen.werner(0.7), "w": randgen.w_state()}.items():
        paths[name] = tmp_path / f"{name}.json"
        cli.write_state(paths[name], state)
    return paths


# ---- state files ----

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_state_file_round_trip_is_byte_identical(seed, pure):
    state = randgen.haar_pure((2, 3), seed) if pure else randgen.random_density((2, 2), 3, seed)
    text = cli.dump_state(state)
    again = cli.parse_state(text)
    assert cli.dump_state(again) == text
    ref = state.vector if pure else state.matrix
    got = again.vector if pure else again.matrix
    assert np.array_equal(ref, got)


def test_state_file_layout():
    obj = json.loads(cli.dump_state(randgen.bell()))
    assert obj["dims"] == [2, 2] and obj["labels"] == ["A", "B"] and obj["kind"] == "pure"
    assert len(obj["data"]) == 4 and len(obj["data"][0]) == 2
    obj = json.loads(cli.dump_state(randgen.werner(0.5)))
    assert obj["kind"] == "density"
    assert np.asarray(obj["data"]).shape == (4, 4, 2)


@pytest.mark.parametrize("text, fragment", [
    ('{"dims": [2], "labels": ["A"], "kind": "pure", "data": [[1, 0]]}', "shape"),
    ('{"dims": [2], "labels": ["A"], "kind": "pure", "data": [[1, 0], [1, 0]]}', "norm"),
    ('{"dims": [2], "labels": ["A", "B"], "kind": "pure", "data": [[1, 0], [0, 0]]}', "labels"),
    ('{"dims": [2], "labels": ["A"], "kind": "mixed", "data": [[1, 0], [0, 0]]}', "kind"),
    ('{"dims": [2], "labels": ["A"], "kind": "pure"}', "missing"),
    ('{"dims": [2], "labels": ["A"], "kind": "density", "data": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}', "trace"),
    ('{"dims": [2], "labels": ["A"], "kind": "density", "data": [[[0.5, 0], [0.2, 0]], [[0, 0], [0.5, 0]]]}',
     "Hermitian"),
    ('{"dims": [2], "labels": ["A"], "kind": "pure", "data": [["x", 0], [0, 0]]}', "pairs"),
    ('[1, 2]', "object"),
    ('{"dims": [2', "JSON"),
])
def test_malformed_state_files_name_the_problem(text, fragment):
    with pytest.raises(cli.StateFileError, match=fragment):
        cli.parse_state(text)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    cli.write_atomic(tmp_path / "a.csv", "x\n")
    cli.write_atomic(tmp_path / "a.csv", "y\n")
    assert (tmp_path / "a.csv").read_text() == "y\n"
    assert [p.name for p in tmp_path.iterdir()] == ["a.csv"]


def test_param_grid():
    g = cli.param_grid("0:1:0.1")
    assert len(g) == 11 and g[0] == 0 and g[-1] == 1
    assert np.all(np.diff(g) > 0)
    for bad in ("1:0:0.1", "0:1:0", "0:1"):
        with pytest.raises(Exception):
            cli.param_grid(bad)


# ---- compute ----

def test_compute_bell_uqd(files, capsys):
    code, out, _ = run(["compute", "--state", str(files["bell"]), "--measure", "uqd", "--measured", "B"], capsys)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(1.0, abs=1e-6)


def test_compute_product_discord_csv(files, capsys):
    code, out, _ = run(["compute", "--state", str(files["product"]), "--measure", "discord", "--format", "csv"],
                       capsys)
    assert code == 0
    row = next(csv.DictReader(out.splitlines()))
    assert float(row["value"]) == pytest.approx(0.0, abs=1e-6)
    assert row["converged"] == "true"


def test_compute_truncated_file(files, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(files["bell"].read_text()[:30])
    code, _, err = run(["compute", "--state", str(bad), "--measure", "uqd"], capsys)
    assert code == 1
    assert "JSON" in err


def test_compute_missing_file(tmp_path, capsys):
    code, _, err = run(["compute", "--state", str(tmp_path / "nope.json"), "--measure", "uqd"], capsys)
    assert code == 1


def test_compute_unknown_label(files, capsys):
    code, _, err = run(["compute", "--state", str(files["bell"]), "--measure", "cc", "--measured", "Q"], capsys)
    assert code == 1 and "Q" in err


def test_compute_unknown_measure_is_usage_error(files, capsys):
    code, _, _ = run(["compute", "--state", str(files["bell"]), "--measure", "magic"], capsys)
    assert code == 1


def test_compute_non_convergence_exit_code(files, capsys, monkeypatch):
    from uqdiscord import measures as ms

    def stub(rho, measured=None, config=None):
        return ms.MeasureResult(0.5, converged=False)

    monkeypatch.setitem(cli.COMPUTE_MEASURES, "cc", stub)
    code, out, _ = run(["compute", "--state", str(files["bell"]), "--measure", "cc"], capsys)
    assert code == 2
    assert json.loads(out)["converged"] is False


def test_compute_restarts_seed_and_outcomes(files, capsys):
    code, out, _ = run(["compute", "--state", str(files["werner"]), "--measure", "cc", "--restarts", "3",
                        "--seed", "4", "--outcomes", "3"], capsys)
    assert code in (0, 2)
    assert json.loads(out)["restarts"] == 3


def test_compute_eoa_on_ghz_pair(tmp_path, capsys):
    path = tmp_path / "ac.json"
    cli.write_state(path, randgen.ghz().reduce(("A", "C")))
    code, out, _ = run(["compute", "--state", str(path), "--measure", "eoa", "--measured", "A"], capsys)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(1.0, abs=1e-6)


# ---- verify ----

def test_verify_samples_zero_is_usage_error(capsys):
    code, _, _ = run(["verify", "--relation", "bgk", "--samples", "0", "--seed", "1"], capsys)
    assert code == 1


def test_verify_requires_seed(capsys):
    code, _, _ = run(["verify", "--relation", "bgk", "--samples", "2"], capsys)
    assert code == 1


def test_verify_unknown_relation(capsys):
    code, _, _ = run(["verify", "--relation", "nope", "--samples", "2", "--seed", "1"], capsys)
    assert code == 1


def test_verify_kw_on_ghz_file(files, tmp_path, capsys):
    report = tmp_path / "kw.csv"
    code, out, _ = run(["verify", "--relation", "kw", "--state", str(files["ghz"]), "--seed", "0",
                        "--report", str(report)], capsys)
    assert code == 0
    rows = list(csv.DictReader(report.open()))
    assert list(rows[0]) == cli.REPORT_HEADER
    assert abs(float(rows[0]["residual"])) <= 1e-3
    assert "holds=1" in out


def test_verify_sampled_bgk_report(tmp_path, capsys):
    report = tmp_path / "bgk.csv"
    code, out, _ = run(["verify", "--relation", "bgk", "--samples", "3", "--seed", "5", "--restarts", "8",
                        "--report", str(report)], capsys)
    assert code == 0
    rows = list(csv.DictReader(report.open()))
    assert [r["state_id"] for r in rows] == ["haar-5-0", "haar-5-1", "haar-5-2"]
    assert all(r["verdict"] == "holds" for r in rows)
    assert out.startswith("holds=3 violated=0 inconclusive=0")


def test_verify_json_report(tmp_path, capsys):
    report = tmp_path / "r.json"
    code, _, _ = run(["verify", "--relation", "tradeoff-sb", "--fixture", "ghz", "--seed", "0",
                      "--report", str(report)], capsys)
    assert code == 0
    rows = json.loads(report.read_text())
    assert rows[0]["check"] == "tradeoff-sb"


def test_verify_exit_code_flags_violations(capsys):
    # discord monogamy is not a proved relation, so the W violation does not fail the run
    code, out, _ = run(["verify", "--relation", "discord-monogamy", "--fixture", "w", "--seed", "0"], capsys)
    assert code == 0
    assert "violated=1" in out and "proved_violations=0" in out


def test_verify_reports_proved_violation(capsys, monkeypatch):
    from uqdiscord import relations

    def broken(psi, config=None, cache=None):
        return relations.RelationReport("bgk", 1.0, 0.0, 1e-3, "equality")

    monkeypatch.setitem(relations.CHECKS, "bgk", broken)
    code, out, _ = run(["verify", "--relation", "bgk", "--fixture", "ghz", "--seed", "0"], capsys)
    assert code == 2
    assert "proved_violations=1" in out


def test_verify_closed_form_relation_rejects_qutrits(capsys):
    code, _, err = run(["verify", "--relation", "kw", "--samples", "1", "--dims", "3,2,2", "--seed", "1"], capsys)
    assert code == 1


def test_verify_rejects_mixed_state_file(files, capsys):
    code, _, _ = run(["verify", "--relation", "bgk", "--state", str(files["werner"]), "--seed", "1"], capsys)
    assert code == 1


def test_verify_superadditivity(tmp_path, capsys):
    code, out, _ = run(["verify", "--relation", "superadditivity", "--samples", "1", "--dims", "2,2",
                        "--seed", "2"], capsys)
    assert code == 0 and "holds=1" in out


# ---- falsify ----

def test_falsify_with_fixtures(tmp_path, capsys):
    report = tmp_path / "f.csv"
    out_dir = tmp_path / "viol"
    code, out, _ = run(["falsify", "--inequality", "discord-monogamy", "--samples", "30", "--seed", "7",
                        "--report", str(report), "--out-dir", str(out_dir), "--include-fixtures"], capsys)
    assert code == 0
    rows = {r["state_id"]: r for r in csv.DictReader(report.open())}
    assert rows["w"]["verdict"] == "violated"
    assert rows["ghz"]["verdict"] == "holds" and float(rows["ghz"]["residual"]) < -0.5
    assert abs(float(rows["bell-product"]["residual"])) <= float(rows["bell-product"]["tolerance"])
    violators = sorted(p.stem for p in out_dir.iterdir())
    assert "w" in violators
    assert violators == sorted(k for k, r in rows.items() if r["verdict"] == "violated")
    # every serialized violator re-verifies through the file path
    for p in out_dir.iterdir():
        assert run(["verify", "--relation", "discord-monogamy", "--state", str(p), "--seed", "0"],
                   capsys)[1].find("violated=1") >= 0


def test_falsify_requires_seed(tmp_path, capsys):
    code, _, _ = run(["falsify", "--inequality", "discord-monogamy", "--samples", "3",
                      "--report", str(tmp_path / "f.csv")], capsys)
    assert code == 1


# ---- sweep ----

def test_werner_sweep(tmp_path, capsys):
    report = tmp_path / "s.csv"
    code, _, _ = run(["sweep", "--family", "werner", "--param", "0:1:0.1",
                      "--measures", "eof-closed,discord,uqd", "--report", str(report)], capsys)
    assert code == 0
    rows = list(csv.DictReader(report.open()))
    assert list(rows[0]) == cli.SWEEP_HEADER
    params = [float(r["param"]) for r in rows]
    assert params == sorted(params)
    eof = {float(r["param"]): float(r["value"]) for r in rows if r["measure"] == "eof-closed"}
    assert eof[0.0] == 0.0
    assert all((v > 0) == (p > 1 / 3) for p, v in eof.items())
    vals = [eof[p] for p in sorted(eof)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    disc = {float(r["param"]): float(r["value"]) for r in rows if r["measure"] == "discord"}
    assert disc[0.0] == pytest.approx(0.0, abs=1e-6)
    for r in rows:
        if r["measure"] == "uqd":
            v, mi, sb = float(r["value"]), float(r["mutual_information"]), float(r["s_b"])
            assert mi / 2 - 1e-4 <= v <= sb + 1e-4


def test_sweep_unknown_measure(tmp_path, capsys):
    code, _, _ = run(["sweep", "--family", "werner", "--param", "0:1:0.5", "--measures", "nope",
                      "--report", str(tmp_path / "s.csv")], capsys)
    assert code == 1


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "uqdiscord", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "compute" in out.stdout
