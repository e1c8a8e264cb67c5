import csv
import io
import json

import pytest

from brepmatch.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["generate", "--out", str(data), "--models", "4", "--variants", "1", "--seed", "3"]) == 0
    model = root / "m.ckpt"
    assert main(["train", "--data", str(data), "--out", str(model), "--epochs", "1", "--history", str(root / "h.json")]) == 0
    return root, data, model


def _pair(data):
    match = sorted((data / "matches").glob("*.json"))[0]
    mid = match.stem.rpartition("_")[0]
    return data / "originals" / f"{mid}.json", data / "variants" / f"{match.stem}.json", match


def test_generate_layout(workspace):
    _, data, _ = workspace
    split = json.loads((data / "split.json").read_text())
    assert sorted(split) == ["test", "train", "val"]
    assert len(list((data / "variants").glob("*.json"))) == 4


def test_train_writes_history(workspace):
    root, _, model = workspace
    assert model.stat().st_size > 0
    assert len(json.loads((root / "h.json").read_text())) == 1


@pytest.mark.parametrize("mode", [["--baseline", "exact"], ["--baseline", "overlap"], ["--baseline", "adjprop"], []])
def test_match_then_eval(workspace, mode, capsys):
    root, data, model = workspace
    orig, upd, truth = _pair(data)
    out = root / "pred.json"
    args = ["match", "--orig", str(orig), "--upd", str(upd), "--out", str(out), *mode]
    if not mode:
        args += ["--model", str(model), "--threshold", "0.9"]
    assert main(args) == 0
    doc = json.loads(out.read_text())
    assert {"orig_model", "upd_model", "pairs", "trace"} <= set(doc)
    assert main(["eval", "--pred", str(out), "--truth", str(truth), "--upd", str(upd), "--out", str(root / "r.json")]) == 0
    report = json.loads((root / "r.json").read_text())
    assert set(report) == {"face", "edge", "vertex"}


def test_eval_rejects_the_wrong_model(workspace):
    root, data, _ = workspace
    orig, upd, truth = _pair(data)
    assert main(["eval", "--pred", str(truth), "--truth", str(truth), "--upd", str(orig)]) == 2


def test_sweep_to_stdout(workspace, capsys):
    _, data, model = workspace
    assert main(["sweep", "--data", str(data), "--model", str(model), "--thresholds", "0.5,1.0", "--split", "train"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["threshold"] for r in rows] == ["0.5"] * 3 + ["1.0"] * 3


def test_sweep_to_files(workspace):
    root, data, model = workspace
    out = root / "sweep.csv"
    assert main(["sweep", "--data", str(data), "--model", str(model), "--out", str(out)]) == 0
    assert out.exists() and out.with_suffix(".json").exists()
    assert len(out.read_text().splitlines()) == 1 + 10 * 3


def test_gradcheck_reports_and_fails_on_tolerance(workspace, capsys):
    _, data, model = workspace
    # one run: the error is printed, and an impossible tolerance turns it into exit code 3
    args = ["gradcheck", "--model", str(model), "--data", str(data), "--samples", "1", "--coords", "3", "--tol", "1e-300"]
    assert main(args) == 3
    line = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("overall")][0]
    assert float(line.split()[4]) < 1e-4


def test_invalid_inputs(workspace, tmp_path):
    _, data, _ = workspace
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    orig, _, _ = _pair(data)
    assert main(["match", "--orig", str(bad), "--upd", str(orig), "--out", str(tmp_path / "o.json"), "--baseline", "exact"]) == 2
    assert main(["match", "--orig", str(orig), "--upd", str(orig), "--out", str(tmp_path / "o.json")]) == 2
    assert main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "m.ckpt")]) == 2
    assert main(["sweep", "--data", str(data), "--model", str(bad)]) == 2
