import csv
import io
import json

import numpy as np
import pytest
from PIL import Image

from roadtexton import synthetic
from roadtexton.cli import main, parse_sweep_values
from roadtexton.errors import DatasetError
from roadtexton.image import ROADSIDE_PALETTE, UNKNOWN, decode_label_map, encode_label_map, save_rgb
from roadtexton.textons import TextonDictionary

FAST = ["--samples-per-region", "40", "--restarts", "1"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("regions")
    crops = synthetic.make_crops(4, size=24, seed=1)
    for name, regs in zip(ROADSIDE_PALETTE.names, crops):
        (root / name).mkdir()
        for i, r in enumerate(regs):
            save_rgb(root / name / f"{i:02d}.png", r)
    return root


@pytest.fixture(scope="module")
def dictionary(dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp("dict") / "d.json"
    assert main(["train", "--dataset", str(dataset), "--textons", "2", "-o", str(path)] + FAST) == 0
    return path


def test_train_shape(dictionary):
    d = TextonDictionary.load(dictionary)
    assert d.color.shape == (14, 6) and d.texture.shape == (14, 17)
    assert d.classes == ROADSIDE_PALETTE.names


def test_train_rerun_byte_identical(dataset, dictionary, tmp_path):
    again = tmp_path / "again.json"
    main(["train", "--dataset", str(dataset), "--textons", "2", "-o", str(again)] + FAST)
    assert again.read_bytes() == dictionary.read_bytes()


def test_train_missing_class_folder(tmp_path, capsys):
    (tmp_path / "brown_grass").mkdir()
    save_rgb(tmp_path / "brown_grass" / "a.png", np.zeros((8, 8, 3), np.uint8))
    assert main(["train", "--dataset", str(tmp_path), "-o", str(tmp_path / "d.json")]) == 2
    assert "green_grass" in capsys.readouterr().err


def test_dataset_required(capsys):
    assert main(["train", "-o", "x.json"]) == 2
    assert "--dataset" in capsys.readouterr().err


def _frame(seed):
    img, gt = synthetic.make_mosaic(np.random.default_rng(seed))
    return img, gt


def test_segment_single_image(dictionary, tmp_path):
    img, _ = _frame(0)
    save_rgb(tmp_path / "frame.png", img)
    out = tmp_path / "out"
    assert main(["segment", str(dictionary), str(tmp_path / "frame.png"), "-o", str(out)]) == 0
    labels = decode_label_map((out / "frame_labels.png").read_bytes(), ROADSIDE_PALETTE)
    assert labels.shape == (240, 320) and (labels >= 0).all()
    assert np.asarray(Image.open(out / "frame_overlay.png")).shape == (240, 320, 3)
    rows = list(csv.reader(io.StringIO((out / "frame_probs.csv").read_text())))
    assert rows[0][:2] == ["superpixel_id", "size"] and len(rows) > 2


def test_segment_empty_directory(dictionary, tmp_path, capsys):
    (tmp_path / "in").mkdir()
    assert main(["segment", str(dictionary), str(tmp_path / "in"), "-o", str(tmp_path / "out")]) == 0
    assert "0/0" in capsys.readouterr().out


def test_segment_directory_of_frames(dictionary, tmp_path):
    src = tmp_path / "frames"
    src.mkdir()
    for i in range(5):
        save_rgb(src / f"f{i}.png", _frame(i)[0])
    (src / "notes.txt").write_text("not an image")
    out = tmp_path / "out"
    assert main(["segment", str(dictionary), str(src), "-o", str(out), "--jobs", "2"]) == 0
    assert len(list(out.glob("*_labels.png"))) == 5
    assert len(list(out.glob("*_probs.csv"))) == 5


def test_segment_bad_file_exit_code(dictionary, tmp_path):
    src = tmp_path / "frames"
    src.mkdir()
    save_rgb(src / "good.png", _frame(1)[0])
    (src / "bad.png").write_bytes(b"not a png")
    assert main(["segment", str(dictionary), str(src), "-o", str(tmp_path / "out")]) == 1
    assert (tmp_path / "out" / "good_labels.png").exists()


def _manifest(tmp_path, items):
    lines = []
    for i, (img, gt) in enumerate(items):
        save_rgb(tmp_path / f"img{i}.png", img)
        (tmp_path / f"gt{i}.png").write_bytes(encode_label_map(gt, ROADSIDE_PALETTE))
        lines.append(f"img{i}.png\tgt{i}.png")
    path = tmp_path / "manifest.tsv"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_evaluate_uniform_image(dictionary, tmp_path):
    sky = synthetic.render(synthetic.MATERIALS[6], 240, 320, np.random.default_rng(0))
    gt = np.full((240, 320), 6)
    gt[:4] = UNKNOWN
    manifest = _manifest(tmp_path, [(sky, gt)])
    prefix = tmp_path / "report" / "r"
    assert main(["evaluate", str(dictionary), "--manifest", str(manifest), "-o", str(prefix)]) == 0
    report = json.loads((tmp_path / "report" / "r.json").read_text())
    assert report["global_accuracy"] == 100.0
    assert report["ignored_pixels"] == 4 * 320
    assert "Global" in (tmp_path / "report" / "r.txt").read_text()


def test_evaluate_missing_file_in_manifest(dictionary, tmp_path, capsys):
    (tmp_path / "m.tsv").write_text("missing.png\tgt.png\n")
    assert main(["evaluate", str(dictionary), "--manifest", str(tmp_path / "m.tsv")]) == 2
    assert "missing.png" in capsys.readouterr().err


def test_crossval(dataset, tmp_path, capsys):
    out = tmp_path / "cv.json"
    assert main(["crossval", "--dataset", str(dataset), "--textons", "2", "-o", str(out)] + FAST) == 0
    data = json.loads(out.read_text())
    assert len(data["folds"]) == 4
    assert data["mean_global_accuracy"] == 100.0
    assert "+/-" in capsys.readouterr().out


def _sweep(dataset, tmp_path, *extra):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", *extra, "--dataset", str(dataset), "--textons", "2", "--folds", "2",
                 "-o", str(out)] + FAST)
    return code, list(csv.reader(out.open())) if out.exists() else None


def test_sweep_weight_defaults(dataset, tmp_path):
    code, rows = _sweep(dataset, tmp_path, "weight")
    assert code == 0
    assert rows[0] == ["weight", "global_accuracy", "average_class_accuracy",
                       "feature_seconds", "mapping_seconds"]
    assert len(rows) == 16


def test_sweep_metric_defaults(dataset, tmp_path):
    code, rows = _sweep(dataset, tmp_path, "metric")
    assert code == 0
    assert [r[0] for r in rows[1:]] == ["euclidean", "cityblock", "cosine", "correlation"]


def test_sweep_invalid_value_rejected_before_running(dataset, tmp_path, capsys):
    code, rows = _sweep(dataset, tmp_path, "filter_size", "--values", "7,8")
    assert code == 2 and rows is None
    assert "8" in capsys.readouterr().err


def test_parse_sweep_values():
    assert parse_sweep_values("weight", None)[0] == 0.1 and len(parse_sweep_values("weight", None)) == 15
    assert parse_sweep_values("filter_size", None) == [5, 7, 9, 11, 13, 15]
    assert parse_sweep_values("metric", "Cosine") == ["cosine"]
    for axis, text in (("textons", None), ("textons", "0"), ("weight", "-1"), ("metric", "l3")):
        with pytest.raises(DatasetError):
            parse_sweep_values(axis, text)


def test_config_file_with_flag_override(dataset, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"textons": 3, "distance": "cityblock", "samples_per_region": 40,
                               "restarts": 1, "filter_size": 5}))
    out = tmp_path / "d.json"
    assert main(["train", "--config", str(cfg), "--dataset", str(dataset), "--textons", "1",
                 "-o", str(out)]) == 0
    d = TextonDictionary.load(out)
    assert d.k == 1 and d.metric.value == "cityblock" and d.config.filter_size == 5


def test_config_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"texton": 3}')
    assert main(["train", "--config", str(cfg), "--dataset", str(tmp_path), "-o", "x"]) == 2
    assert "texton" in capsys.readouterr().err
