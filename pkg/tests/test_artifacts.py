import pytest

from ictd import __version__
from ictd.artifacts import (CSV_SCHEMAS, TASKS_NAME, MatrixDocument, RunManifest, check_csv_schema, concat_csv,
                            matrix_from_document, new_manifest, read_json, record_outputs, sha256_file, write_csv,
                            write_json)
from ictd.exception import ConfigError, DimensionError


def _demo_rows(offset=0):
    return [{"context_length": t + offset, "mean_msve": 0.1, "std_error": 0.0, "median_msve": 0.05, "task_count": 2}
            for t in (1, 2)]


def test_csv_header_and_float_format(tmp_path):
    path = write_csv(_demo_rows(), tmp_path / "demo.csv", "demo")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(CSV_SCHEMAS["demo"])
    assert lines[1] == "1,0.10000000000000001,0,0.050000000000000003,2"


def test_schema_mismatch(tmp_path):
    path = write_csv(_demo_rows(), tmp_path / "demo.csv", "demo")
    with pytest.raises(ConfigError):
        check_csv_schema(path, "equivalence")


def test_concat_keeps_order(tmp_path):
    a = write_csv(_demo_rows(), tmp_path / "a.csv", "demo")
    b = write_csv(_demo_rows(offset=10), tmp_path / "b.csv", "demo")
    merged = concat_csv([b, a], tmp_path / "merged.csv", "demo")
    lines = merged.read_text(encoding="utf-8").splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["11", "12", "1", "2"]


def test_outputs_are_hashed_by_relative_name(tmp_path):
    nested = write_csv(_demo_rows(), tmp_path / "seed_3" / "demo.csv", "demo")
    write_csv(_demo_rows(), tmp_path / "demo.csv", "demo")
    (tmp_path / "params.json").write_text("{}", encoding="utf-8")
    manifest = record_outputs(new_manifest("demo", {"tasks": 2}, seed=0), tmp_path)
    assert set(manifest.outputs) == {"demo.csv", "seed_3/demo.csv"}
    assert manifest.outputs["seed_3/demo.csv"] == sha256_file(nested)
    assert manifest.outputs["demo.csv"] == manifest.outputs["seed_3/demo.csv"]
    assert manifest.tasks == {}


def test_manifest_round_trip(tmp_path):
    manifest = new_manifest("verify", {"kind": "td0"}, seed=4)
    assert manifest.code_version == __version__
    restored = read_json(RunManifest, write_json(manifest, tmp_path / "manifest.json"))
    assert restored == manifest


def test_unreadable_document(tmp_path):
    with pytest.raises(ConfigError):
        read_json(RunManifest, tmp_path / "missing.json")
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_json(RunManifest, tmp_path / "broken.json")


def test_matrix_document_size_checked():
    with pytest.raises(DimensionError):
        matrix_from_document(MatrixDocument(rows=2, cols=2, data=[1.0, 2.0, 3.0]))


def test_task_files_are_hashed_apart_from_outputs(tmp_path):
    write_csv(_demo_rows(), tmp_path / "demo.csv", "demo")
    (tmp_path / TASKS_NAME).write_text('{"count": 0, "tasks": []}', encoding="utf-8")
    (tmp_path / "seed_1").mkdir()
    (tmp_path / "seed_1" / TASKS_NAME).write_text('{"count": 0, "tasks": []}', encoding="utf-8")
    manifest = record_outputs(new_manifest("demo", {"tasks": 0}, seed=0), tmp_path)
    assert set(manifest.outputs) == {"demo.csv"}
    assert set(manifest.tasks) == {TASKS_NAME, f"seed_1/{TASKS_NAME}"}
    assert manifest.tasks[TASKS_NAME] == sha256_file(tmp_path / TASKS_NAME)


def test_compact_json(tmp_path):
    manifest = new_manifest("verify", {"kind": "td0"}, seed=4)
    path = write_json(manifest, tmp_path / "manifest.json", indent=None)
    assert "\n" not in path.read_text(encoding="utf-8")
    assert read_json(RunManifest, path) == manifest
