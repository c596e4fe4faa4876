import hashlib
import json

from bailpipe.storage import (
    atomic_write_bytes,
    atomic_write_text,
    dumps_record,
    read_json,
    read_jsonl,
    sha256_bytes,
    sha256_file,
    sha256_tree,
    write_csv,
    write_json,
    write_jsonl,
)


def test_dumps_record_sorted_keys_no_escapes():
    line = dumps_record({"b": 1, "a": "जमानत"})
    assert line == '{"a": "जमानत", "b": 1}'


def test_atomic_write_creates_parents(tmp_path):
    target = tmp_path / "a" / "b" / "out.txt"
    atomic_write_text(target, "नमस्ते")
    assert target.read_text(encoding="utf-8") == "नमस्ते"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out.bin"
    atomic_write_bytes(target, b"one")
    atomic_write_bytes(target, b"two")
    assert target.read_bytes() == b"two"
    assert [p.name for p in tmp_path.iterdir()] == ["out.bin"]


def test_jsonl_roundtrip(tmp_path):
    records = [{"id": "d1", "text": "जमानत स्वीकार"}, {"id": "d2", "n": 3}]
    path = tmp_path / "docs.jsonl"
    assert write_jsonl(path, records) == 2
    assert read_jsonl(path) == records
    raw = path.read_text(encoding="utf-8")
    assert raw.endswith("\n")
    assert "जमानत" in raw  # not \u-escaped


def test_read_jsonl_skips_blank_lines(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"a": 1}\n\n{"b": 2}\n', encoding="utf-8")
    assert read_jsonl(path) == [{"a": 1}, {"b": 2}]


def test_write_csv_unix_line_endings(tmp_path):
    path = tmp_path / "t.csv"
    n = write_csv(path, ["token", "count"], [["जमानत", 3], ["x,y", 1]])
    assert n == 2
    raw = path.read_bytes()
    assert b"\r" not in raw
    text = raw.decode("utf-8")
    assert text.splitlines()[0] == "token,count"
    assert '"x,y"' in text  # comma-bearing fields stay quoted


def test_write_json_stable_and_newline_terminated(tmp_path):
    path = tmp_path / "p.json"
    write_json(path, {"b": 2, "a": {"य": 1}})
    raw = path.read_text(encoding="utf-8")
    assert raw.endswith("\n")
    assert raw.index('"a"') < raw.index('"b"')
    assert read_json(path) == {"b": 2, "a": {"य": 1}}
    assert json.loads(raw) == {"a": {"य": 1}, "b": 2}


def test_sha256_helpers_agree(tmp_path):
    data = "जमानत".encode("utf-8")
    assert sha256_bytes(data) == hashlib.sha256(data).hexdigest()
    path = tmp_path / "f.txt"
    path.write_bytes(data)
    assert sha256_file(path) == sha256_bytes(data)
    assert sha256_tree(path) == sha256_file(path)


def test_sha256_tree_depends_on_names_and_content(tmp_path):
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    d3 = tmp_path / "three"
    for d in (d1, d2, d3):
        d.mkdir()
    (d1 / "a.txt").write_text("x")
    (d2 / "a.txt").write_text("x")
    (d3 / "b.txt").write_text("x")
    assert sha256_tree(d1) == sha256_tree(d2)
    assert sha256_tree(d1) != sha256_tree(d3)
    (d2 / "a.txt").write_text("y")
    assert sha256_tree(d1) != sha256_tree(d2)


def test_sha256_tree_ignores_non_txt(tmp_path):
    d = tmp_path / "dir"
    d.mkdir()
    (d / "a.txt").write_text("x")
    before = sha256_tree(d)
    (d / "skip.json").write_text("{}")
    assert sha256_tree(d) == before
