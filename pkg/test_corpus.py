"""
Test Corpus Operations
----------------------
Create / read / list operations on a temporary corpus directory.

Run: pytest test_corpus.py
"""

from app.corpus import (
    compute_sha256_hash,
    count_entries,
    create_entry,
    entry_exists,
    get_all_entries,
    get_all_targets,
    get_entry,
)

TARGET = "parser-safety"


def test_create_and_read_entry(tmp_path):
    # Test 1: the file name is the content hash
    digest = create_entry(tmp_path, TARGET, b"permit(")
    assert digest == compute_sha256_hash(b"permit(")
    assert (tmp_path / TARGET / digest).read_bytes() == b"permit("

    # Test 2: reading back
    assert entry_exists(tmp_path, TARGET, digest)
    assert get_entry(tmp_path, TARGET, digest) == b"permit("
    assert get_entry(tmp_path, TARGET, "0" * 64) is None


def test_duplicate_entries_are_stored_once(tmp_path):
    first = create_entry(tmp_path, TARGET, b"abc")
    second = create_entry(tmp_path, TARGET, b"abc")
    assert first == second
    assert count_entries(tmp_path, TARGET) == 1


def test_list_entries_and_targets(tmp_path):
    digests = sorted(create_entry(tmp_path, TARGET, data) for data in (b"", b"a", b"b"))
    create_entry(tmp_path, "slicing-soundness", b"x")

    entries = get_all_entries(tmp_path, TARGET)
    assert [digest for digest, _ in entries] == digests
    assert {data for _, data in entries} == {b"", b"a", b"b"}
    assert get_all_targets(tmp_path) == ["parser-safety", "slicing-soundness"]


def test_missing_directories_are_empty(tmp_path):
    assert get_all_entries(tmp_path, TARGET) == []
    assert get_all_targets(tmp_path / "nowhere") == []
    assert count_entries(tmp_path, TARGET) == 0


def test_temporary_files_are_skipped(tmp_path):
    create_entry(tmp_path, TARGET, b"kept")
    (tmp_path / TARGET / ".tmp-abandoned").write_bytes(b"half")
    (tmp_path / TARGET / "subdir").mkdir()
    assert [data for _, data in get_all_entries(tmp_path, TARGET)] == [b"kept"]


def test_mismatched_entry_is_still_returned(tmp_path, caplog):
    directory = tmp_path / TARGET
    directory.mkdir()
    (directory / ("f" * 64)).write_bytes(b"edited by hand")
    assert get_entry(tmp_path, TARGET, "f" * 64) == b"edited by hand"
    assert "does not match its hash" in caplog.text
