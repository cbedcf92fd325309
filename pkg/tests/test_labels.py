import itertools
import json

import pytest

from keyscan.errors import MalformedRecord
from keyscan.labels import (
    BENIGN, NO_LABEL, SENSITIVE, DataSafetyLabel, classify_all, classify_sensitivity, ingest_labels,
    load_category_table,
)

TABLE = load_category_table()
EXCLUDED = ["App info and performance", "Device or other IDs"]


def _write(tmp_path, records):
    path = tmp_path / "labels.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def test_category_table():
    assert len(TABLE.categories) == 14
    assert TABLE.excluded == frozenset(EXCLUDED)
    assert "Financial info" in TABLE.sensitive


def test_single_sensitive_category(tmp_path):
    labels = ingest_labels(_write(tmp_path, [{"app_id": "a", "submitted": True, "collected": ["Financial info"]}]))
    assert len(labels) == 1
    assert labels[0].collected == frozenset({"Financial info"})
    assert classify_sensitivity(labels[0]) == SENSITIVE


def test_unknown_category_dropped(tmp_path, caplog):
    path = _write(tmp_path, [{"app_id": "a", "submitted": True, "collected": ["Quantum info", "Location"]}])
    labels = ingest_labels(path)
    assert labels[0].collected == frozenset({"Location"})
    assert "Quantum info" in caplog.text


def test_empty_file(tmp_path):
    path = tmp_path / "labels.jsonl"
    path.write_text("", encoding="utf-8")
    assert ingest_labels(path) == []


def test_excluded_categories_are_benign(tmp_path):
    labels = ingest_labels(_write(tmp_path, [
        {"app_id": "game", "submitted": True, "collected": EXCLUDED, "shared": ["Financial info"]},
        {"app_id": "news", "submitted": False},
        {"app_id": "empty", "submitted": True, "collected": []},
    ]))
    assert classify_all(labels, TABLE) == {"game": BENIGN, "news": NO_LABEL, "empty": BENIGN}


@pytest.mark.parametrize("line", [
    '{"app_id": "a", "submitted": false, "collected": ["Location"]}',
    '{"app_id": "a", "submitted": "yes"}',
    '{"app_id": "a", "submitted": true',
    '{"submitted": true}',
])
def test_malformed_record(tmp_path, line):
    path = tmp_path / "labels.jsonl"
    path.write_text('{"app_id": "ok", "submitted": true}\n' + line + "\n", encoding="utf-8")
    with pytest.raises(MalformedRecord) as err:
        ingest_labels(path)
    assert err.value.line == 2


def test_sensitivity_is_monotone():
    names = sorted(TABLE.categories)
    for size in range(3):
        for subset in itertools.combinations(names, size):
            base = DataSafetyLabel("a", True, frozenset(subset))
            if classify_sensitivity(base, TABLE) != SENSITIVE:
                continue
            for extra in names:
                grown = DataSafetyLabel("a", True, frozenset(subset) | {extra})
                assert classify_sensitivity(grown, TABLE) == SENSITIVE
