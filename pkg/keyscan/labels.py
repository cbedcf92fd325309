"""Play Store data-safety labels and the sensitive/benign split."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Union

from jsonschema import ValidationError, validate
from loguru import logger

from .config import DATA_DIR
from .errors import MalformedRecord

CATEGORY_TABLE_PATH = DATA_DIR / "data_safety_categories.json"

SENSITIVE = "sensitive"
BENIGN = "benign"
NO_LABEL = "no-label"

LABEL_SCHEMA = {
    "type": "object",
    "required": ["app_id", "submitted"],
    "properties": {
        "app_id": {"type": "string", "minLength": 1},
        "submitted": {"type": "boolean"},
        "collected": {"type": "array", "items": {"type": "string"}},
        "shared": {"type": "array", "items": {"type": "string"}},
    },
}


@dataclass(frozen=True)
class CategoryTable:
    categories: FrozenSet[str]
    excluded: FrozenSet[str]

    @property
    def sensitive(self) -> FrozenSet[str]:
        return self.categories - self.excluded


def load_category_table(path: Optional[Union[str, Path]] = None) -> CategoryTable:
    record = json.loads(Path(path or CATEGORY_TABLE_PATH).read_text(encoding="utf-8"))
    names = [c["name"] for c in record["categories"]]
    return CategoryTable(
        categories=frozenset(names),
        excluded=frozenset(c["name"] for c in record["categories"] if c["excluded"]),
    )


@dataclass(frozen=True)
class DataSafetyLabel:
    app_id: str
    submitted: bool
    collected: FrozenSet[str] = field(default_factory=frozenset)
    shared: FrozenSet[str] = field(default_factory=frozenset)

    def to_dict(self) -> Dict:
        return {
            "app_id": self.app_id,
            "submitted": self.submitted,
            "collected": sorted(self.collected),
            "shared": sorted(self.shared),
        }


def _known(values: List[str], table: CategoryTable, app_id: str, line: int) -> FrozenSet[str]:
    kept = set()
    for value in values:
        if value in table.categories:
            kept.add(value)
        else:
            logger.warning("labels line {} ({}): unknown category {!r} dropped", line, app_id, value)
    return frozenset(kept)


def ingest_labels(path: Union[str, Path], table: Optional[CategoryTable] = None) -> List[DataSafetyLabel]:
    """
    Reads data-safety labels from a JSON-lines export.

    Unknown category strings are dropped from the record with a warning.

    Raises:
        MalformedRecord: On invalid JSON, a schema violation, or categories on an unsubmitted label.
    """
    table = table or load_category_table()
    labels = []
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
                validate(instance=record, schema=LABEL_SCHEMA)
            except json.JSONDecodeError as err:
                raise MalformedRecord(line_no, f"invalid JSON: {err.msg}")
            except ValidationError as err:
                raise MalformedRecord(line_no, err.message)
            collected = record.get("collected", [])
            shared = record.get("shared", [])
            if not record["submitted"] and (collected or shared):
                raise MalformedRecord(line_no, "unsubmitted label lists categories")
            labels.append(
                DataSafetyLabel(
                    app_id=record["app_id"],
                    submitted=record["submitted"],
                    collected=_known(collected, table, record["app_id"], line_no),
                    shared=_known(shared, table, record["app_id"], line_no),
                )
            )
    return labels


def classify_sensitivity(label: DataSafetyLabel, table: Optional[CategoryTable] = None) -> str:
    """Sensitive iff the app collects any category outside the two excluded ones."""
    if not label.submitted:
        return NO_LABEL
    table = table or load_category_table()
    return SENSITIVE if label.collected & table.sensitive else BENIGN


def classify_all(labels: List[DataSafetyLabel], table: Optional[CategoryTable] = None) -> Dict[str, str]:
    table = table or load_category_table()
    return {label.app_id: classify_sensitivity(label, table) for label in labels}
