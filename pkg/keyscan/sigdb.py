"""
Signature database, keyword prefilter and exact call-site detection.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Dict, Iterator, List, NamedTuple, Optional, Sequence, Union

from jsonschema import ValidationError, validate
from loguru import logger

from .config import DEFAULT_NEEDLES, DEFAULT_SIGNATURE_DB
from .errors import BadDescriptor, ConfigError, DuplicateApiId
from .smali_ir import AppIR, Invoke, MethodSignature, package_of

if TYPE_CHECKING:
    from .slicer import ResolvedValue

VALUE_DOMAINS = ("boolean", "int", "string", "string-array", "date", "byte-array", "none")
CATEGORIES = (
    "keystore-init", "keystore-param", "strongbox", "auth",
    "randomized-encryption", "attestation", "java-provider", "other",
)
# Categories whose classes live under android/security/keystore, the prefilter's first needle.
KEYSTORE_CATEGORIES = frozenset(CATEGORIES[:6])

SIGNATURE_DB_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["api_id", "class", "name", "params", "return", "value_domain", "category"],
        "properties": {
            "api_id": {"type": "string", "minLength": 1},
            "class": {"type": "string", "minLength": 1},
            "name": {"type": "string", "minLength": 1},
            "params": {"type": "array", "items": {"type": "string"}},
            "return": {"type": "string"},
            "arg_of_interest": {"type": "integer", "minimum": 0},
            "value_domain": {"enum": list(VALUE_DOMAINS)},
            "category": {"enum": list(CATEGORIES)},
        },
        "additionalProperties": False,
    },
}


@dataclass(frozen=True)
class ApiSignature:
    api_id: str
    signature: MethodSignature
    value_domain: str
    category: str
    arg_of_interest: Optional[int] = None

    def __post_init__(self):
        if self.value_domain not in VALUE_DOMAINS:
            raise ValueError(f"unknown value_domain {self.value_domain!r}")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.value_domain != "none":
            if self.arg_of_interest is None or not 0 <= self.arg_of_interest < self.signature.arity:
                raise BadDescriptor(self.signature.render(), f"{self.api_id}: arg_of_interest out of range")

    @property
    def is_keystore(self) -> bool:
        return self.category in KEYSTORE_CATEGORIES

    def to_dict(self) -> Dict:
        record = {
            "api_id": self.api_id,
            "class": self.signature.class_name,
            "name": self.signature.method_name,
            "params": list(self.signature.param_descriptors),
            "return": self.signature.return_descriptor,
            "value_domain": self.value_domain,
            "category": self.category,
        }
        if self.arg_of_interest is not None:
            record["arg_of_interest"] = self.arg_of_interest
        return record


class SignatureDb:
    """Immutable lookup of signatures of interest, keyed by api_id and by exact signature."""

    def __init__(self, entries: Sequence[ApiSignature]):
        self._by_id: Dict[str, ApiSignature] = {}
        self._by_signature: Dict[MethodSignature, ApiSignature] = {}
        for entry in entries:
            if entry.api_id in self._by_id or entry.signature in self._by_signature:
                raise DuplicateApiId(entry.api_id)
            self._by_id[entry.api_id] = entry
            self._by_signature[entry.signature] = entry

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[ApiSignature]:
        return iter(self._by_id.values())

    def __contains__(self, api_id: str) -> bool:
        return api_id in self._by_id

    def get(self, api_id: str) -> ApiSignature:
        return self._by_id[api_id]

    def lookup(self, signature: MethodSignature) -> Optional[ApiSignature]:
        return self._by_signature.get(signature)

    def keystore_subset(self) -> List[ApiSignature]:
        return [e for e in self if e.is_keystore]


def load_signature_db(path: Optional[Union[str, Path]] = None) -> SignatureDb:
    """
    Loads and validates a signature database file.

    Args:
        path: JSON file; None loads the shipped database.

    Returns:
        SignatureDb: The validated database.

    Raises:
        ConfigError: If the file is unreadable or fails the schema.
        DuplicateApiId: If two entries share an api_id or a signature.
        BadDescriptor: If a descriptor is invalid or arg_of_interest is out of range.
    """
    path = Path(path) if path else DEFAULT_SIGNATURE_DB
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
        validate(instance=records, schema=SIGNATURE_DB_SCHEMA)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read signature database {path}: {err}")
    except ValidationError as err:
        raise ConfigError(f"invalid signature database {path}: {err.message}")

    entries = []
    for record in records:
        signature = MethodSignature(
            class_name=record["class"],
            method_name=record["name"],
            param_descriptors=tuple(record["params"]),
            return_descriptor=record["return"],
        )
        entries.append(
            ApiSignature(
                api_id=record["api_id"],
                signature=signature,
                value_domain=record["value_domain"],
                category=record["category"],
                arg_of_interest=record.get("arg_of_interest"),
            )
        )
    db = SignatureDb(entries)
    logger.debug("loaded {} signatures from {}", len(db), path)
    return db


# Call sites

class ResolvedArg(NamedTuple):
    index: int
    value: "ResolvedValue"


@dataclass
class ApiCallSite:
    app_id: str
    callsite_id: str
    callee: str
    category: str
    caller: MethodSignature
    caller_package: str
    source_line: int
    instruction_index: int
    receiver_register: Optional[str] = None
    receiver_origin: Optional[int] = None
    resolved_args: List[ResolvedArg] = field(default_factory=list)

    def arg(self, index: int) -> Optional["ResolvedValue"]:
        for resolved in self.resolved_args:
            if resolved.index == index:
                return resolved.value
        return None

    def sort_key(self):
        return (self.caller.class_name, self.caller.render(), self.source_line, self.instruction_index)


def callsite_id(caller: MethodSignature, instruction_index: int) -> str:
    return f"{caller.render()}@{instruction_index}"


def find_call_sites(app: AppIR, db: SignatureDb) -> List[ApiCallSite]:
    """Every Invoke whose target exactly equals a database signature, ordered by (class, method, line)."""
    sites = []
    for method in app.iter_methods():
        for index, instr in enumerate(method.instructions):
            if not isinstance(instr, Invoke):
                continue
            entry = db.lookup(instr.target)
            if entry is None:
                continue
            sites.append(
                ApiCallSite(
                    app_id=app.app_id,
                    callsite_id=callsite_id(method.signature, index),
                    callee=entry.api_id,
                    category=entry.category,
                    caller=method.signature,
                    caller_package=package_of(method.signature.class_name),
                    source_line=instr.source_line,
                    instruction_index=index,
                    receiver_register=instr.receiver,
                )
            )
    sites.sort(key=ApiCallSite.sort_key)
    return sites


# Keyword prefilter

class PrefilterHit(NamedTuple):
    needle: str
    file: str
    line: int


@dataclass
class PrefilterResult:
    matched: bool
    hits: List[PrefilterHit] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "matched": self.matched,
            "hits": [hit._asdict() for hit in self.hits],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "PrefilterResult":
        return cls(
            matched=record["matched"],
            hits=[PrefilterHit(**hit) for hit in record.get("hits", [])],
            warnings=list(record.get("warnings", [])),
        )


def keyword_prefilter(app_dir: Union[str, Path], needles: Sequence[str] = DEFAULT_NEEDLES, deadline=None) -> PrefilterResult:
    """
    Case-sensitive substring search over every file of an app directory.

    One hit is reported per (needle, file, line). Over-approximate on purpose:
    a bare provider string with no keystore invoke still matches.
    """
    root = Path(app_dir)
    encoded = [(needle, needle.encode("utf-8")) for needle in needles]
    hits: List[PrefilterHit] = []
    warnings: List[str] = []

    files = sorted((p for p in root.rglob("*") if p.is_file()), key=lambda p: p.relative_to(root).as_posix())
    for path in files:
        if deadline is not None:
            deadline.check("prefilter")
        rel = path.relative_to(root).as_posix()
        try:
            data = path.read_bytes()
        except OSError as err:
            warnings.append(f"{rel}: unreadable ({err.strerror})")
            continue
        if not any(raw in data for _, raw in encoded):
            continue
        for line_no, line in enumerate(data.split(b"\n"), start=1):
            for needle, raw in encoded:
                if raw in line:
                    hits.append(PrefilterHit(needle, rel, line_no))

    for message in warnings:
        logger.warning("prefilter {}: {}", root.name, message)
    hits.sort()
    return PrefilterResult(matched=bool(hits), hits=hits, warnings=warnings)
