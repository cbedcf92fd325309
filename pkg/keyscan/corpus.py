"""
Corpus persistence and package analysis.

One JSON result file per app plus one manifest. Package parties follow the
cross-developer rule: a package shipped by apps of two or more developers is
third-party, one developer makes it first-party, and packages whose name
components are all short are treated as obfuscated and left out.
"""

import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd
import pytz
from jsonschema import ValidationError, validate
from loguru import logger

from .callgraph import EXCLUDED_OBFUSCATED, FIRST_PARTY, THIRD_PARTY, CallTrace, ReachabilityResult
from .errors import (
    ConfigError, CorruptResult, EmptyCorpus, MissingDeveloper, SchemaVersionMismatch, UnwritableOutput,
)
from .sigdb import ApiCallSite, PrefilterResult, ResolvedArg
from .slicer import ResolvedValue
from .smali_ir import MethodSignature

SCHEMA_VERSION = 1
RESULT_SUFFIX = ".result.json"
MANIFEST_NAME = "manifest.json"
METADATA_COLUMNS = ["app_id", "title", "developer", "installs", "genre", "version"]
STAGES = ("prefilter", "scan", "slice", "graph", "reach", "done", "timeout", "error")

_SITE_SCHEMA = {
    "type": "object",
    "required": ["callsite_id", "callee", "category", "caller", "caller_package", "source_line", "resolved_args"],
    "properties": {
        "callsite_id": {"type": "string"},
        "callee": {"type": "string"},
        "caller": {"type": "string"},
        "source_line": {"type": "integer"},
        "resolved_args": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "value"],
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "value": {
                        "type": "object",
                        "required": ["kind", "value"],
                        "properties": {"kind": {"enum": ["Int", "Bool", "Str", "StrArray", "Unresolved"]}},
                    },
                },
            },
        },
    },
}

RESULT_SCHEMA = {
    "type": "object",
    "required": [
        "schema_version", "app_id", "developer", "installs", "genre", "prefilter",
        "call_sites", "reachability", "call_traces", "defined_packages", "warnings", "status", "stages",
    ],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "app_id": {"type": "string", "minLength": 1},
        "developer": {"type": ["string", "null"]},
        "installs": {"type": ["integer", "null"], "minimum": 0},
        "genre": {"type": "string"},
        "prefilter": {"type": "object", "required": ["matched", "hits"]},
        "call_sites": {"type": "array", "items": _SITE_SCHEMA},
        "reachability": {"type": "array", "items": {"type": "object", "required": ["callsite_id", "reachable"]}},
        "call_traces": {"type": "array"},
        "defined_packages": {"type": "array", "items": {"type": "string"}},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "status": {"type": "object", "required": ["app_id", "stage"]},
        "stages": {"type": "array"},
    },
}


def is_obfuscated(package_name: str, min_component: int = 3) -> bool:
    """
    Short-name obfuscation heuristic.

    Args:
        package_name (str): Dotted package name; "" is the default package.
        min_component (int): Component length that marks a real package name.

    Returns:
        bool: False iff some dot-separated component has at least ``min_component`` characters.
    """
    return not any(len(part) >= min_component for part in package_name.split("."))


def normalize_genre(genre: str) -> str:
    genre = (genre or "").strip()
    if genre.upper().startswith("GAME"):
        return "GAMES"
    return genre or "UNKNOWN"


def format_timestamp(epoch_seconds: float) -> str:
    return datetime.fromtimestamp(int(epoch_seconds), tz=pytz.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def input_timestamp(paths: Iterable[Path]) -> str:
    """SOURCE_DATE_EPOCH when set, else the newest input mtime; identical inputs give identical stamps."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return format_timestamp(float(epoch))
    newest = 0.0
    for path in paths:
        try:
            newest = max(newest, path.stat().st_mtime)
        except OSError:
            continue
    return format_timestamp(newest)


# JSON output

def write_json(path: Union[str, Path], data) -> Path:
    """Sorted-key JSON with a trailing newline, written to a temp file and renamed into place."""
    path = Path(path)
    text = json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError as err:
        raise UnwritableOutput(f"cannot write {path}: {err}")
    return path


def write_csv(path: Union[str, Path], df: pd.DataFrame) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, lineterminator="\n")
    except OSError as err:
        raise UnwritableOutput(f"cannot write {path}: {err}")
    return path


# App metadata

@dataclass(frozen=True)
class AppMetadata:
    app_id: str
    developer: Optional[str] = None
    installs: Optional[int] = None
    genre: str = "UNKNOWN"
    title: str = ""
    version: str = ""


def _parse_installs(raw: str, app_id: str, path) -> Optional[int]:
    """``"10,000+"`` style store counts; an empty cell is None."""
    cleaned = raw.replace(",", "").rstrip("+").strip()
    if not cleaned:
        return None
    if not cleaned.isdigit():
        raise ConfigError(f"app metadata {path}: installs {raw!r} for {app_id} is not a count")
    return int(cleaned)


def read_app_metadata(path: Union[str, Path]) -> Dict[str, AppMetadata]:
    """
    Reads the app metadata CSV (app_id,title,developer,installs,genre,version).

    Empty developer or installs cells become None; installs accept store
    strings such as "10,000+". Genres are normalized.

    Raises:
        ConfigError: If the file is unreadable, lacks app_id/developer columns, repeats an app_id
            or has a non-numeric installs cell.
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise ConfigError(f"cannot read app metadata {path}: {err}")
    missing = {"app_id", "developer"} - set(df.columns)
    if missing:
        raise ConfigError(f"app metadata {path} lacks columns {sorted(missing)}")
    duplicated = df[df["app_id"].duplicated()]["app_id"].tolist()
    if duplicated:
        raise ConfigError(f"app metadata {path} repeats app_id {duplicated[0]}")

    metadata = {}
    for _, row in df.iterrows():
        installs = _parse_installs(row.get("installs", "").strip(), row["app_id"], path)
        metadata[row["app_id"]] = AppMetadata(
            app_id=row["app_id"],
            developer=row["developer"].strip() or None,
            installs=installs,
            genre=normalize_genre(row.get("genre", "")),
            title=row.get("title", ""),
            version=row.get("version", ""),
        )
    return metadata


# Per-app results

@dataclass
class StageStatus:
    app_id: str
    stage: str
    duration_seconds: float = 0.0
    message: str = ""

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    @property
    def failed(self) -> bool:
        return self.stage in ("timeout", "error")

    def to_dict(self) -> Dict:
        # duration_seconds is logged, never persisted.
        return {"app_id": self.app_id, "stage": self.stage, "message": self.message}

    @classmethod
    def from_dict(cls, record: Dict) -> "StageStatus":
        return cls(record["app_id"], record["stage"], record.get("duration_seconds", 0.0), record.get("message", ""))


def site_to_dict(site: ApiCallSite) -> Dict:
    return {
        "callsite_id": site.callsite_id,
        "callee": site.callee,
        "category": site.category,
        "caller": site.caller.render(),
        "caller_package": site.caller_package,
        "source_line": site.source_line,
        "instruction_index": site.instruction_index,
        "receiver_register": site.receiver_register,
        "receiver_origin": site.receiver_origin,
        "resolved_args": [{"index": arg.index, "value": arg.value.to_dict()} for arg in site.resolved_args],
    }


def site_from_dict(record: Dict, app_id: str) -> ApiCallSite:
    return ApiCallSite(
        app_id=app_id,
        callsite_id=record["callsite_id"],
        callee=record["callee"],
        category=record["category"],
        caller=MethodSignature.parse(record["caller"]),
        caller_package=record["caller_package"],
        source_line=record["source_line"],
        instruction_index=record.get("instruction_index", 0),
        receiver_register=record.get("receiver_register"),
        receiver_origin=record.get("receiver_origin"),
        resolved_args=[ResolvedArg(arg["index"], ResolvedValue.from_dict(arg["value"])) for arg in record["resolved_args"]],
    )


@dataclass
class AppResult:
    app_id: str
    developer: Optional[str] = None
    installs: Optional[int] = None
    genre: str = "UNKNOWN"
    title: str = ""
    version: str = ""
    prefilter: PrefilterResult = field(default_factory=lambda: PrefilterResult(matched=False))
    call_sites: List[ApiCallSite] = field(default_factory=list)
    reachability: List[ReachabilityResult] = field(default_factory=list)
    call_traces: List[CallTrace] = field(default_factory=list)
    defined_packages: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    status: Optional[StageStatus] = None
    stages: List[StageStatus] = field(default_factory=list)
    scanned_at: str = ""

    def reachability_by_site(self) -> Dict[str, ReachabilityResult]:
        return {r.callsite_id: r for r in self.reachability}

    def trace_for(self, method: MethodSignature) -> Optional[CallTrace]:
        for trace in self.call_traces:
            if trace.method == method:
                return trace
        return None

    def to_dict(self) -> Dict:
        status = self.status or StageStatus(self.app_id, "done")
        return {
            "schema_version": SCHEMA_VERSION,
            "app_id": self.app_id,
            "developer": self.developer,
            "installs": self.installs,
            "genre": self.genre,
            "title": self.title,
            "version": self.version,
            "prefilter": self.prefilter.to_dict(),
            "call_sites": [site_to_dict(s) for s in self.call_sites],
            "reachability": [r.to_dict() for r in sorted(self.reachability, key=lambda r: r.callsite_id)],
            "call_traces": [t.to_dict() for t in sorted(self.call_traces, key=lambda t: t.method.render())],
            "defined_packages": sorted(self.defined_packages),
            "warnings": list(self.warnings),
            "status": status.to_dict(),
            "stages": [s.to_dict() for s in self.stages],
            "scanned_at": self.scanned_at,
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "AppResult":
        found = record.get("schema_version") if isinstance(record, dict) else None
        if found != SCHEMA_VERSION:
            raise SchemaVersionMismatch(found, SCHEMA_VERSION)
        try:
            validate(instance=record, schema=RESULT_SCHEMA)
        except ValidationError as err:
            raise CorruptResult(f"result for {record.get('app_id')!r} fails schema: {err.message}")
        app_id = record["app_id"]
        return cls(
            app_id=app_id,
            developer=record["developer"],
            installs=record["installs"],
            genre=record["genre"],
            title=record.get("title", ""),
            version=record.get("version", ""),
            prefilter=PrefilterResult.from_dict(record["prefilter"]),
            call_sites=[site_from_dict(s, app_id) for s in record["call_sites"]],
            reachability=[ReachabilityResult.from_dict(r) for r in record["reachability"]],
            call_traces=[CallTrace.from_dict(t) for t in record["call_traces"]],
            defined_packages=list(record["defined_packages"]),
            warnings=list(record["warnings"]),
            status=StageStatus.from_dict(record["status"]),
            stages=[StageStatus.from_dict(s) for s in record["stages"]],
            scanned_at=record.get("scanned_at", ""),
        )


def result_path(results_dir: Union[str, Path], app_id: str) -> Path:
    return Path(results_dir) / f"{app_id}{RESULT_SUFFIX}"


def persist_result(result: AppResult, results_dir: Union[str, Path]) -> Path:
    return write_json(result_path(results_dir, result.app_id), result.to_dict())


def read_result(path: Union[str, Path]) -> AppResult:
    """
    Reads one result file.

    Raises:
        SchemaVersionMismatch: If the file declares another schema_version.
        CorruptResult: If the file is not JSON or fails the schema.
    """
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise CorruptResult(f"cannot read result {path}: {err}")
    try:
        return AppResult.from_dict(record)
    except (KeyError, TypeError, ValueError) as err:
        raise CorruptResult(f"malformed result {path}: {err}")


def load_result(results_dir: Union[str, Path], app_id: str) -> AppResult:
    return read_result(result_path(results_dir, app_id))


def result_files(results_dir: Union[str, Path]) -> List[Path]:
    return sorted(Path(results_dir).glob(f"*{RESULT_SUFFIX}"))


def load_results(results_dir: Union[str, Path]) -> List[AppResult]:
    results = [read_result(path) for path in result_files(results_dir)]
    return sorted(results, key=lambda r: r.app_id)


def apply_metadata(result: AppResult, metadata: Mapping[str, AppMetadata]) -> AppResult:
    meta = metadata.get(result.app_id)
    if meta is not None:
        result.developer = meta.developer
        result.installs = meta.installs
        result.genre = meta.genre
        result.title = meta.title
        result.version = meta.version
    return result


# Package analysis

@dataclass
class PackageEntry:
    name: str
    obfuscated: bool
    referencing_apps: List[str] = field(default_factory=list)
    developers: List[str] = field(default_factory=list)
    party: Optional[str] = None
    init_calls: int = 0
    strongbox_calls: int = 0

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "obfuscated": self.obfuscated,
            "referencing_apps": sorted(self.referencing_apps),
            "developers": sorted(self.developers),
            "party": self.party,
            "init_calls": self.init_calls,
            "strongbox_calls": self.strongbox_calls,
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "PackageEntry":
        return cls(**record)


def _party(name: str, apps: Mapping[str, Optional[str]], min_component: int) -> Tuple[bool, Optional[str], List[str]]:
    """(obfuscated, party, apps missing a developer) for one package given app -> developer."""
    obfuscated = is_obfuscated(name, min_component)
    missing = sorted(app for app, dev in apps.items() if not dev)
    developers = {dev for dev in apps.values() if dev}
    if obfuscated:
        return True, EXCLUDED_OBFUSCATED, missing
    if len(developers) >= 2:
        return False, THIRD_PARTY, missing
    if missing or not developers:
        return False, None, missing
    return False, FIRST_PARTY, missing


def classify_packages(
    results: Sequence[AppResult], min_component: int = 3, strict: bool = False
) -> Dict[str, PackageEntry]:
    """
    Classifies every package holding a keystore-init call site.

    A package referenced by an app without developer metadata keeps party None
    unless two known developers already make it third-party.

    Args:
        results: Per-app results with developer fields filled.
        min_component: Obfuscation threshold.
        strict: Raise instead of withholding the party.

    Returns:
        Dict[str, PackageEntry]: Entries keyed and ordered by package name.

    Raises:
        MissingDeveloper: In strict mode, for the first app lacking a developer.
    """
    referencing: Dict[str, Dict[str, Optional[str]]] = {}
    init_calls: Dict[str, int] = {}
    strongbox_calls: Dict[str, int] = {}
    for result in results:
        for site in result.call_sites:
            if site.category == "keystore-init":
                referencing.setdefault(site.caller_package, {})[result.app_id] = result.developer
                init_calls[site.caller_package] = init_calls.get(site.caller_package, 0) + 1
            elif site.category == "strongbox":
                strongbox_calls[site.caller_package] = strongbox_calls.get(site.caller_package, 0) + 1

    index = {}
    for name in sorted(referencing):
        apps = referencing[name]
        obfuscated, party, missing = _party(name, apps, min_component)
        if party is None:
            if strict:
                raise MissingDeveloper(missing[0])
            logger.warning("package {}: party withheld, no developer for {}", name, ", ".join(missing))
        index[name] = PackageEntry(
            name=name,
            obfuscated=obfuscated,
            referencing_apps=sorted(apps),
            developers=sorted({d for d in apps.values() if d}),
            party=party,
            init_calls=init_calls.get(name, 0),
            strongbox_calls=strongbox_calls.get(name, 0),
        )
    return index


def build_party_map(results: Sequence[AppResult], min_component: int = 3) -> Dict[str, Optional[str]]:
    """Party of every package defined anywhere in the corpus; reachability needs non-init packages too."""
    defining: Dict[str, Dict[str, Optional[str]]] = {}
    for result in results:
        for package in result.defined_packages:
            defining.setdefault(package, {})[result.app_id] = result.developer
    return {name: _party(name, defining[name], min_component)[1] for name in sorted(defining)}


# Manifest

@dataclass
class ApkRecord:
    app_id: str
    developer: Optional[str]
    installs: Optional[int]
    genre: str
    version: str
    result_path: str
    scanned_at: str

    def __post_init__(self):
        if self.installs is not None and self.installs < 0:
            raise ValueError(f"installs must be >= 0 for {self.app_id}")

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


@dataclass
class CorpusManifest:
    apps: List[ApkRecord]
    package_index: Dict[str, PackageEntry]
    config_snapshot: Dict
    diagnostics: Dict[str, List[str]] = field(default_factory=dict)
    base_dir: Optional[Path] = None

    def to_dict(self) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config_snapshot": self.config_snapshot,
            "apps": [a.to_dict() for a in sorted(self.apps, key=lambda a: a.app_id)],
            "package_index": {name: entry.to_dict() for name, entry in sorted(self.package_index.items())},
            "diagnostics": {k: sorted(v) for k, v in sorted(self.diagnostics.items())},
        }

    def load_results(self) -> List[AppResult]:
        base = self.base_dir or Path(".")
        return [read_result(base / record.result_path) for record in sorted(self.apps, key=lambda a: a.app_id)]


def build_manifest(
    results_dir: Union[str, Path],
    config,
    metadata: Optional[Mapping[str, AppMetadata]] = None,
    manifest_dir: Optional[Union[str, Path]] = None,
    strict: bool = False,
) -> CorpusManifest:
    """
    Rebuilds the corpus manifest from the result files in ``results_dir``.

    Apps whose known install count is below ``config.min_installs_filter`` are dropped.

    Raises:
        EmptyCorpus: If no result file remains.
    """
    results_dir = Path(results_dir)
    manifest_dir = Path(manifest_dir) if manifest_dir else results_dir
    kept: List[Tuple[Path, AppResult]] = []
    below_threshold = []
    for path in result_files(results_dir):
        result = read_result(path)
        if metadata:
            apply_metadata(result, metadata)
        if result.installs is not None and result.installs < config.min_installs_filter:
            below_threshold.append(result.app_id)
            continue
        kept.append((path, result))
    if below_threshold:
        logger.info("dropped {} apps below {} installs", len(below_threshold), config.min_installs_filter)
    if not kept:
        raise EmptyCorpus(f"no result files in {results_dir}")

    results = [r for _, r in kept]
    package_index = classify_packages(results, config.obfuscation_min_component, strict=strict)
    apps = [
        ApkRecord(
            app_id=r.app_id,
            developer=r.developer,
            installs=r.installs,
            genre=r.genre,
            version=r.version,
            result_path=Path(os.path.relpath(path, manifest_dir)).as_posix(),
            scanned_at=r.scanned_at,
        )
        for path, r in kept
    ]
    diagnostics = {
        "missing_developer": sorted({r.app_id for r in results if not r.developer}),
        "party_withheld": sorted(name for name, e in package_index.items() if e.party is None),
        "below_install_threshold": sorted(below_threshold),
        "failed_apps": sorted(r.app_id for r in results if r.status is not None and r.status.failed),
    }
    return CorpusManifest(
        apps=apps,
        package_index=package_index,
        config_snapshot=config.snapshot(),
        diagnostics=diagnostics,
        base_dir=manifest_dir,
    )


def write_manifest(manifest: CorpusManifest, path: Union[str, Path]) -> Path:
    return write_json(path, manifest.to_dict())


def load_manifest(path: Union[str, Path]) -> CorpusManifest:
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise CorruptResult(f"cannot read manifest {path}: {err}")
    if record.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(record.get("schema_version"), SCHEMA_VERSION)
    return CorpusManifest(
        apps=[ApkRecord(**a) for a in record["apps"]],
        package_index={name: PackageEntry.from_dict(e) for name, e in record["package_index"].items()},
        config_snapshot=record["config_snapshot"],
        diagnostics=record.get("diagnostics", {}),
        base_dir=path.parent,
    )
