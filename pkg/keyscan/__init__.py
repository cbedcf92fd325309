from .config import (
    Config,
    load_config,
    with_overrides
)

from .errors import (
    KeyScanError,
    ConfigError,
    MalformedSmali,
    EmptyApp,
    BadDescriptor,
    DuplicateApiId,
    UnknownMethod,
    MissingDeveloper,
    SchemaVersionMismatch,
    CorruptResult,
    MalformedRecord,
    EmptyCorpus,
    UnwritableOutput,
    DuplicateSample,
    BadRow,
    ScanTimeout
)

from .smali_ir import (
    MethodSignature,
    SmaliMethod,
    SmaliClass,
    AppIR,
    parse_instruction,
    parse_smali_file,
    parse_app_dir
)

from .sigdb import (
    ApiSignature,
    SignatureDb,
    ApiCallSite,
    PrefilterResult,
    load_signature_db,
    find_call_sites,
    keyword_prefilter
)

from .slicer import (
    ResolvedValue,
    BasicBlockIndex,
    resolve_args,
    resolve_sites,
    decode_purposes,
    purpose_label
)

from .callgraph import (
    CallGraph,
    CallTrace,
    ReachabilityResult,
    build_call_graph,
    explore_ancestors,
    evaluate_trace,
    backward_reachability
)

from .corpus import (
    AppMetadata,
    AppResult,
    StageStatus,
    PackageEntry,
    CorpusManifest,
    is_obfuscated,
    read_app_metadata,
    persist_result,
    load_result,
    load_results,
    classify_packages,
    build_party_map,
    build_manifest,
    write_manifest,
    load_manifest
)

from .labels import (
    DataSafetyLabel,
    ingest_labels,
    classify_sensitivity
)

from .analytics import (
    KeyConfig,
    LintFinding,
    Fraction,
    CorpusStats,
    assemble_key_configs,
    lint_config,
    lint_results,
    compute_stats,
    randomized_encryption_estimate
)

from .report import (
    emit_report,
    emit_lint,
    load_report
)

from .benchstats import (
    BenchSample,
    BenchSummary,
    parse_bench_log,
    summarize,
    slowdown_ratios,
    comparison_table,
    comparison_frame,
    emit_figure_data
)

from .pipeline import (
    Deadline,
    scan_app,
    run_batch,
    reach_corpus,
    exit_code
)


__all__ = [
    "Config",
    "load_config",
    "with_overrides",
    "KeyScanError",
    "ConfigError",
    "MalformedSmali",
    "EmptyApp",
    "BadDescriptor",
    "DuplicateApiId",
    "UnknownMethod",
    "MissingDeveloper",
    "SchemaVersionMismatch",
    "CorruptResult",
    "MalformedRecord",
    "EmptyCorpus",
    "UnwritableOutput",
    "DuplicateSample",
    "BadRow",
    "ScanTimeout",
    "MethodSignature",
    "SmaliMethod",
    "SmaliClass",
    "AppIR",
    "parse_instruction",
    "parse_smali_file",
    "parse_app_dir",
    "ApiSignature",
    "SignatureDb",
    "ApiCallSite",
    "PrefilterResult",
    "load_signature_db",
    "find_call_sites",
    "keyword_prefilter",
    "ResolvedValue",
    "BasicBlockIndex",
    "resolve_args",
    "resolve_sites",
    "decode_purposes",
    "purpose_label",
    "CallGraph",
    "CallTrace",
    "ReachabilityResult",
    "build_call_graph",
    "explore_ancestors",
    "evaluate_trace",
    "backward_reachability",
    "AppMetadata",
    "AppResult",
    "StageStatus",
    "PackageEntry",
    "CorpusManifest",
    "is_obfuscated",
    "read_app_metadata",
    "persist_result",
    "load_result",
    "load_results",
    "classify_packages",
    "build_party_map",
    "build_manifest",
    "write_manifest",
    "load_manifest",
    "DataSafetyLabel",
    "ingest_labels",
    "classify_sensitivity",
    "KeyConfig",
    "LintFinding",
    "Fraction",
    "CorpusStats",
    "assemble_key_configs",
    "lint_config",
    "lint_results",
    "compute_stats",
    "randomized_encryption_estimate",
    "emit_report",
    "emit_lint",
    "load_report",
    "BenchSample",
    "BenchSummary",
    "parse_bench_log",
    "summarize",
    "slowdown_ratios",
    "comparison_table",
    "comparison_frame",
    "emit_figure_data",
    "Deadline",
    "scan_app",
    "run_batch",
    "reach_corpus",
    "exit_code"]
