"""
Stage orchestration: prefilter -> scan -> slice -> graph -> reach.

Each app is scanned independently under a cooperative deadline; a timeout or
error becomes the app's final StageStatus instead of aborting the batch.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from loguru import logger

from .callgraph import build_call_graph, evaluate_trace, explore_ancestors
from .config import Config
from .corpus import (
    AppMetadata, AppResult, StageStatus, apply_metadata, build_party_map, input_timestamp, load_results,
    persist_result,
)
from .errors import KeyScanError, ScanTimeout
from .sigdb import PrefilterResult, SignatureDb, find_call_sites, keyword_prefilter, load_signature_db
from .slicer import resolve_sites
from .smali_ir import parse_app_dir

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


class Deadline:
    """Per-app time budget checked between units of work."""

    def __init__(self, timeout_seconds: float, clock: Callable[[], float] = time.monotonic):
        self.limit = timeout_seconds
        self.clock = clock
        self.started = clock()

    def elapsed(self) -> float:
        return self.clock() - self.started

    def check(self, stage: str):
        if self.elapsed() > self.limit:
            raise ScanTimeout(stage, self.limit)


def discover_apps(corpus_dir: Union[str, Path]) -> List[Path]:
    """Immediate subdirectories of a corpus directory, one apktool output per app."""
    return sorted(p for p in Path(corpus_dir).iterdir() if p.is_dir())


def prefilter_corpus(corpus_dir: Union[str, Path], needles: Sequence[str]) -> Dict[str, PrefilterResult]:
    return {app_dir.name: keyword_prefilter(app_dir, needles) for app_dir in discover_apps(corpus_dir)}


class _StageClock:
    def __init__(self, app_id: str, clock: Callable[[], float]):
        self.app_id = app_id
        self.clock = clock
        self.mark = clock()
        self.stages: List[StageStatus] = []

    def enter(self, stage: str, message: str = "") -> StageStatus:
        now = self.clock()
        status = StageStatus(self.app_id, stage, now - self.mark, message)
        self.mark = now
        self.stages.append(status)
        return status


def scan_app(
    app_dir: Union[str, Path],
    config: Config,
    db: Optional[SignatureDb] = None,
    metadata: Optional[Mapping[str, AppMetadata]] = None,
    clock: Callable[[], float] = time.monotonic,
) -> AppResult:
    """
    Runs every per-app stage on one apktool output directory.

    Args:
        app_dir: App directory; its name is the app_id.
        config (Config): Thresholds and needles.
        db (SignatureDb, optional): Loaded signature database.
        metadata (Mapping[str, AppMetadata], optional): Developer, installs and genre per app.
        clock: Monotonic clock; tests inject a fake one.

    Returns:
        AppResult: Result record whose ``status`` is done, timeout or error.
    """
    app_dir = Path(app_dir)
    db = db or load_signature_db(config.resolved_signature_db)
    result = AppResult(app_id=app_dir.name)
    if metadata:
        apply_metadata(result, metadata)

    deadline = Deadline(config.timeout_seconds, clock)
    stages = _StageClock(result.app_id, clock)
    try:
        stages.enter("prefilter")
        result.prefilter = keyword_prefilter(app_dir, config.needle_set, deadline)
        result.warnings.extend(result.prefilter.warnings)
        if result.prefilter.matched:
            stages.enter("scan")
            app = parse_app_dir(app_dir, result.app_id, deadline)
            result.warnings.extend(app.warnings)
            result.defined_packages = app.defined_packages()
            sites = find_call_sites(app, db)

            stages.enter("slice")
            result.call_sites = resolve_sites(app, sites, db, deadline)

            stages.enter("graph")
            graph = build_call_graph(app, config.cha_enabled)
            deadline.check("graph")

            stages.enter("reach")
            for method in sorted({site.caller for site in sites}, key=lambda m: m.render()):
                deadline.check("reach")
                result.call_traces.append(explore_ancestors(graph, method, config.bfs_node_limit))
            result.status = stages.enter("done")
        else:
            result.status = stages.enter("done", "no keyword match")
    except ScanTimeout as err:
        result.status = stages.enter("timeout", str(err))
    except KeyScanError as err:
        result.status = stages.enter("error", str(err))

    result.stages = stages.stages
    result.scanned_at = input_timestamp(p for p in app_dir.rglob("*") if p.is_file())
    logger.info(
        "{}: {} ({} sites, {:.2f}s)", result.app_id, result.status.stage, len(result.call_sites),
        sum(s.duration_seconds for s in result.stages),
    )
    return result


def _scan_and_persist(job: Tuple[str, Config, Optional[Mapping[str, AppMetadata]], str]) -> StageStatus:
    app_dir, config, metadata, out_dir = job
    result = scan_app(app_dir, config, metadata=metadata)
    persist_result(result, out_dir)
    return result.status


def run_batch(
    app_dirs: Sequence[Union[str, Path]],
    out_dir: Union[str, Path],
    config: Config,
    metadata: Optional[Mapping[str, AppMetadata]] = None,
    clock: Callable[[], float] = time.monotonic,
) -> List[StageStatus]:
    """Scans and persists every app; ``config.workers`` > 1 fans out over processes."""
    app_dirs = [Path(p) for p in app_dirs]
    if config.workers > 1 and len(app_dirs) > 1:
        jobs = [(str(p), config, metadata, str(out_dir)) for p in app_dirs]
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            statuses = list(executor.map(_scan_and_persist, jobs))
    else:
        db = load_signature_db(config.resolved_signature_db)
        statuses = []
        for app_dir in app_dirs:
            result = scan_app(app_dir, config, db, metadata, clock)
            persist_result(result, out_dir)
            statuses.append(result.status)
    return sorted(statuses, key=lambda s: s.app_id)


def reach_corpus(results_dir: Union[str, Path], config: Config, metadata: Optional[Mapping[str, AppMetadata]] = None) -> List[AppResult]:
    """
    Evaluates every recorded call trace against the corpus-wide party map and
    rewrites the result files with their reachability lists.
    """
    results = load_results(results_dir)
    if metadata:
        for result in results:
            apply_metadata(result, metadata)
    party_map = build_party_map(results, config.obfuscation_min_component)
    for result in results:
        traces = {trace.method: trace for trace in result.call_traces}
        result.reachability = [
            evaluate_trace(traces[site.caller], party_map, site.callsite_id)
            for site in result.call_sites
            if site.caller in traces
        ]
        persist_result(result, results_dir)
    reachable = sum(r.reachable for res in results for r in res.reachability)
    total = sum(len(res.reachability) for res in results)
    logger.info("reachability: {}/{} call sites reachable from first-party code", reachable, total)
    return results


def exit_code(statuses: Sequence[StageStatus]) -> int:
    """0 when every app finished, 2 when some timed out or failed, 1 when none finished."""
    failed = sum(1 for s in statuses if s.failed)
    if not failed:
        return EXIT_OK
    if failed == len(statuses):
        return EXIT_FATAL
    return EXIT_PARTIAL
