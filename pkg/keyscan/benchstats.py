"""
Keystore benchmark logs: validation, per-group mean/std, slowdown ratios and
figure data.
"""

import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from .config import DATA_DIR
from .corpus import write_csv, write_json
from .errors import BadRow, DuplicateSample, UnwritableOutput

LOG_HEADER = [
    "device", "device_year", "keystore_kind", "operation", "algorithm", "payload_bytes", "iteration", "elapsed_seconds",
]
KEYSTORE_KINDS = ("software", "tee", "strongbox")
OPERATIONS = ("keygen", "encrypt", "sign")
KIND_LABELS = {"software": "Software", "tee": "TEE", "strongbox": "SE"}
STD_ESTIMATOR = "sample standard deviation (n-1 denominator)"
DEVICE_YEARS_PATH = DATA_DIR / "device_years.csv"
MIB = 1024 * 1024


@dataclass(frozen=True)
class BenchSample:
    device: str
    device_year: Optional[int]
    keystore_kind: str
    operation: str
    algorithm: str
    payload_bytes: int
    iteration: int
    elapsed_seconds: float

    @property
    def key(self) -> Tuple:
        return (self.device, self.keystore_kind, self.operation, self.algorithm, self.payload_bytes, self.iteration)

    @property
    def group(self) -> Tuple:
        return (self.device, self.keystore_kind, self.operation, self.algorithm, self.payload_bytes)


@dataclass(frozen=True)
class BenchSummary:
    device: str
    keystore_kind: str
    operation: str
    algorithm: str
    payload_bytes: int
    n: int
    mean_seconds: float
    std_seconds: Optional[float] = None
    device_year: Optional[int] = None

    @property
    def group(self) -> Tuple:
        return (self.device, self.keystore_kind, self.operation, self.algorithm, self.payload_bytes)

    def render(self) -> str:
        return render_mean_std(self.mean_seconds, self.std_seconds)


def render_mean_std(mean: float, std: Optional[float]) -> str:
    if std is None:
        return f"{mean:.2f}"
    return f"{mean:.2f} ± {std:.2f}"


def mib_label(payload_bytes: int) -> str:
    return f"{round(payload_bytes / MIB, 2):g}"


def _row_value(row, column: str, line: int, cast, check=None, reason: str = ""):
    raw = row[column].strip()
    try:
        value = cast(raw)
    except ValueError:
        raise BadRow(line, f"{column} {raw!r} is not a valid {cast.__name__}")
    if check is not None and not check(value):
        raise BadRow(line, reason or f"invalid {column} {raw!r}")
    return value


def parse_bench_log(path: Union[str, Path]) -> List[BenchSample]:
    """
    Reads and validates a benchmark log CSV.

    Args:
        path: CSV with header ``device,device_year,keystore_kind,operation,algorithm,payload_bytes,iteration,elapsed_seconds``.

    Returns:
        List[BenchSample]: One sample per row, in file order.

    Raises:
        BadRow: On a wrong header or an invalid field; ``line`` is the 1-based file line.
        DuplicateSample: If two rows share (device, keystore_kind, operation, algorithm, payload_bytes, iteration).
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise BadRow(1, "empty log")
    if list(df.columns) != LOG_HEADER:
        raise BadRow(1, f"header must be {','.join(LOG_HEADER)}")

    samples = []
    seen: Dict[Tuple, int] = {}
    for idx, row in df.iterrows():
        line = int(idx) + 2
        device = row["device"].strip()
        algorithm = row["algorithm"].strip()
        if not device or not algorithm:
            raise BadRow(line, "device and algorithm must be non-empty")
        kind = row["keystore_kind"].strip()
        if kind not in KEYSTORE_KINDS:
            raise BadRow(line, f"keystore_kind {kind!r} not in {KEYSTORE_KINDS}")
        operation = row["operation"].strip()
        if operation not in OPERATIONS:
            raise BadRow(line, f"operation {operation!r} not in {OPERATIONS}")
        year = row["device_year"].strip()
        sample = BenchSample(
            device=device,
            device_year=_row_value(row, "device_year", line, int) if year else None,
            keystore_kind=kind,
            operation=operation,
            algorithm=algorithm,
            payload_bytes=_row_value(row, "payload_bytes", line, int, lambda v: v >= 0, "payload_bytes must be >= 0"),
            iteration=_row_value(row, "iteration", line, int),
            elapsed_seconds=_row_value(
                row, "elapsed_seconds", line, float, lambda v: math.isfinite(v) and v > 0, "elapsed_seconds must be > 0"
            ),
        )
        if sample.key in seen:
            raise DuplicateSample(sample.key, line)
        seen[sample.key] = line
        samples.append(sample)
    return samples


def load_device_years(path: Optional[Union[str, Path]] = None) -> Dict[str, int]:
    df = pd.read_csv(path or DEVICE_YEARS_PATH, dtype={"device": str, "device_year": int})
    return dict(zip(df["device"], df["device_year"]))


def fill_device_years(samples: Sequence[BenchSample], lookup: Dict[str, int]) -> List[BenchSample]:
    return [
        replace(s, device_year=lookup[s.device]) if s.device_year is None and s.device in lookup else s
        for s in samples
    ]


def summarize(samples: Sequence[BenchSample]) -> List[BenchSummary]:
    """Mean and sample std per (device, keystore_kind, operation, algorithm, payload_bytes)."""
    if not samples:
        raise ValueError("summarize needs at least one sample")
    groups: Dict[Tuple, List[BenchSample]] = {}
    for sample in samples:
        groups.setdefault(sample.group, []).append(sample)

    summaries = []
    for key in sorted(groups):
        members = groups[key]
        values = np.array(sorted(s.elapsed_seconds for s in members), dtype=float)
        years = {s.device_year for s in members if s.device_year is not None}
        summaries.append(
            BenchSummary(
                *key,
                n=len(values),
                mean_seconds=float(np.mean(values)),
                std_seconds=float(np.std(values, ddof=1)) if len(values) >= 2 else None,
                device_year=min(years) if years else None,
            )
        )
    return summaries


@dataclass(frozen=True)
class SlowdownRatio:
    device: str
    operation: str
    algorithm: str
    payload_bytes: int
    keystore_kind: str
    baseline_kind: str
    ratio: float


def slowdown_ratios(summaries: Sequence[BenchSummary], baseline_kind: str = "tee") -> List[SlowdownRatio]:
    """mean(group) / mean(baseline group) for every group whose baseline exists; others are skipped with a warning."""
    baselines = {
        (s.device, s.operation, s.algorithm, s.payload_bytes): s for s in summaries if s.keystore_kind == baseline_kind
    }
    ratios = []
    for summary in summaries:
        key = (summary.device, summary.operation, summary.algorithm, summary.payload_bytes)
        baseline = baselines.get(key)
        if baseline is None:
            logger.warning("no {} baseline for {} {}", baseline_kind, summary.keystore_kind, key)
            continue
        ratios.append(
            SlowdownRatio(*key, keystore_kind=summary.keystore_kind, baseline_kind=baseline_kind,
                          ratio=summary.mean_seconds / baseline.mean_seconds)
        )
    return ratios


def _comparison_sections(summaries, left, right) -> Dict[Tuple, Dict[int, Dict[str, BenchSummary]]]:
    sections: Dict[Tuple, Dict[int, Dict[str, BenchSummary]]] = {}
    for s in summaries:
        if s.keystore_kind in (left, right):
            sections.setdefault((s.device, s.operation, s.algorithm), {}).setdefault(s.payload_bytes, {})[s.keystore_kind] = s
    return sections


def comparison_table(summaries: Sequence[BenchSummary], left: str = "tee", right: str = "strongbox") -> List[str]:
    """Rows ``MiB | TEE | SE`` per (device, operation, algorithm) section."""
    sections = _comparison_sections(summaries, left, right)
    lines = []
    for (device, operation, algorithm) in sorted(sections):
        lines.append(f"# {device} {operation} {algorithm}")
        lines.append(f"MiB | {KIND_LABELS[left]} | {KIND_LABELS[right]}")
        for payload in sorted(sections[(device, operation, algorithm)]):
            cells = sections[(device, operation, algorithm)][payload]
            rendered = [cells[k].render() if k in cells else "-" for k in (left, right)]
            lines.append(" | ".join([mib_label(payload), *rendered]))
    return lines


def comparison_frame(summaries: Sequence[BenchSummary], left: str = "tee", right: str = "strongbox") -> pd.DataFrame:
    """The comparison table with one row per (device, operation, algorithm, payload)."""
    sections = _comparison_sections(summaries, left, right)
    columns = ["device", "operation", "algorithm", "MiB", KIND_LABELS[left], KIND_LABELS[right]]
    rows = []
    for (device, operation, algorithm) in sorted(sections):
        for payload in sorted(sections[(device, operation, algorithm)]):
            cells = sections[(device, operation, algorithm)][payload]
            rendered = [cells[k].render() if k in cells else "-" for k in (left, right)]
            rows.append([device, operation, algorithm, mib_label(payload), *rendered])
    return pd.DataFrame(rows, columns=columns)


def _summary_frame(summaries: Sequence[BenchSummary]) -> pd.DataFrame:
    rows = [
        {
            "device": s.device,
            "device_year": s.device_year if s.device_year is not None else "",
            "keystore_kind": s.keystore_kind,
            "operation": s.operation,
            "algorithm": s.algorithm,
            "payload_bytes": s.payload_bytes,
            "payload_mib": mib_label(s.payload_bytes),
            "n": s.n,
            "mean_seconds": repr(s.mean_seconds),
            "std_seconds": repr(s.std_seconds) if s.std_seconds is not None else "",
            "mean_std": s.render(),
        }
        for s in summaries
    ]
    columns = [
        "device", "device_year", "keystore_kind", "operation", "algorithm", "payload_bytes",
        "payload_mib", "n", "mean_seconds", "std_seconds", "mean_std",
    ]
    return pd.DataFrame(rows, columns=columns)


def emit_figure_data(
    summaries: Sequence[BenchSummary], out_dir: Union[str, Path], baseline_kind: str = "tee"
) -> List[Path]:
    """
    Writes figure series: one runtime-vs-payload CSV per keystore kind, the
    runtime-vs-device-year CSV, the comparison table (text and CSV) and
    metadata.json.

    Values are raw seconds; log scaling is left to the plot.
    """
    out_dir = Path(out_dir)
    written = []
    for kind in KEYSTORE_KINDS:
        series = [s for s in summaries if s.keystore_kind == kind]
        if series:
            written.append(write_csv(out_dir / f"payload_{kind}.csv", _summary_frame(series)))

    dated = sorted(
        (s for s in summaries if s.device_year is not None),
        key=lambda s: (s.device_year, s.device, s.keystore_kind, s.operation, s.algorithm, s.payload_bytes),
    )
    if dated:
        written.append(write_csv(out_dir / "device_year_evolution.csv", _summary_frame(dated)))
    else:
        logger.warning("no device_year values; device_year_evolution.csv not written")

    table = out_dir / "comparison_table.txt"
    try:
        table.write_text("\n".join(comparison_table(summaries)) + "\n", encoding="utf-8")
    except OSError as err:
        raise UnwritableOutput(f"cannot write {table}: {err}")
    written.append(table)
    written.append(write_csv(out_dir / "comparison_table.csv", comparison_frame(summaries)))

    ratios = slowdown_ratios(summaries, baseline_kind)
    written.append(
        write_json(
            out_dir / "metadata.json",
            {
                "std_estimator": STD_ESTIMATOR,
                "groups": len(summaries),
                "baseline_kind": baseline_kind,
                "ratios": [asdict(r) for r in ratios],
            },
        )
    )
    return written
