"""Report files: report.json plus one CSV per metric table."""

import json
from pathlib import Path
from typing import List, Sequence, Union

import pandas as pd

from .analytics import CorpusStats, Fraction, LintFinding
from .corpus import write_csv, write_json
from .errors import CorruptResult

REPORT_JSON = "report.json"
FRACTION_COLUMNS = ["numerator", "denominator", "percent"]


def _fraction_frame(key_column: str, rows) -> pd.DataFrame:
    records = [{key_column: key, **_fraction_cells(value)} for key, value in rows]
    return pd.DataFrame(records, columns=[key_column, *FRACTION_COLUMNS])


def _fraction_cells(value: Fraction) -> dict:
    return {"numerator": value.numerator, "denominator": value.denominator, "percent": f"{value.percent:.2f}"}


def metrics_frame(stats: CorpusStats) -> pd.DataFrame:
    return _fraction_frame("metric", stats.all_fractions())


def top_packages_frame(stats: CorpusStats) -> pd.DataFrame:
    rows = [{"rank": i, "table": "init", **row.to_dict()} for i, row in enumerate(stats.top_packages, start=1)]
    rows += [
        {"rank": i, "table": "strongbox", **row.to_dict()} for i, row in enumerate(stats.top_strongbox_packages, start=1)
    ]
    return pd.DataFrame(rows, columns=["table", "rank", "package", "calls", "apps", "developers"])


def genre_frame(stats: CorpusStats) -> pd.DataFrame:
    rows = [
        {
            "genre": row.genre,
            "apps": row.apps,
            "keystore_apps": row.keystore.numerator,
            "keystore_pct": f"{row.keystore.percent:.2f}",
            "strongbox_apps": row.strongbox.numerator,
            "strongbox_pct": f"{row.strongbox.percent:.2f}",
        }
        for row in stats.genre_breakdown
    ]
    return pd.DataFrame(rows, columns=["genre", "apps", "keystore_apps", "keystore_pct", "strongbox_apps", "strongbox_pct"])


def cipher_frame(stats: CorpusStats) -> pd.DataFrame:
    rows = [("AndroidKeyStore", k, v) for k, v in stats.cipher_distribution.items()]
    rows += [("software", k, v) for k, v in stats.software_cipher_distribution.items()]
    records = [{"provider": p, "cipher": k, **_fraction_cells(v)} for p, k, v in rows]
    return pd.DataFrame(records, columns=["provider", "cipher", *FRACTION_COLUMNS])


def lint_frame(findings: Sequence[LintFinding]) -> pd.DataFrame:
    return pd.DataFrame([f.to_dict() for f in findings], columns=["app_id", "key_ref", "rule_id", "severity", "message"])


def emit_report(stats: CorpusStats, out_dir: Union[str, Path], formats: Sequence[str] = ("json", "csv")) -> List[Path]:
    """
    Writes report.json and the CSV tables into ``out_dir``.

    Raises:
        UnwritableOutput: If a file cannot be written.
    """
    out_dir = Path(out_dir)
    written = []
    if "json" in formats:
        written.append(write_json(out_dir / REPORT_JSON, stats.to_dict()))
    if "csv" in formats:
        written.append(write_csv(out_dir / "metrics.csv", metrics_frame(stats)))
        written.append(write_csv(out_dir / "top_packages.csv", top_packages_frame(stats)))
        written.append(write_csv(out_dir / "genre_breakdown.csv", genre_frame(stats)))
        written.append(write_csv(out_dir / "auth_histogram.csv", _fraction_frame("bucket", stats.auth_histogram.items())))
        written.append(write_csv(out_dir / "cipher_distribution.csv", cipher_frame(stats)))
    return written


def emit_lint(findings: Sequence[LintFinding], out_dir: Union[str, Path]) -> Path:
    return write_csv(Path(out_dir) / "lint_findings.csv", lint_frame(findings))


def load_report(path: Union[str, Path]) -> CorpusStats:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_JSON
    try:
        return CorpusStats.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, KeyError) as err:
        raise CorruptResult(f"cannot read report {path}: {err}")
