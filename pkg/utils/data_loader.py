from typing import Tuple, Dict, List, Any
from pathlib import Path
import json
import pandas as pd
from decouple import config

from keyscan import KeyScanError, load_report
from keyscan.benchstats import KEYSTORE_KINDS

REPORT_DIR = config("KEYSCAN_REPORT_DIR", default="out/report")
FIGURE_DIR = config("KEYSCAN_FIGURE_DIR", default="out/figures")
LINT_DIR = config("KEYSCAN_LINT_DIR", default=REPORT_DIR)

PERCENT_STYLE = {"font-weight": "bold", "color": "#FF2DD1"}


def _read_csv(path: Path, **kwargs) -> pd.DataFrame:
    try:
        return pd.read_csv(path, keep_default_na=False, **kwargs)
    except FileNotFoundError:
        raise RuntimeError(f"{path.name} not found in {path.parent}; run the keyscan pipeline first.")
    except Exception as err:
        raise RuntimeError(f"An error occurred while reading {path}: {err}")


def load_corpus_stats(report_dir: str = REPORT_DIR):
    try:
        return load_report(report_dir)
    except KeyScanError as err:
        raise RuntimeError(f"Could not load the corpus report: {err}")


def return_headline_metrics(stats) -> Dict[str, str]:
    """
    Picks the headline fractions shown as st.metric cards on the home page.
    """
    headline = {
        "Keystore apps": "keystore_apps",
        "Keystore apps (sensitive)": "keystore_apps_sensitive",
        "StrongBox apps": "strongbox_apps",
        "Third-party inits": "init_party.third",
    }
    return {
        label: f"{stats.metrics[key].percent:.2f}%"
        for label, key in headline.items()
        if key in stats.metrics
    }


def return_metrics_df(report_dir: str = REPORT_DIR) -> Tuple[pd.DataFrame, List[Dict[str, Any]]]:
    metrics_df = _read_csv(Path(report_dir) / "metrics.csv")
    metrics_col_defs = [
        {"headerName": "Metric", "field": "metric", "flex": 3, "minWidth": 220, "pinned": "left", "cellStyle": {"font-weight": "bold"}},
        {"headerName": "Numerator", "field": "numerator", "flex": 1, "minWidth": 90},
        {"headerName": "Denominator", "field": "denominator", "flex": 1, "minWidth": 100},
        {"headerName": "%", "field": "percent", "flex": 1, "minWidth": 70, "cellStyle": PERCENT_STYLE},
    ]
    return metrics_df, metrics_col_defs


def return_top_packages_df(report_dir: str = REPORT_DIR, table: str = "init") -> Tuple[pd.DataFrame, List[Dict[str, Any]]]:
    """
    Top third-party packages by keystore-init calls (``table="init"``) or
    StrongBox calls (``table="strongbox"``).
    """
    packages_df = _read_csv(Path(report_dir) / "top_packages.csv")
    packages_df = packages_df[packages_df["table"] == table].drop(columns=["table"]).reset_index(drop=True)
    packages_col_defs = [
        {"headerName": "#", "field": "rank", "flex": 1, "minWidth": 50, "pinned": "left"},
        {"headerName": "Package", "field": "package", "flex": 4, "minWidth": 200, "cellStyle": {"font-weight": "bold"}},
        {"headerName": "Calls", "field": "calls", "flex": 1, "minWidth": 70, "cellStyle": PERCENT_STYLE},
        {"headerName": "Apps", "field": "apps", "flex": 1, "minWidth": 70},
        {"headerName": "Developers", "field": "developers", "flex": 1, "minWidth": 100},
    ]
    return packages_df, packages_col_defs


def return_genre_df(report_dir: str = REPORT_DIR) -> Tuple[pd.DataFrame, List[Dict[str, Any]]]:
    genre_df = _read_csv(Path(report_dir) / "genre_breakdown.csv")
    genre_col_defs = [
        {"headerName": "Genre", "field": "genre", "flex": 2, "minWidth": 120, "pinned": "left", "cellStyle": {"font-weight": "bold"}},
        {"headerName": "Apps", "field": "apps", "flex": 1, "minWidth": 70},
        {"headerName": "Keystore", "field": "keystore_apps", "flex": 1, "minWidth": 80},
        {"headerName": "Keystore %", "field": "keystore_pct", "flex": 1, "minWidth": 90, "cellStyle": PERCENT_STYLE},
        {"headerName": "StrongBox", "field": "strongbox_apps", "flex": 1, "minWidth": 90},
        {"headerName": "StrongBox %", "field": "strongbox_pct", "flex": 1, "minWidth": 100, "cellStyle": PERCENT_STYLE},
    ]
    return genre_df, genre_col_defs


def return_auth_histogram_df(report_dir: str = REPORT_DIR) -> Tuple[pd.DataFrame, List[Dict[str, Any]]]:
    auth_df = _read_csv(Path(report_dir) / "auth_histogram.csv")
    auth_col_defs = [
        {"headerName": "Validity", "field": "bucket", "flex": 2, "minWidth": 100, "pinned": "left"},
        {"headerName": "Keys", "field": "numerator", "flex": 1, "minWidth": 70},
        {"headerName": "Of", "field": "denominator", "flex": 1, "minWidth": 70},
        {"headerName": "%", "field": "percent", "flex": 1, "minWidth": 70, "cellStyle": PERCENT_STYLE},
    ]
    return auth_df, auth_col_defs


def return_cipher_df(report_dir: str = REPORT_DIR) -> Tuple[pd.DataFrame, List[Dict[str, Any]]]:
    cipher_df = _read_csv(Path(report_dir) / "cipher_distribution.csv")
    cipher_col_defs = [
        {"headerName": "Provider", "field": "provider", "flex": 2, "minWidth": 130, "pinned": "left"},
        {"headerName": "Cipher", "field": "cipher", "flex": 3, "minWidth": 180, "cellStyle": {"font-weight": "bold"}},
        {"headerName": "Calls", "field": "numerator", "flex": 1, "minWidth": 70},
        {"headerName": "%", "field": "percent", "flex": 1, "minWidth": 70, "cellStyle": PERCENT_STYLE},
    ]
    return cipher_df, cipher_col_defs


def return_lint_df(lint_dir: str = LINT_DIR) -> Tuple[pd.DataFrame, List[Dict[str, Any]]]:
    """lint_findings.csv as written by `keyscan lint --out`; an empty frame when lint has not run."""
    path = Path(lint_dir) / "lint_findings.csv"
    if path.exists():
        lint_df = _read_csv(path)
    else:
        lint_df = pd.DataFrame(columns=["app_id", "key_ref", "rule_id", "severity", "message"])
    lint_col_defs = [
        {"headerName": "App", "field": "app_id", "flex": 2, "minWidth": 140, "pinned": "left", "cellStyle": {"font-weight": "bold"}},
        {"headerName": "Rule", "field": "rule_id", "flex": 1, "minWidth": 60},
        {"headerName": "Severity", "field": "severity", "flex": 1, "minWidth": 80},
        {"headerName": "Finding", "field": "message", "flex": 5, "minWidth": 250},
        {"headerName": "Key", "field": "key_ref", "flex": 4, "minWidth": 200},
    ]
    return lint_df, lint_col_defs


def load_payload_series(figure_dir: str = FIGURE_DIR) -> pd.DataFrame:
    """All runtime-vs-payload series stacked into one frame, one row per benchmark group."""
    frames = [
        _read_csv(Path(figure_dir) / f"payload_{kind}.csv")
        for kind in KEYSTORE_KINDS
        if (Path(figure_dir) / f"payload_{kind}.csv").exists()
    ]
    if not frames:
        raise RuntimeError(f"No payload series in {figure_dir}; run `keyscan benchstats` first.")
    return pd.concat(frames, ignore_index=True)


def load_device_year_series(figure_dir: str = FIGURE_DIR) -> pd.DataFrame:
    path = Path(figure_dir) / "device_year_evolution.csv"
    if not path.exists():
        return pd.DataFrame()
    return _read_csv(path)


def load_comparison_table(figure_dir: str = FIGURE_DIR) -> pd.DataFrame:
    """comparison_table.csv as text cells: device, operation, algorithm, MiB, TEE, SE."""
    return _read_csv(Path(figure_dir) / "comparison_table.csv", dtype=str)


def load_figure_metadata(figure_dir: str = FIGURE_DIR) -> Dict[str, Any]:
    path = Path(figure_dir) / "metadata.json"
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))
