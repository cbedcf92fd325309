import json

import pandas as pd
import pytest
from click.testing import CliRunner

from keyscan.cli import main
from keyscan.corpus import load_manifest


def _invoke(*args):
    result = CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)
    return result


def _run_pipeline(corpus, out):
    results, manifest, report, lint = out / "results", out / "manifest.json", out / "report", out / "lint"
    steps = [
        ("scan", corpus.apps_dir, "--corpus", "--out", results, "--metadata", corpus.metadata),
        ("corpus", "reach", results, "--metadata", corpus.metadata),
        ("corpus", "classify-packages", results, "--metadata", corpus.metadata, "--manifest", manifest),
        ("corpus", "stats", manifest, "--out", report, "--labels", corpus.labels),
        ("lint", manifest, "--out", lint),
    ]
    for step in steps:
        result = _invoke(*step)
        assert result.exit_code == 0, (step, result.output)
    return manifest, report, lint


def _frac(table, key):
    return table[key]["numerator"], table[key]["denominator"]


@pytest.fixture
def pipeline(corpus, tmp_path):
    return _run_pipeline(corpus, tmp_path / "run")


def test_corpus_metrics(pipeline):
    _, report, _ = pipeline
    stats = json.loads((report / "report.json").read_text(encoding="utf-8"))
    metrics = stats["metrics"]
    assert _frac(metrics, "keystore_apps") == (5, 6)
    assert _frac(metrics, "keystore_apps_sensitive") == (4, 4)
    assert _frac(metrics, "strongbox_apps_sensitive") == (3, 4)
    assert _frac(metrics, "strongbox_apps") == (4, 5)
    assert _frac(metrics, "strongbox_true") == (1, 4)
    assert _frac(metrics, "strongbox_false") == (3, 4)
    assert _frac(metrics, "strongbox_requested_apps") == (1, 4)
    assert [_frac(metrics, f"init_party.{p}") for p in ("first", "third", "excluded-obfuscated", "withheld")] == [
        (3, 7), (3, 7), (1, 7), (0, 7),
    ]
    assert [_frac(metrics, f"strongbox_party.{p}") for p in ("first", "third", "excluded-obfuscated")] == [
        (1, 5), (3, 5), (1, 5),
    ]
    assert _frac(metrics, "auth_required") == (3, 7)
    assert _frac(metrics, "randomized_encryption_disabled") == (2, 7)
    assert _frac(metrics, "randomized_encryption_false_share") == (2, 2)
    assert _frac(metrics, "attestation") == (1, 7)
    assert _frac(metrics, "init_reachable") == (6, 7)
    assert metrics["keystore_apps"]["percent"] == 83.33

    counts = stats["counts"]
    assert counts["init_calls"] == 7
    assert counts["strongbox_unresolved_args"] == 1
    assert counts["strongbox_unresolved_only_apps"] == 1
    assert counts["unreachable_sites"] == 3
    assert (counts["key_configs"], counts["partial_key_configs"]) == (6, 0)
    assert stats["lint_counts"] == {"R1": 2, "R2": 2, "R3": 0, "R4": 0, "R5": 0, "R6": 0}


def test_corpus_distributions(pipeline):
    _, report, _ = pipeline
    stats = json.loads((report / "report.json").read_text(encoding="utf-8"))
    purposes = stats["purpose_distribution"]
    assert _frac(purposes, "ENCRYPT+DECRYPT") == (5, 6)
    assert _frac(purposes, "SIGN+VERIFY") == (1, 6)
    auth = stats["auth_histogram"]
    assert (_frac(auth, "per-use"), _frac(auth, "5 s"), _frac(auth, "1 h")) == ((2, 3), (1, 3), (0, 3))
    ciphers = stats["cipher_distribution"]
    assert {k: _frac(ciphers, k) for k in ciphers} == {"AES": (2, 6), "EC": (1, 6), "RSA": (3, 6)}
    assert {k: _frac(stats["software_cipher_distribution"], k) for k in stats["software_cipher_distribution"]} == {
        "3DES": (1, 1),
    }
    assert stats["top_packages"] == [{"package": "com.appsflyer.internal", "calls": 3, "apps": 3, "developers": 2}]

    genres = pd.read_csv(report / "genre_breakdown.csv")
    assert genres["genre"].tolist() == ["COMMUNICATION", "FINANCE", "GAMES", "NEWS", "PRODUCTIVITY"]
    finance = genres.set_index("genre").loc["FINANCE"]
    assert (finance["apps"], finance["keystore_apps"], finance["strongbox_apps"]) == (2, 2, 2)
    assert genres.set_index("genre").loc["NEWS", "keystore_apps"] == 0


def test_manifest_package_index(pipeline):
    manifest = load_manifest(pipeline[0])
    assert [a.app_id for a in manifest.apps] == [
        "alpha.notes", "alpha.wallet", "beta.bank", "delta.news", "epsilon.chat", "gamma.game",
    ]
    parties = {name: entry.party for name, entry in manifest.package_index.items()}
    assert parties == {
        "com.alpha.shared.keys": "first",
        "com.appsflyer.internal": "third",
        "com.betabank.security": "first",
        "o8": "excluded-obfuscated",
    }
    appsflyer = manifest.package_index["com.appsflyer.internal"]
    assert appsflyer.referencing_apps == ["alpha.notes", "alpha.wallet", "beta.bank"]
    assert appsflyer.developers == ["Alpha Labs", "Beta Bank"]
    assert manifest.diagnostics["below_install_threshold"] == ["zeta.tiny"]
    assert manifest.diagnostics["failed_apps"] == []


def test_lint_findings(pipeline):
    findings = pd.read_csv(pipeline[2] / "lint_findings.csv")
    assert list(zip(findings["app_id"], findings["rule_id"])) == [
        ("alpha.notes", "R1"), ("alpha.notes", "R2"), ("alpha.wallet", "R1"), ("alpha.wallet", "R2"),
    ]


def test_rerun_is_byte_identical(corpus, tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    _run_pipeline(corpus, first)
    _run_pipeline(corpus, second)
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    assert len(files) > 10
    for rel in files:
        assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel


def test_prefilter_command(corpus, tmp_path):
    out = tmp_path / "prefilter.json"
    result = _invoke("prefilter", corpus.apps_dir, "--out", out)
    assert result.exit_code == 0
    assert result.stdout.split() == ["alpha.notes", "alpha.wallet", "beta.bank", "epsilon.chat", "gamma.game", "zeta.tiny"]
    assert json.loads(out.read_text(encoding="utf-8"))["delta.news"]["matched"] is False


def test_scan_partial_failure_exit_code(corpus, tmp_path):
    broken = tmp_path / "broken.app"
    broken.mkdir()
    (broken / "notes.txt").write_text("AndroidKeyStore\n", encoding="utf-8")
    result = _invoke("scan", corpus.apps_dir / "alpha.notes", broken, "--out", tmp_path / "results")
    assert result.exit_code == 2
    assert _invoke("scan", broken, "--out", tmp_path / "results").exit_code == 1


def test_config_error_exit_code(corpus, tmp_path):
    result = _invoke("--bfs-node-limit", "0", "prefilter", corpus.apps_dir, "--out", tmp_path / "p.json")
    assert result.exit_code == 1
    assert not (tmp_path / "p.json").exists()


def test_labels_commands(corpus, tmp_path):
    assert _invoke("labels", "classify", corpus.labels, "--out", tmp_path / "classes.csv").exit_code == 0
    assert (tmp_path / "classes.csv").read_text(encoding="utf-8") == (
        "app_id,sensitivity\n"
        "alpha.notes,sensitive\n"
        "alpha.wallet,sensitive\n"
        "beta.bank,sensitive\n"
        "delta.news,no-label\n"
        "epsilon.chat,sensitive\n"
        "gamma.game,benign\n"
    )
    assert _invoke("labels", "ingest", corpus.labels, "--out", tmp_path / "labels.json").exit_code == 0
    records = json.loads((tmp_path / "labels.json").read_text(encoding="utf-8"))
    assert [r["app_id"] for r in records][:2] == ["alpha.notes", "alpha.wallet"]


def test_benchstats_command(tmp_path):
    log = tmp_path / "bench.csv"
    rows = ["device,device_year,keystore_kind,operation,algorithm,payload_bytes,iteration,elapsed_seconds"]
    for kind, values in (("tee", [0.36, 0.42, 0.48]), ("strongbox", [15.33, 15.43, 15.53])):
        rows += [f"Pixel 8,,{kind},encrypt,AES,1048576,{i},{v}" for i, v in enumerate(values)]
    log.write_text("\n".join(rows) + "\n", encoding="utf-8")

    result = _invoke("benchstats", log, "--out", tmp_path / "figures")
    assert result.exit_code == 0
    figures = tmp_path / "figures"
    assert (figures / "comparison_table.txt").read_text(encoding="utf-8").splitlines()[-1] == "1 | 0.42 ± 0.06 | 15.43 ± 0.10"
    evolution = pd.read_csv(figures / "device_year_evolution.csv")
    assert set(evolution["device_year"]) == {2023}
    assert (figures / "payload_strongbox.csv").exists()


def test_bad_bench_log_exit_code(tmp_path):
    log = tmp_path / "bench.csv"
    log.write_text("device,elapsed\nPixel,1\n", encoding="utf-8")
    assert _invoke("benchstats", log, "--out", tmp_path / "figures").exit_code == 1
