import json
import random

import pytest

from keyscan.benchstats import (
    LOG_HEADER, BenchSample, comparison_frame, comparison_table, emit_figure_data, fill_device_years, load_device_years,
    mib_label, parse_bench_log, slowdown_ratios, summarize,
)
from keyscan.errors import BadRow, DuplicateSample

MIB = 1024 * 1024


def _log(tmp_path, rows, header=None):
    path = tmp_path / "bench.csv"
    lines = [",".join(header or LOG_HEADER)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _row(kind="tee", elapsed=0.5, payload=MIB, iteration=0, device="Pixel 8", year="", operation="encrypt"):
    return [device, year, kind, operation, "AES", payload, iteration, elapsed]


def _sample(kind, elapsed, payload=MIB, iteration=0, device="Pixel 8", operation="encrypt", year=None, algorithm="AES"):
    return BenchSample(device, year, kind, operation, algorithm, payload, iteration, elapsed)


def test_parse_full_log(tmp_path):
    rows = [
        _row(kind, 0.1 + i, payload, i)
        for kind in ("tee", "strongbox")
        for payload in (0, MIB // 4, MIB // 2, MIB, 2 * MIB)
        for i in range(10)
    ]
    samples = parse_bench_log(_log(tmp_path, rows))
    assert len(samples) == 100
    assert samples[0] == BenchSample("Pixel 8", None, "tee", "encrypt", "AES", 0, 0, 0.1)


@pytest.mark.parametrize("row, column", [
    (_row(kind="hsm"), "keystore_kind"),
    (_row(operation="decrypt"), "operation"),
    (_row(elapsed=0), "elapsed_seconds"),
    (_row(elapsed="abc"), "elapsed_seconds"),
    (_row(payload=-1), "payload_bytes"),
    (_row(device=""), "device"),
    (_row(year="soon"), "device_year"),
])
def test_bad_rows(tmp_path, row, column):
    with pytest.raises(BadRow) as err:
        parse_bench_log(_log(tmp_path, [_row(iteration=5), row]))
    assert err.value.line == 3
    assert column in err.value.reason


def test_bad_header(tmp_path):
    with pytest.raises(BadRow) as err:
        parse_bench_log(_log(tmp_path, [_row()], header=LOG_HEADER[:-1] + ["seconds"]))
    assert err.value.line == 1


def test_duplicate_sample(tmp_path):
    with pytest.raises(DuplicateSample) as err:
        parse_bench_log(_log(tmp_path, [_row(elapsed=0.4), _row(elapsed=0.5)]))
    assert err.value.line == 3


def test_summary_mean_and_sample_std():
    (summary,) = summarize([_sample("tee", v, iteration=i) for i, v in enumerate([1.0, 2.0, 3.0])])
    assert summary.n == 3
    assert summary.mean_seconds == 2.0
    assert summary.std_seconds == 1.0
    assert summary.render() == "2.00 ± 1.00"


def test_single_sample_has_no_std():
    (summary,) = summarize([_sample("tee", 0.25)])
    assert summary.std_seconds is None
    assert summary.render() == "0.25"


def test_summaries_match_two_pass_formula():
    rng = random.Random(99)
    for _ in range(1000):
        values = [rng.uniform(0.001, 50.0) for _ in range(rng.randint(2, 30))]
        (summary,) = summarize([_sample("strongbox", v, iteration=i) for i, v in enumerate(values)])
        mean = sum(values) / len(values)
        variance = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
        assert summary.mean_seconds == pytest.approx(mean, rel=1e-9)
        assert summary.std_seconds == pytest.approx(variance ** 0.5, rel=1e-9)


def test_comparison_table():
    samples = [_sample("tee", v, iteration=i) for i, v in enumerate([0.36, 0.42, 0.48])]
    samples += [_sample("strongbox", v, iteration=i) for i, v in enumerate([15.33, 15.43, 15.53])]
    assert comparison_table(summarize(samples)) == [
        "# Pixel 8 encrypt AES",
        "MiB | TEE | SE",
        "1 | 0.42 ± 0.06 | 15.43 ± 0.10",
    ]


def test_comparison_frame_keeps_spaced_names():
    samples = [
        _sample("tee", 0.4, device="Galaxy S23 Ultra", algorithm="AES GCM NoPadding"),
        _sample("strongbox", 9.0, payload=MIB // 4, device="Galaxy S23 Ultra", algorithm="AES GCM NoPadding"),
    ]
    frame = comparison_frame(summarize(samples))
    assert list(frame.columns) == ["device", "operation", "algorithm", "MiB", "TEE", "SE"]
    assert frame.values.tolist() == [
        ["Galaxy S23 Ultra", "encrypt", "AES GCM NoPadding", "0.25", "-", "9.00"],
        ["Galaxy S23 Ultra", "encrypt", "AES GCM NoPadding", "1", "0.40", "-"],
    ]


def test_slowdown_ratios():
    summaries = summarize([
        _sample("tee", 0.42),
        _sample("strongbox", 15.43),
        _sample("tee", 1.76, device="Pixel 6"),
        _sample("strongbox", 35.91, device="Pixel 6"),
        _sample("strongbox", 3.0, device="Pixel 5"),
    ])
    ratios = {(r.device, r.keystore_kind): r.ratio for r in slowdown_ratios(summaries)}
    assert ratios[("Pixel 8", "strongbox")] == pytest.approx(36.7, abs=0.05)
    assert ratios[("Pixel 6", "strongbox")] == pytest.approx(20.4, abs=0.05)
    assert ratios[("Pixel 8", "tee")] == 1.0
    assert ("Pixel 5", "strongbox") not in ratios


def test_mib_label():
    assert mib_label(MIB) == "1"
    assert mib_label(MIB // 4) == "0.25"
    assert mib_label(0) == "0"


def test_device_years():
    years = load_device_years()
    assert years["Pixel 8"] == 2023
    (filled,) = fill_device_years([_sample("tee", 1.0)], years)
    assert filled.device_year == 2023
    (unknown,) = fill_device_years([_sample("tee", 1.0, device="Galaxy")], years)
    assert unknown.device_year is None


def test_single_kind_figure_data(tmp_path):
    written = emit_figure_data(summarize([_sample("tee", 0.5), _sample("tee", 0.7, iteration=1)]), tmp_path)
    assert sorted(p.name for p in written) == [
        "comparison_table.csv", "comparison_table.txt", "metadata.json", "payload_tee.csv",
    ]
    assert not (tmp_path / "device_year_evolution.csv").exists()
    metadata = json.loads((tmp_path / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["groups"] == 1
    assert metadata["std_estimator"].startswith("sample standard deviation")


def test_device_year_series(tmp_path):
    summaries = summarize([
        _sample("strongbox", 2.0, device="Pixel 8", year=2023),
        _sample("strongbox", 3.0, device="Pixel 3", year=2018),
    ])
    emit_figure_data(summaries, tmp_path)
    lines = (tmp_path / "device_year_evolution.csv").read_text(encoding="utf-8").splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["Pixel 3", "Pixel 8"]
