import os

import pandas as pd
import pytest
import ujson

from main import main
from src.utils.reports import (
    CLASS_COUNT_COLUMNS,
    HISTOGRAM_COLUMNS,
    HIT_RATIO_COLUMNS,
    PLAN_COLUMNS,
    POLICY_COLUMNS,
    SIM_COLUMNS,
)
from src.utils.trace_io import serialize_msr
from tests.conftest import (
    SEVEN_REQUESTS,
    fixture_path,
    make_stream,
)

SMALL_RUN = [
    "--interval-ms",
    "1",
    "--ticks-per-ms",
    "100",
    "--cmin",
    "1",
    "--capacity-blocks",
    "100",
]


def write_repeated_seven(path, intervals=4):
    reqs = []
    for k in range(intervals):
        reqs += make_stream(SEVEN_REQUESTS, ts0=100 * k)
    path.write_bytes(serialize_msr(reqs, 8192, {0: ("hm", 1)}))
    return str(path)


def read_tree(root):
    files = {}
    for folder, _, names in os.walk(root):
        for name in names:
            path = os.path.join(folder, name)
            with open(path, "rb") as f:
                files[os.path.relpath(path, root)] = f.read()
    return files


# Test the profile summary of the seven-request example
def test_profile_seven(tmp_path, capsys):
    code = main(["profile", fixture_path("seven_requests.csv"), "--out", str(tmp_path)])
    assert code == 0
    assert "vm_id=0 max_trd=4 max_urd=1 size_trd=5 size_urd=2" in capsys.readouterr().out
    hist = pd.read_csv(tmp_path / "seven_requests_hist.csv")
    hrf = pd.read_csv(tmp_path / "seven_requests_hrf.csv")
    assert list(hist.columns) == HISTOGRAM_COLUMNS
    assert list(hrf.columns) == HIT_RATIO_COLUMNS
    assert list(hrf["breakpoint_blocks"]) == [2], "The default mode profiles useful reuse."


# Test profiling an empty trace
def test_profile_empty(tmp_path, capsys):
    code = main(["profile", fixture_path("empty.csv"), "--out", str(tmp_path)])
    assert code == 0
    assert "max_trd=0 max_urd=0 size_trd=0 size_urd=0" in capsys.readouterr().out
    hist = pd.read_csv(tmp_path / "empty_hist.csv")
    hrf = pd.read_csv(tmp_path / "empty_hrf.csv")
    assert list(hist.columns) == HISTOGRAM_COLUMNS and hist.empty, "Histogram table is header-only."
    assert list(hrf.columns) == HIT_RATIO_COLUMNS and hrf.empty, "Hit-ratio table is header-only."


# Test that a corrupt trace is an input error with its line number
def test_corrupt_trace(tmp_path, capsys):
    code = main(["profile", fixture_path("corrupt.csv"), "--out", str(tmp_path)])
    assert code == 2
    assert "line 2" in capsys.readouterr().err


# Test that a trace with invalid UTF-8 is an input error with its line number
def test_invalid_utf8_trace(tmp_path, capsys):
    trace = tmp_path / "latin.csv"
    trace.write_bytes(b"1,hm,1,Read,0,512,0\n2,h\xe9,1,Read,0,512,0\n")
    code = main(["profile", str(trace), "--out", str(tmp_path)])
    assert code == 2, "Undecodable bytes are bad input, not a crash."
    assert "line 2" in capsys.readouterr().err


# Test missing files and bad configuration
def test_input_errors(tmp_path):
    assert main(["inspect", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    config = tmp_path / "bad.yaml"
    config.write_text("colour: blue\n")
    args = ["inspect", fixture_path("seven_requests.csv"), "--config", str(config)]
    assert main(args + ["--out", str(tmp_path)]) == 2
    assert main(["run", "--out", str(tmp_path)]) == 2, "run needs traces or a synthetic mix."


# Test that unknown flags are usage errors
def test_unknown_flag():
    with pytest.raises(SystemExit) as excinfo:
        main(["profile", fixture_path("seven_requests.csv"), "--verbose-mode"])
    assert excinfo.value.code == 2


# Test the inspect and simulate commands
def test_inspect_and_simulate(tmp_path, capsys):
    assert main(["inspect", fixture_path("msr_sample.csv"), "--out", str(tmp_path)]) == 0
    counts = pd.read_csv(tmp_path / "class_counts.csv")
    assert list(counts.columns) == CLASS_COUNT_COLUMNS and len(counts) == 2

    args = ["simulate", fixture_path("seven_requests.csv"), "--size", "2", "--policy", "all"]
    assert main(args + ["--out", str(tmp_path)]) == 0
    sims = pd.read_csv(tmp_path / "sim.csv")
    assert list(sims.columns) == SIM_COLUMNS
    assert list(sims["policy"]) == ["WB", "WT", "RO"]
    assert "policy=RO" in capsys.readouterr().out


# Test the run directory layout and the opt-in timing
def test_run_directory(tmp_path):
    trace = write_repeated_seven(tmp_path / "seven_x4.csv")
    out = tmp_path / "run"
    assert main(["run", trace, "--out", str(out)] + SMALL_RUN) == 0
    assert list(pd.read_csv(out / "plan.csv").columns) == PLAN_COLUMNS
    assert list(pd.read_csv(out / "policy.csv").columns) == POLICY_COLUMNS
    assert len(pd.read_csv(out / "sim.csv")) == 4
    meta = ujson.loads((out / "run.meta").read_text())
    assert meta["config"]["c_min"] == 1 and meta["intervals"] == 4
    assert meta["trace"] == {"block_size_bytes": 8192, "source": "msr_csv", "vm_count": 1}
    assert "interval_seconds" not in meta

    timed = tmp_path / "timed"
    assert main(["run", trace, "--out", str(timed), "--timing"] + SMALL_RUN) == 0
    assert len(ujson.loads((timed / "run.meta").read_text())["interval_seconds"]) == 4


# Test that a self-comparison gives unit ratios
def test_compare_self(tmp_path):
    trace = write_repeated_seven(tmp_path / "seven_x4.csv")
    out = tmp_path / "cmp"
    assert main(["compare", trace, "--baseline-mode", "eci", "--out", str(out)] + SMALL_RUN) == 0
    table = pd.read_csv(out / "compare.csv")
    assert (table["ppc_ratio"] == 1.0).all()
    assert (table["ssd_writes_ratio"] == 1.0).all()
    assert os.path.isdir(out / "eci") and os.path.isdir(out / "baseline")


# Test that rewriting workloads save SSD writes against the baseline
def test_compare_rewrites(tmp_path):
    trace = write_repeated_seven(tmp_path / "seven_x4.csv")
    out = tmp_path / "cmp"
    assert main(["compare", trace, "--out", str(out)] + SMALL_RUN) == 0
    table = pd.read_csv(out / "compare.csv")
    assert table.iloc[-1]["ssd_writes_ratio"] < 1.0


# Test the table shape of a three-VM synthetic mix and byte-identical reruns
def test_compare_mix_deterministic(tmp_path):
    args = [
        "compare",
        "--synthetic-mix",
        "3",
        "--intervals",
        "6",
        "--interval-ms",
        "1",
        "--ticks-per-ms",
        "1000",
        "--cmin",
        "1",
        "--capacity-blocks",
        "500",
        "--seed",
        "7",
    ]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    table = pd.read_csv(tmp_path / "a" / "compare.csv")
    assert len(table) == 4, "Three VM rows plus the aggregate."
    meta = ujson.loads((tmp_path / "a" / "eci" / "run.meta").read_text())
    assert meta["trace"]["source"] == "synthetic" and meta["vm_ids"] == [0, 1, 2]
    assert read_tree(tmp_path / "a") == read_tree(tmp_path / "b")
