#!/usr/bin/env python3
"""End-to-end checks of the zsnav command line.

usage: cli_test.py ZSNAV_BINARY WORK_DIR
"""
import json
import os
import re
import shutil
import signal
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

BIN = None
WORK = None
failures = []


def run(*args, env=None):
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, timeout=600, env=env)


def check(cond, what, proc=None):
    if cond:
        print(f"ok   {what}")
        return
    print(f"FAIL {what}")
    if proc is not None:
        print(proc.stdout, proc.stderr, sep="\n")
    failures.append(what)


def test_usage():
    p = run("--help")
    check(p.returncode == 0, "--help exits 0", p)
    for sub in ("serve", "synth", "simulate", "evaluate", "replay"):
        check(sub in p.stdout, f"--help lists {sub}", p)
    p = run("simulate", "--help")
    for flag in ("--features", "--split", "--gt", "--d", "--seed", "--out", "--mode", "--attrs", "--reps"):
        check(flag in p.stdout, f"simulate --help lists {flag}", p)
    p = run()
    check(p.returncode == 2, "no subcommand exits 2", p)
    p = run("synth", "--out", WORK / "x")
    check(p.returncode == 2 and "seed" in p.stderr, "synth without --seed exits 2", p)
    p = run("frobnicate")
    check(p.returncode == 2, "unknown subcommand exits 2", p)
    p = run("simulate", "--features", "a", "--split", "b", "--gt", "c", "--seed", "1", "--out", "o", "--mode", "lucky")
    check(p.returncode == 2, "bad --mode exits 2", p)


def test_pipeline():
    data = WORK / "data"
    p = run("synth", "--seed", 4, "--out", data, "--classes", 10, "--seen", 7, "--gt-attrs", 8, "--dim", 24,
            "--per-class", 12, "--binary")
    check(p.returncode == 0, "synth exits 0", p)
    for name in ("features.csv", "features.bin", "split.json", "gt.csv"):
        check((data / name).exists(), f"synth writes {name}")
    split = json.loads((data / "split.json").read_text())
    check(len(split["seen"]) == 7 and len(split["unseen"]) == 3, "split has 7 seen / 3 unseen")
    again = WORK / "data2"
    run("synth", "--seed", 4, "--out", again, "--classes", 10, "--seen", 7, "--gt-attrs", 8, "--dim", 24,
        "--per-class", 12)
    check((again / "features.csv").read_bytes() == (data / "features.csv").read_bytes(), "synth is deterministic")

    sim = WORK / "sim"
    p = run("simulate", "--features", data / "features.csv", "--split", data / "split.json", "--gt", data / "gt.csv",
            "--d", 12, "--seed", 9, "--out", sim, "--attrs", 4, "--reps", 2)
    check(p.returncode == 0, "simulate exits 0", p)
    check("mean test_acc" in p.stdout, "simulate reports the mean", p)
    rows = (sim / "metrics.csv").read_text().splitlines()
    check(rows[0] == "attribute_count,train_acc,test_acc,rep,seed", "merged metrics header")
    check(len(rows) == 1 + 2 * 4, "merged metrics has reps x attrs rows")
    for r in (0, 1):
        rep = sim / f"rep_{r}"
        for name in ("matrix.csv", "metrics.csv", "session_log.jsonl", "config.json"):
            check((rep / name).exists(), f"rep_{r}/{name} written")
    matrix = (sim / "rep_0" / "matrix.csv").read_text().splitlines()
    check(len(matrix[0].split(",")) == 1 + 4, "rep_0 matrix has 4 attributes")

    p = run("simulate", "--features", data / "features.bin", "--split", data / "split.json", "--gt", data / "gt.csv",
            "--d", 12, "--seed", 9, "--out", WORK / "simbin", "--attrs", 4, "--reps", 1, "--mode", "random")
    check(p.returncode == 0, "simulate random mode on binary features", p)

    out = WORK / "replay"
    p = run("replay", "--features", data / "features.csv", "--split", data / "split.json",
            "--log", sim / "rep_0" / "session_log.jsonl", "--out", out)
    check(p.returncode == 0, "replay exits 0", p)
    for name in ("matrix.csv", "metrics.csv"):
        same = (out / name).read_bytes() == (sim / "rep_0" / name).read_bytes()
        check(same, f"replay reproduces {name} byte for byte")

    res = WORK / "eval.json"
    p = run("evaluate", "--features", data / "features.csv", "--split", data / "split.json", "--matrix", data / "gt.csv",
            "--d", 12, "--out", res)
    check(p.returncode == 0 and "test_acc=" in p.stdout, "evaluate exits 0 and reports", p)
    doc = json.loads(res.read_text())
    check(doc["attributes"] == 8 and 0 <= doc["test_acc"] <= 100, "evaluate JSON result")
    # The same matrix the simulator wrote evaluates to its last metrics row.
    p = run("evaluate", "--features", data / "features.csv", "--split", data / "split.json",
            "--matrix", sim / "rep_0" / "matrix.csv", "--d", 12)
    last = (sim / "rep_0" / "metrics.csv").read_text().splitlines()[-1].split(",")
    m = re.search(r"test_acc=(\S+)", p.stdout)
    check(m is not None and abs(float(m.group(1)) - float(last[2])) < 1e-9, "evaluate matches the session metrics", p)

    p = run("evaluate", "--features", WORK / "missing.csv", "--split", data / "split.json", "--matrix", data / "gt.csv")
    check(p.returncode == 1 and "error" in p.stderr, "missing input exits 1", p)
    bad = WORK / "bad_split.json"
    bad.write_text('{"seen": ["class0"], "unseen": ["class0"]}')
    p = run("evaluate", "--features", data / "features.csv", "--split", bad, "--matrix", data / "gt.csv")
    check(p.returncode == 1, "invalid split exits 1", p)
    return data


def test_serve(data):
    out = WORK / "served"
    env = dict(os.environ, ZSNAV_BIND="127.0.0.1:0")
    proc = subprocess.Popen([BIN, "serve", "--features", data / "features.csv", "--split", data / "split.json",
                             "--d", "12", "--out", out], stderr=subprocess.PIPE, text=True, env=env)
    port = None
    deadline = time.time() + 120
    lines = []
    while time.time() < deadline and port is None:
        line = proc.stderr.readline()
        if not line:
            break
        lines.append(line)
        m = re.search(r"listening on http://[\d.]+:(\d+)", line)
        if m:
            port = int(m.group(1))
    check(port is not None, "serve binds the address from ZSNAV_BIND")
    if port is None:
        proc.kill()
        print("".join(lines))
        return
    with urllib.request.urlopen(f"http://127.0.0.1:{port}/api/state", timeout=30) as r:
        state = json.loads(r.read())
    check(state["phase"] == "idle" and len(state["seen"]) == 7, "served /api/state")
    proc.send_signal(signal.SIGTERM)
    check(proc.wait(timeout=60) == 0, "serve shuts down cleanly on SIGTERM")
    check((out / "session_log.jsonl").exists(), "serve flushes the session log")

    p = run("serve", "--features", data / "features.csv", "--split", data / "split.json", "--bind", "nowhere:99999")
    check(p.returncode == 1, "bad bind address exits 1", p)


def main():
    global BIN, WORK
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    BIN, WORK = sys.argv[1], Path(sys.argv[2])
    shutil.rmtree(WORK, ignore_errors=True)
    WORK.mkdir(parents=True)
    test_usage()
    data = test_pipeline()
    test_serve(data)
    print(f"{len(failures)} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
