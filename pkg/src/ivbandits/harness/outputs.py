"""results.csv, per-trial JSONL traces and summary.json."""

import csv
import io
import json
import os
import re

import numpy as np

from .runner import ResultsTable, Row

HEADER = ("instance_id", "algorithm", "trial", "seed", "samples", "correct", "recommended", "wall_ms")


def summary_key(row, multi_instance):
    return f"{row.algorithm}[{row.instance_id}]" if multi_instance else row.algorithm


def summarize(table):
    """``{algorithm: {mean_samples, std_samples, success_rate, n, cap_exceeded}}``.

    With several instances in the table the key is ``algorithm[instance_id]``.
    ``std_samples`` is the sample standard deviation (0 for a single trial).
    """
    multi = len({r.instance_id for r in table.rows}) > 1
    groups = {}
    for r in table.rows:
        groups.setdefault(summary_key(r, multi), []).append(r)
    out = {}
    for key, rows in groups.items():
        s = np.array([r.samples for r in rows], dtype=float)
        out[key] = {
            "mean_samples": float(s.mean()),
            "std_samples": float(s.std(ddof=1)) if len(rows) > 1 else 0.0,
            "success_rate": float(np.mean([r.correct for r in rows])),
            "n": len(rows),
            "cap_exceeded": int(sum(r.cap_exceeded for r in rows)),
        }
    return out


def results_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in table.rows:
        w.writerow([r.instance_id, r.algorithm, r.trial, r.seed, r.samples,
                    "true" if r.correct else "false", r.recommended, r.wall_ms])
    return buf.getvalue()


def read_results(path):
    """Parse a results.csv back into a :class:`ResultsTable` (rows only)."""
    table = ResultsTable()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            iid, algo, trial, seed, samples, correct, rec_arm, wall = rec
            table.rows.append(Row(iid, algo, int(trial), int(seed), int(samples), correct == "true",
                                  int(rec_arm), int(wall)))
            table.traces.append(None)
            table.curves.append(None)
    return table


def _safe(name):
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", name)


def write_outputs(table, out_dir):
    """Write results.csv, summary.json and (when present) traces/.

    Returns the list of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "results.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(results_csv(table))
    written.append(path)
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summarize(table), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    for row, trace in zip(table.rows, table.traces):
        if trace is None:
            continue
        d = os.path.join(out_dir, "traces", _safe(row.instance_id), _safe(row.algorithm))
        os.makedirs(d, exist_ok=True)
        path = os.path.join(d, f"trial_{row.trial:04d}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(trace)
        written.append(path)
    return written
