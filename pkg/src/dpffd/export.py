"""Trace files (CSV, JSON) and static plots."""
import csv
import json
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .experiment import RunTrace
from .network import AlarmEvent

SCHEMA_VERSION = 1


def trace_to_dict(trace):
    return {
        "schema": SCHEMA_VERSION,
        "mode": trace.mode,
        "node_labels": list(trace.node_labels),
        "mode_names": list(trace.mode_names),
        "onsets": list(trace.onsets),
        "observed_tanks": list(trace.observed_tanks),
        "ts": trace.ts,
        "alpha": trace.alpha,
        "complete": trace.complete,
        "k": trace.k.tolist(),
        "truth": trace.truth.tolist(),
        "estimates": trace.estimates.tolist(),
        "pfail": trace.pfail.tolist(),
        "consensus_iterations": trace.consensus_iterations.tolist(),
        "alarms": [{"mode": a.mode, "step": a.step, "probability": a.probability, "node_id": a.node_id}
                   for a in trace.alarms],
    }


def trace_from_dict(d):
    n_nodes, n_modes = len(d["node_labels"]), len(d["mode_names"])
    n_x = len(d["truth"][0]) if d["truth"] else 0
    steps = len(d["k"])
    return RunTrace(
        mode=d["mode"],
        node_labels=list(d["node_labels"]),
        mode_names=list(d["mode_names"]),
        onsets=list(d["onsets"]),
        observed_tanks=list(d["observed_tanks"]),
        ts=d["ts"],
        alpha=d["alpha"],
        k=np.asarray(d["k"], dtype=np.int64),
        truth=np.asarray(d["truth"], dtype=float).reshape(steps, n_x),
        estimates=np.asarray(d["estimates"], dtype=float).reshape(steps, n_nodes, n_x),
        pfail=np.asarray(d["pfail"], dtype=float).reshape(steps, n_nodes, n_modes),
        consensus_iterations=np.asarray(d["consensus_iterations"], dtype=np.int64),
        alarms=[AlarmEvent(a["mode"], a["step"], a["probability"], a["node_id"]) for a in d["alarms"]],
        complete=d.get("complete", True),
    )


def csv_header(trace):
    n_x = trace.truth.shape[1]
    cols = ["k", "time_s"] + [f"truth_x{t}" for t in range(1, n_x + 1)]
    for label in trace.node_labels:
        cols += [f"node{label}_est_x{t}" for t in range(1, n_x + 1)]
        cols += [f"node{label}_p_mode{j}" for j in range(1, len(trace.mode_names) + 1)]
        cols += [f"node{label}_alarm_mode{j}" for j in range(1, len(trace.mode_names) + 1)]
    cols.append("consensus_iterations")
    return cols


def write_csv(trace, path):
    flags = trace.alarm_flags()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(trace))
        for s in range(trace.n_steps):
            row = [int(trace.k[s]), repr(float(trace.time_s[s]))] + [repr(float(v)) for v in trace.truth[s]]
            for i in range(len(trace.node_labels)):
                row += [repr(float(v)) for v in trace.estimates[s, i]]
                row += [repr(float(v)) for v in trace.pfail[s, i]]
                row += [int(v) for v in flags[s, i]]
            row.append(int(trace.consensus_iterations[s]))
            w.writerow(row)
    return Path(path)


def read_csv(path, meta=None):
    """Rebuild a trace from CSV. Metadata absent from the columns comes from ``meta``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    col = {name: i for i, name in enumerate(header)}
    n_x = sum(1 for h in header if h.startswith("truth_x"))
    labels = []
    for h in header:
        if h.startswith("node") and h.endswith("_est_x1"):
            labels.append(h[len("node"):-len("_est_x1")])
    n_modes = sum(1 for h in header if h.startswith(f"node{labels[0]}_p_mode")) if labels else 0
    data = np.asarray([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    k = data[:, col["k"]].astype(np.int64)
    ts = float(data[0, col["time_s"]] / k[0]) if len(k) and k[0] else 0.1
    est = np.stack([data[:, [col[f"node{l}_est_x{t}"] for t in range(1, n_x + 1)]] for l in labels], axis=1)
    pf = np.stack([data[:, [col[f"node{l}_p_mode{j}"] for j in range(1, n_modes + 1)]] for l in labels], axis=1)
    meta = meta or {}
    return RunTrace(
        mode=meta.get("mode", "unknown"),
        node_labels=labels,
        mode_names=meta.get("mode_names", [f"mode{j}" for j in range(1, n_modes + 1)]),
        onsets=meta.get("onsets", [0] * n_modes),
        observed_tanks=meta.get("observed_tanks", list(range(1, n_x + 1))),
        ts=meta.get("ts", ts),
        alpha=meta.get("alpha", 0.9),
        k=k,
        truth=data[:, [col[f"truth_x{t}"] for t in range(1, n_x + 1)]],
        estimates=est,
        pfail=pf,
        consensus_iterations=data[:, col["consensus_iterations"]].astype(np.int64),
    )


def write_json(trace, path):
    Path(path).write_text(json.dumps(trace_to_dict(trace)))
    return Path(path)


def read_json(path):
    return trace_from_dict(json.loads(Path(path).read_text()))


def load_trace(path):
    path = Path(path)
    if path.suffix == ".json":
        return read_json(path)
    if path.suffix == ".csv":
        return read_csv(path)
    raise ContractViolation(f"unrecognized trace format: {path}")


def write_plots(trace, out_dir):
    """One failure-probability figure per fault mode and one level figure per observed tank."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    paths = []
    t = trace.time_s
    for j, name in enumerate(trace.mode_names):
        fig, ax = plt.subplots(figsize=(7, 3))
        occurrence = (trace.k > trace.onsets[j]).astype(float)
        ax.plot(t, occurrence, color="tab:blue", lw=1.5, label="fault active")
        for i, label in enumerate(trace.node_labels):
            ax.plot(t, trace.pfail[:, i, j], ls="--", lw=1, label=f"node {label}")
        ax.axhline(trace.alpha, color="tab:red", lw=1, label="threshold")
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("failure probability")
        ax.set_title(name)
        ax.legend(loc="upper left", fontsize="small")
        fig.tight_layout()
        p = out_dir / f"pfail_mode{j + 1}.png"
        fig.savefig(p, dpi=100)
        plt.close(fig)
        paths.append(p)
    for tank in trace.observed_tanks:
        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(t, trace.truth[:, tank - 1], color="tab:blue", lw=1.2, label="actual")
        for i, label in enumerate(trace.node_labels):
            ax.plot(t, trace.estimates[:, i, tank - 1], ls="--", lw=1, label=f"estimate node {label}")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("level [m]")
        ax.set_title(f"tank {tank}")
        ax.legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        p = out_dir / f"level_tank{tank}.png"
        fig.savefig(p, dpi=100)
        plt.close(fig)
        paths.append(p)
    return paths


def export(trace, out_dir, formats=("csv", "json"), plots=False, stem="trace"):
    """Write the requested trace files (and optionally plots) into ``out_dir``."""
    if trace.n_steps == 0:
        raise ContractViolation("cannot export an empty trace")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            written.append(write_csv(trace, out_dir / f"{stem}.csv"))
        elif fmt == "json":
            written.append(write_json(trace, out_dir / f"{stem}.json"))
        else:
            raise ContractViolation(f"unknown export format {fmt!r}")
    if plots:
        written.extend(write_plots(trace, out_dir))
    return written
