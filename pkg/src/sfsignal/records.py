"""Text formats: belief files, trajectory CSV and key/value reports.

Floats are written with ``repr`` so every file round-trips exactly.
"""
from __future__ import annotations

import csv
import io

import numpy as np

from .errors import GameFileError
from .prediction import BeliefParams

BELIEF_FORMAT_HEADER = "# sfsignal beliefs v1"
TRAJECTORY_CSV_VERSION = "1"


def _fmt(x):
    return repr(float(x))


def format_beliefs(beliefs, Sigma_s=None, metadata=None):
    """Sections [mu_h], [Sigma_h], [Sigma_0] and optionally [Sigma_s]; rows are whitespace separated."""
    lines = [BELIEF_FORMAT_HEADER]
    for key, val in (metadata or {}).items():
        lines.append(f"# {key}: {val}")
    lines += ["", "[mu_h]", " ".join(_fmt(x) for x in beliefs.mu_h)]
    blocks = [("Sigma_h", beliefs.Sigma_h), ("Sigma_0", beliefs.Sigma_0)]
    if Sigma_s is not None:
        blocks.append(("Sigma_s", Sigma_s))
    for name, mat in blocks:
        lines += ["", f"[{name}]"]
        lines += [" ".join(_fmt(x) for x in row) for row in np.atleast_2d(mat)]
    return "\n".join(lines) + "\n"


def write_beliefs(path, beliefs, Sigma_s=None, metadata=None):
    with open(path, "w") as fh:
        fh.write(format_beliefs(beliefs, Sigma_s, metadata))


def parse_beliefs(text, path=None):
    """Returns (BeliefParams, Sigma_s or None)."""
    rows = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            section = line.strip("[]").strip()
            if section not in ("mu_h", "Sigma_h", "Sigma_0", "Sigma_s"):
                raise GameFileError(f"unknown section [{section}]", path, lineno)
            rows[section] = []
            continue
        if section is None:
            raise GameFileError("data outside a section", path, lineno)
        try:
            rows[section].append([float(x) for x in line.split()])
        except ValueError as exc:
            raise GameFileError(str(exc), path, lineno) from None
    for need in ("mu_h", "Sigma_h"):
        if need not in rows:
            raise GameFileError(f"missing [{need}] section", path)
    mu = np.array([x for row in rows["mu_h"] for x in row])
    Sh = np.array(rows["Sigma_h"])
    S0 = np.array(rows["Sigma_0"]) if "Sigma_0" in rows else Sh
    Ss = np.array(rows["Sigma_s"]) if "Sigma_s" in rows else None
    try:
        return BeliefParams(mu, Sh, S0), Ss
    except ValueError as exc:
        raise GameFileError(str(exc), path) from None


def read_beliefs(path):
    with open(path) as fh:
        return parse_beliefs(fh.read(), path=str(path))


def trajectory_columns(m, M):
    return (["iteration", "social_cost"] + [f"mu_s_{e}" for e in range(m)]
            + [f"f_{e}" for e in range(m)] + [f"h_{r}" for r in range(M)]
            + [f"phi_{r}" for r in range(M)])


def format_trajectory_csv(traj, metadata=None):
    """One row per iteration: iteration, social_cost, mu_s_*, f_*, h_*, phi_*.

    Metadata lines (``# key: value``) precede the header.
    """
    buf = io.StringIO()
    meta = {"csv_version": TRAJECTORY_CSV_VERSION, "classification": traj.classification}
    meta.update(metadata or {})
    for key, val in meta.items():
        buf.write(f"# {key}: {val}\n")
    first = traj.rounds[0]
    m, M = first.mu_s.size, first.flow.route_flow_h.size
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trajectory_columns(m, M))
    for rec in traj.rounds:
        writer.writerow([rec.iteration, _fmt(rec.social_cost)]
                        + [_fmt(x) for x in rec.mu_s]
                        + [_fmt(x) for x in rec.flow.edge_flow_f]
                        + [_fmt(x) for x in rec.flow.route_flow_h]
                        + [_fmt(x) for x in rec.route_cost])
    return buf.getvalue()


def parse_trajectory_csv(text):
    """Returns (metadata dict, dict of column name -> numpy array)."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    data = np.array([[float(x) for x in row] for row in reader])
    cols = {name: data[:, i] for i, name in enumerate(header)}
    return meta, cols


def format_report(items):
    """``key: value`` lines; arrays become space-separated reprs."""
    out = []
    for key, val in items.items():
        if isinstance(val, (np.ndarray, list, tuple)):
            arr = np.asarray(val)
            if np.iscomplexobj(arr):
                val = " ".join(repr(complex(z)).strip("()") for z in arr)
            else:
                val = " ".join(_fmt(x) for x in arr.ravel())
        elif isinstance(val, float):
            val = _fmt(val)
        out.append(f"{key}: {val}")
    return "\n".join(out) + "\n"


def parse_report(text):
    out = {}
    for line in text.splitlines():
        if ":" in line:
            key, _, val = line.partition(":")
            out[key.strip()] = val.strip()
    return out
