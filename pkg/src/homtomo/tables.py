"""Plain-text result files: CSV tables and complex matrices with a '#' preamble."""

import csv
import io

import numpy as np

from .counts import RateRecord
from .measurement import CoherenceSetting

SCHEMA_VERSION = 1
RECORD_COLUMNS = ("kind", "t1_s", "t2_s", "phi_rad", "rate", "stderr")


def fmt(x):
    """17 significant digits, so values round-trip bit-exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.16e}"


def _preamble(meta):
    lines = [f"# schema_version: {SCHEMA_VERSION}"]
    lines.extend(f"# {key}: {value}" for key, value in meta.items())
    return "\n".join(lines) + "\n"


def render_table(header, rows, meta, footer=None):
    buf = io.StringIO()
    buf.write(_preamble(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    for key, value in (footer or {}).items():
        buf.write(f"# {key}: {value}\n")
    return buf.getvalue()


def render_matrix(mat, meta):
    mat = np.asarray(mat, dtype=complex)
    buf = io.StringIO()
    buf.write(_preamble(meta))
    buf.write(f"shape: {mat.shape[0]} {mat.shape[1]}\n")
    buf.write("layout: row-major, each entry written as re,im\n")
    for row in mat:
        buf.write(",".join(f"{fmt(z.real)},{fmt(z.imag)}" for z in row) + "\n")
    return buf.getvalue()


def read_matrix(text):
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    shape = tuple(int(x) for x in rows[0].split(":")[1].split())
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[2:]])
    return (data[:, 0::2] + 1j * data[:, 1::2]).reshape(shape)


def _data_lines(text):
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


def read_table(text):
    reader = csv.DictReader(io.StringIO("\n".join(_data_lines(text))))
    return list(reader)


def record_rows(records):
    rows = []
    for r in records:
        s = r.setting
        if isinstance(s, CoherenceSetting):
            rows.append(("coherence", s.t1, s.t2, s.phi, r.rate, r.stderr))
        else:
            rows.append(("delay", float(s), "", "", r.rate, r.stderr))
    return rows


def parse_records(text):
    """Rate records from the table written by :func:`record_rows`."""
    records = []
    for row in read_table(text):
        kind = row["kind"].strip()
        rate = float(row["rate"])
        stderr = float(row.get("stderr") or 0.0)
        if kind == "delay":
            records.append(RateRecord(float(row["t1_s"]), rate, stderr))
        elif kind == "coherence":
            setting = CoherenceSetting(float(row["t1_s"]), float(row["t2_s"]), float(row["phi_rad"]))
            records.append(RateRecord(setting, rate, stderr))
        else:
            raise ValueError(f"unknown record kind {kind!r}")
    return records
