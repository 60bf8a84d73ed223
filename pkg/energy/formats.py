"""
CSV formats: instances, decision traces, policy tables, round
diagnostics, benchmark summaries and per-instance results.
Every file has a header row.
"""
import csv
import logging
import os
from pathlib import Path

from .exceptions import DomainError
from .snes_model import Decision
from .stochastic import ExogenousState

logger = logging.getLogger(__name__)

INSTANCE_HEADER = ["t", "E", "D", "C", "P"]
TRACE_HEADER = ["t", "prior", "E", "D", "C", "P", "xb", "xs", "xr", "profit"]
POLICY_HEADER = ["t", "prior", "E", "D", "C", "P", "xb", "xs", "xr"]
DIAGNOSTICS_HEADER = [
    "round",
    "generation",
    "dataset_size",
    "train_loss",
    "validation_loss",
    "mean_revenue",
    "fallbacks",
]
SUMMARY_HEADER = [
    "class",
    "scenario",
    "arch",
    "n_included",
    "n_excluded",
    "mean_pct_optimal",
    "prop_gt_80",
]
INSTANCE_RESULT_HEADER = [
    "instance",
    "policy_revenue",
    "oracle_revenue",
    "pct_optimal",
    "excluded",
]
PLOTDATA_HEADER = ["series", "scenario", "class", "ols", "svr", "nn"]


def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        if [h.strip() for h in found] != header:
            raise DomainError(f"{path}: expected header {','.join(header)}, got {','.join(found)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DomainError(f"{path}:{line_no}: expected {len(header)} columns, got {len(row)}")
            yield line_no, row


def _int(path, line_no, value):
    try:
        return int(value)
    except ValueError:
        raise DomainError(f"{path}:{line_no}: expected an integer, got {value!r}") from None


def _blank(value):
    return "" if value is None else value


# ---- Instances ----

def write_instance(path, trajectory):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(INSTANCE_HEADER)
        for t, w in enumerate(trajectory, start=1):
            writer.writerow([t, w.energy, w.demand, w.buy_price, w.sell_price])


def read_instance(path):
    states = []
    for line_no, row in _read_rows(path, INSTANCE_HEADER):
        t, energy, demand, buy, sell = (_int(path, line_no, v) for v in row)
        if t != len(states) + 1:
            raise DomainError(f"{path}:{line_no}: periods must run 1..T in order, got t={t}")
        if min(energy, demand, sell) < 0:
            raise DomainError(f"{path}:{line_no}: energy, demand and prices must be nonnegative")
        if sell > buy:
            raise DomainError(f"{path}:{line_no}: sell price {sell} exceeds buy price {buy}")
        states.append(ExogenousState(energy, demand, buy, sell))
    if not states:
        raise DomainError(f"{path}: instance has no periods")
    return tuple(states)


# ---- Decision traces ----

def write_trace(fh, rows, labels=None):
    """
    rows are (t, prior, ExogenousState, Decision, profit) tuples. An
    ``action`` column is appended when labels are given.
    """
    writer = csv.writer(fh)
    writer.writerow(TRACE_HEADER + (["action"] if labels is not None else []))
    for i, (t, prior, w, d, profit) in enumerate(rows):
        row = [t, prior, w.energy, w.demand, w.buy_price, w.sell_price, d.buy, d.sell, d.store, profit]
        if labels is not None:
            row.append(labels[i])
        writer.writerow(row)


# ---- Policy tables ----

def write_policy_entries(path, entries):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(POLICY_HEADER)
        for key in sorted(entries):
            d = entries[key]
            writer.writerow(list(key) + [d.buy, d.sell, d.store])


def read_policy_entries(path):
    entries = {}
    for line_no, row in _read_rows(path, POLICY_HEADER):
        values = [_int(path, line_no, v) for v in row]
        key = tuple(values[:6])
        buy, sell, store = values[6:]
        entries[key] = Decision(sell=sell, buy=buy, store=store)
    return entries


# ---- Round diagnostics ----

def append_diagnostics(path, diagnostics):
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(DIAGNOSTICS_HEADER)
        for d in diagnostics:
            writer.writerow([
                d.round,
                d.generation,
                d.dataset_size,
                _blank(d.train_loss),
                _blank(d.validation_loss),
                d.mean_revenue,
                d.fallbacks,
            ])


# ---- Benchmark results ----

def write_summaries(path, summaries, append=False):
    new_file = not append or not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(SUMMARY_HEADER)
        for s in summaries:
            writer.writerow([
                s.class_id,
                s.scenario,
                s.architecture,
                s.n_included,
                s.n_excluded,
                _blank(s.mean_pct_optimal),
                _blank(s.prop_above_threshold),
            ])


def read_summary_rows(path):
    """Summary rows as dicts with numeric fields converted."""
    rows = []
    for line_no, row in _read_rows(path, SUMMARY_HEADER):
        record = dict(zip(SUMMARY_HEADER, row))
        record["n_included"] = _int(path, line_no, record["n_included"])
        record["n_excluded"] = _int(path, line_no, record["n_excluded"])
        for key in ("mean_pct_optimal", "prop_gt_80"):
            record[key] = float(record[key]) if record[key] else None
        rows.append(record)
    return rows


def write_instance_results(path, results):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(INSTANCE_RESULT_HEADER)
        for r in results:
            writer.writerow([
                r.instance_id,
                r.policy_revenue,
                r.oracle_revenue,
                _blank(r.pct_optimal),
                int(r.excluded),
            ])


def write_plotdata(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLOTDATA_HEADER)
        for row in rows:
            writer.writerow([_blank(row.get(col)) for col in PLOTDATA_HEADER])
