"""Run a validated configuration and render report.csv, report.json and plot.gp.

Reports contain no timestamps or host information, so identical
configurations and seeds give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import analysis
from .config import ExperimentConfig
from .risk import compare_rules, estimate_risk
from .rules import rule_label

__all__ = ["Report", "run_experiment", "write_report"]


@dataclass
class Report:
    config: ExperimentConfig
    columns: list[str]
    rows: list[list[Any]]
    summary: dict
    plot: str

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "columns": self.columns,
            "rows": [[_json_value(v) for v in row] for row in self.rows],
            "summary": _json_value(self.summary),
        }

    def json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2, allow_nan=False) + "\n"


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, np.ndarray):
        return _json_value(v.tolist())
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _mu_text(mu) -> str:
    return ";".join(repr(float(x)) for x in mu)


def _states(cfg: ExperimentConfig):
    base = cfg.model_obj
    return [base.with_mu(mu) for mu in cfg.grid_points]


def _run_risk(cfg: ExperimentConfig, workers: int) -> Report:
    region, kind = cfg.region_obj, cfg.kind_obj
    rows = []
    for rule in cfg.rule_objs:
        for i, model in enumerate(_states(cfg)):
            est = estimate_risk(rule, kind, model, region, cfg.replications, cfg.seed, workers)
            rows.append([i, _mu_text(model.mu), rule_label(rule), est.value, est.std_error, est.replications, est.seed])
    cols = ["mu_index", "mu", "rule", "value", "std_error", "replications", "seed"]
    return Report(cfg, cols, rows, {}, _PLOT_RISK)


def _run_compare(cfg: ExperimentConfig, workers: int) -> Report:
    rule_a, rule_b = cfg.rule_objs
    result = compare_rules(rule_a, rule_b, cfg.kind_obj, _states(cfg), cfg.region_obj,
                           cfg.replications, cfg.seed, workers)
    la, lb = rule_label(rule_a), rule_label(rule_b)
    rows = []
    for i, st in enumerate(result.states):
        mu = _mu_text(st.mu)
        rows.append([i, mu, la, st.risk_a.value, st.risk_a.std_error, cfg.replications, cfg.seed])
        rows.append([i, mu, lb, st.risk_b.value, st.risk_b.std_error, cfg.replications, cfg.seed])
        rows.append([i, mu, "difference", st.difference, st.difference_se, cfg.replications, cfg.seed])
    summary = {
        "rule_a": la,
        "rule_b": lb,
        "verdict": result.verdict,
        "threshold_se": result.threshold,
        "max_std_error": max(max(s.risk_a.std_error, s.risk_b.std_error, s.difference_se) for s in result.states),
    }
    cols = ["mu_index", "mu", "rule", "value", "std_error", "replications", "seed"]
    return Report(cfg, cols, rows, summary, _PLOT_RISK)


def _run_blyth(cfg: ExperimentConfig, workers: int) -> Report:
    model = cfg.model_obj
    rep = analysis.blyth_scan(cfg.region_obj, model.sigma, model.n, cfg.taus, cfg.omega0_obj,
                              cfg.replications, cfg.seed, cfg.method, workers)
    rows = [
        [t, num, nse, den, dse, r, rse]
        for t, num, nse, den, dse, r, rse in zip(
            rep.taus, rep.numerators, rep.numerator_ses, rep.denominators,
            rep.denominator_ses, rep.ratios, rep.ratio_ses,
        )
    ]
    cols = ["tau", "numerator", "numerator_se", "denominator", "denominator_se", "ratio", "ratio_se"]
    summary = {"slope": rep.slope, "slope_stderr": rep.slope_stderr, "fit_points": len(rep.taus) - len(rep.taus) // 2}
    return Report(cfg, cols, rows, summary, _PLOT_BLYTH)


def _run_trace(cfg: ExperimentConfig, workers: int) -> Report:
    model, region = cfg.model_obj, cfg.region_obj
    d = model.dim
    rows, summary = [], {}
    for rule in cfg.rule_objs:
        label = rule_label(rule)
        g = analysis.g_matrix_at_zero(rule, region, model.sigma, model.n, cfg.replications, cfg.seed, workers)
        h_pred, h_pred_se = analysis.hessian_at_zero(g, model.sigma, model.n)
        h_fd, h_fd_se = analysis.fd_hessian(rule, "linear", model, region, cfg.replications, cfg.seed, workers=workers)
        tr = analysis.hessian_trace_at_zero(g, model.sigma, model.n)
        tr_se = analysis.hessian_trace_std_error(g, model.sigma, model.n)
        rows.append([label, "trace_G", "", "", g.trace, g.trace_std_error])
        rows.append([label, "hessian_trace", "", "", tr, tr_se])
        for i in range(d):
            rows.append([label, "E", i, "", g.e_vector[i], g.e_std_errors[i]])
        for i in range(d):
            for j in range(d):
                rows.append([label, "G", i, j, g.matrix[i, j], g.matrix_std_errors[i, j]])
        for i in range(d):
            for j in range(d):
                rows.append([label, "hessian_predicted", i, j, h_pred[i, j], h_pred_se[i, j]])
        for i in range(d):
            for j in range(d):
                rows.append([label, "hessian_fd", i, j, h_fd[i, j], h_fd_se[i, j]])
        z = np.abs(h_fd - h_pred) / np.sqrt(h_fd_se**2 + h_pred_se**2 + 1e-300)
        summary[label] = {
            "trace_G": g.trace,
            "trace_G_se": g.trace_std_error,
            "trace_G_z": g.trace / g.trace_std_error if g.trace_std_error > 0 else None,
            "hessian_trace": tr,
            "hessian_trace_se": tr_se,
            "max_hessian_z": float(z.max()),
        }
    cols = ["rule", "quantity", "i", "j", "value", "std_error"]
    return Report(cfg, cols, rows, summary, _PLOT_TRACE)


def _run_consistency(cfg: ExperimentConfig, workers: int) -> Report:
    model = cfg.model_obj.with_mu(cfg.mu)
    rows, summary = [], {}
    for rule in cfg.rule_objs:
        label = rule_label(rule)
        rep = analysis.consistency_scan(rule, cfg.kind_obj, model, cfg.region_obj, cfg.n_list,
                                        cfg.replications, cfg.seed, workers)
        for n, r, se in zip(rep.n_list, rep.risks, rep.std_errors):
            rows.append([n, label, r, se, cfg.replications, cfg.seed])
        summary[label] = {"slope": rep.slope, "slope_stderr": rep.slope_stderr}
    cols = ["n", "rule", "value", "std_error", "replications", "seed"]
    return Report(cfg, cols, rows, summary, _PLOT_CONSISTENCY)


_RUNNERS = {
    "risk": _run_risk,
    "compare": _run_compare,
    "stein": _run_compare,
    "blyth": _run_blyth,
    "trace": _run_trace,
    "consistency": _run_consistency,
}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> Report:
    """Compute the report for ``cfg``; ``workers`` changes speed, never results."""
    return _RUNNERS[cfg.experiment](cfg, max(1, int(workers)))


def write_report(report: Report, out_dir: str | os.PathLike) -> list[str]:
    """Write the three report files into ``out_dir`` and return their paths."""
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "report.csv": report.csv_text(),
        "report.json": report.json_text(),
        "plot.gp": report.plot,
    }
    paths = []
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths


# --------------------------------------------------------------------------
# gnuplot scripts (all read report.csv from the working directory)

_PLOT_HEAD = """set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
"""


_PLOT_RISK = _PLOT_HEAD + """set output 'risk.png'
set xlabel 'state index'
set ylabel 'risk'
plot 'report.csv' using 1:4:5 with yerrorbars title 'estimate (all rules)'
"""


_PLOT_BLYTH = _PLOT_HEAD + """set output 'blyth.png'
set logscale xy
set xlabel 'tau'
set ylabel 'numerator / prior mass'
plot 'report.csv' using 1:6:7 with yerrorlines title 'ratio'
"""

_PLOT_TRACE = _PLOT_HEAD + """set output 'hessian.png'
set xlabel 'entry'
set ylabel 'value'
plot "< grep -E 'hessian_(fd|predicted)' report.csv" using 0:5:6 with yerrorbars title 'hessian entries'
"""

_PLOT_CONSISTENCY = _PLOT_HEAD + """set output 'consistency.png'
set logscale xy
set xlabel 'n'
set ylabel 'risk'
plot 'report.csv' using 1:3:4 with yerrorlines title 'risk'
"""
