"""Experiment kernels behind the command-line harness.

Each runner takes an :class:`~becqubit.config.ExperimentConfig` and an
output directory, writes its result files and returns an
:class:`Outcome`.  Sweeps fan out over a process pool; results are gathered
in input order so the files do not depend on scheduling.  A failing cell is
recorded and written as NaN instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import fock, meanfield, protocols
from .errors import BecQubitError
from .qubit import BlochVector, QubitAmplitudes, from_bloch

log = logging.getLogger(__name__)

_CELL_ERRORS = (BecQubitError, ArithmeticError, ValueError, np.linalg.LinAlgError)


@dataclass
class Outcome:
    files: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    inconclusive_dominated: bool = False


def _fmt(x) -> str:
    return format(float(x), ".17g")


def parallel_map(fn, items, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _guarded(fn, item):
    try:
        return True, fn(item)
    except _CELL_ERRORS as exc:
        return False, f"{type(exc).__name__}: {exc}"


def random_qubit(rng: np.random.Generator) -> QubitAmplitudes:
    """Haar-random pure qubit state."""
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    return QubitAmplitudes.normalized(z[0], z[1])


def run_flow(cfg, out: Path) -> Outcome:
    p = cfg.params
    grid = meanfield.sphere_grid(p["grid"]["n_theta"], p["grid"]["n_phi"])
    params = meanfield.EffectiveParams(p["v01"], p["bz"], p["g"])
    samples = meanfield.flow_field(grid, params, p["nonlinear"])
    path = out / "flow.csv"
    meanfield.write_flow_csv(samples, path)
    return Outcome([path.name], summary={"samples": len(samples)})


def run_discriminate(cfg, out: Path) -> Outcome:
    p = cfg.params
    pair = protocols.InputPair(p["theta_ab"], p["scheme"])
    stats = protocols.run_trials(pair, p["g"], p["shots"], cfg.seed, dt=p.get("dt"),
                                 t_max=p.get("t_max"), orth_eps=p["orth_eps"])
    path = out / "trials.json"
    protocols.write_trials_json(stats, path)
    summary = stats.to_dict()
    return Outcome([path.name], summary=summary, inconclusive_dominated=stats.inconclusive_rate > 0.5)


def _model_error_cell(n, base, ts, q0, dt):
    return fock.model_error_sweep(base, [n], ts, q0, dt)


def run_meanfield_error(cfg, out: Path) -> Outcome:
    p = cfg.params
    base = fock.TwoModeParams(1, p["omega0"], p["omega"], p["big_k"], p["big_k_prime"],
                              p["v00"], p["v11"], p["v01"])
    q0 = from_bloch(BlochVector(*p["initial_bloch"]))
    ts = list(p["t_values"])
    kernel = partial(_guarded, partial(_model_error_cell, base=base, ts=ts, q0=q0, dt=p.get("dt")))
    cells = parallel_map(kernel, p["n_values"], cfg.workers)

    rows, failures = [], []
    for n, (ok, value) in zip(p["n_values"], cells):
        if ok:
            rows.extend(value)
        else:
            failures.append(f"n={n}: {value}")
            rows.extend(fock.SweepRow(n, t, math.nan) for t in ts)
    path = out / "model_error.csv"
    fock.write_model_error_csv(rows, path)

    fits = []
    if len(ts) >= 2:
        for n in p["n_values"]:
            sel = [r for r in rows if r.n == n]
            n_eps = [r.n_times_epsilon for r in sel]
            if not all(math.isfinite(v) for v in n_eps):
                continue
            try:
                c, t_ent = fock.fit_error_bound([r.t for r in sel], n_eps)
            except (RuntimeError, ValueError) as exc:
                log.warning("error-bound fit failed for n=%s: %s", n, exc)
                continue
            fits.append({"n": n, "c": c, "t_ent": t_ent})
    fit_path = out / "error_bound_fit.json"
    with open(fit_path, "w") as fh:
        json.dump({"model": "n*epsilon = c*(exp(t/t_ent) - 1)", "fits": fits}, fh, indent=2)
        fh.write("\n")
    return Outcome([path.name, fit_path.name], failures, {"rows": len(rows), "fits": fits})


def _correlator_cell(n, encodings, states, seed):
    rng = np.random.default_rng([seed, n])
    rows = []
    for enc in encodings:
        if enc == "cat" and n < 2:
            continue  # CAT_1 is F_1; the CAT closed forms start at n = 2
        for i in range(states):
            q = random_qubit(rng)
            v = fock.encode(enc, n, q)
            for l in (0, 1):
                for lp in (0, 1):
                    one = fock.correlator_one(v, l, lp)
                    two = fock.correlator_two(v, l, lp).real
                    one_ref, two_ref = fock.table1_correlators(enc, n, q, l, lp)
                    scale = max(abs(one_ref), abs(two_ref), 1.0)
                    err = max(abs(one - one_ref), abs(two - two_ref)) / scale
                    rows.append((n, enc, i, l, lp, one, one_ref, two, two_ref, err))
    return rows


def run_correlators(cfg, out: Path) -> Outcome:
    p = cfg.params
    kernel = partial(_guarded, partial(_correlator_cell, encodings=p["encodings"],
                                       states=p["states"], seed=cfg.seed))
    cells = parallel_map(kernel, p["n_values"], cfg.workers)
    path = out / "correlators.csv"
    failures, worst = [], 0.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "encoding", "state", "l", "lp", "one_re", "one_im", "one_ref_re", "one_ref_im",
                    "two", "two_ref", "rel_error"])
        for n, (ok, value) in zip(p["n_values"], cells):
            if not ok:
                failures.append(f"n={n}: {value}")
                continue
            for n_, enc, i, l, lp, one, one_ref, two, two_ref, err in value:
                worst = max(worst, err)
                w.writerow([n_, enc, i, l, lp, _fmt(one.real), _fmt(one.imag), _fmt(one_ref.real),
                            _fmt(one_ref.imag), _fmt(two), _fmt(two_ref), _fmt(err)])
    return Outcome([path.name], failures, {"max_rel_error": worst})


def _orth_cell(theta, scheme, g, dt, t_max, orth_eps):
    r = protocols.run_discrimination(protocols.InputPair(theta, scheme), g, dt, t_max, orth_eps,
                                     record_every=0)
    return r.t_orth, r.residual_overlap, r.status


def run_orth_scaling(cfg, out: Path) -> Outcome:
    p = cfg.params
    thetas = list(p["theta_values"])
    kernel = partial(_guarded, partial(_orth_cell, scheme=p["scheme"], g=p["g"], dt=p.get("dt"),
                                       t_max=p.get("t_max"), orth_eps=p["orth_eps"]))
    cells = parallel_map(kernel, thetas, cfg.workers)
    path = out / "orth_scaling.csv"
    failures = []
    inconclusive = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "t_orth", "t_orth_times_theta", "residual_overlap", "status"])
        for theta, (ok, value) in zip(thetas, cells):
            if not ok:
                failures.append(f"theta={theta}: {value}")
                w.writerow([_fmt(theta), "nan", "nan", "nan", "failed"])
                continue
            t_orth, residual, status = value
            if t_orth is None:
                inconclusive += 1
                t_orth = math.nan
            w.writerow([_fmt(theta), _fmt(t_orth), _fmt(t_orth * theta), _fmt(residual), status])
    return Outcome([path.name], failures, {"inconclusive": inconclusive},
                   inconclusive_dominated=inconclusive > len(thetas) / 2)


RUNNERS = {
    "flow": run_flow,
    "discriminate": run_discriminate,
    "meanfield-error": run_meanfield_error,
    "correlators": run_correlators,
    "orth-scaling": run_orth_scaling,
}
