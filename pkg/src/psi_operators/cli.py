"""Command-line studies: density checks, convergence sweeps, bounds, iteration, smoothness.

Usage::

    psi-ops converge --config study.cfg --out converge.csv
    psi-ops density-check --format json --tail-eps 1e-12

A config file holds ``key = value`` lines (``#`` starts a comment, lists are
comma separated); command-line flags override it. Every subcommand writes a
report (CSV with ``schema_version`` as first column, or JSON as an array of
flat records) and exits with

* 0 when every assertion of the run passed,
* 1 when an assertion failed (the report is still written),
* 2 on configuration errors (nothing is computed),
* 3 when quadrature could not reach the requested tolerance (or an
  iterated chain would exceed its evaluation budget).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .activation import ActivationParams, DensityKernel, eval_G
from .analysis import (
    BoundQuery,
    RATIO_SLACK,
    bound_for_kind,
    bound_taylor,
    centered_moment_bound,
    compare,
    iterated_bound,
    modulus,
    modulus_from_samples,
    moment_bound,
    tail_bound,
    taylor_remainder,
)
from .corpus import CORPUS_LABELS, build_corpus
from .exceptions import BudgetExceededError, PsiOperatorsError, ToleranceNotMetError
from .operators import (
    DIRECT,
    KINDS,
    QUADRATURE,
    IterationPlan,
    OperatorSpec,
    apply,
    apply_iterated,
    centered_moment,
)
from .quadrature import QuadratureConfig, integrate_weighted, tail_mass, truncation_radius

log = logging.getLogger("psi_operators")

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_TOLERANCE = 3

DENSITY_COLUMNS = ("schema_version", "record", "q", "beta", "B", "n", "alpha", "value", "bound", "residual", "passed")
CONVERGE_COLUMNS = (
    "schema_version", "kind", "q", "beta", "B", "n", "alpha", "label",
    "sup_error", "bound", "ratio", "quad_error", "conclusive",
)
BOUNDS_COLUMNS = (
    "schema_version", "record", "kind", "q", "beta", "B", "n", "alpha", "label",
    "k", "N", "value", "bound", "quad_error", "passed",
)
ITERATE_COLUMNS = (
    "schema_version", "kind", "q", "beta", "B", "chain", "alpha", "label", "empirical",
    "single_empirical", "stage_sum", "bound_r", "bound_sigma", "sup_output", "sup_norm",
    "quad_error", "passed",
)
SMOOTHNESS_COLUMNS = (
    "schema_version", "record", "kind", "q", "beta", "B", "n", "label", "theta",
    "omega_f", "omega_op", "quad_error", "passed",
)


class ConfigError(PsiOperatorsError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    q: Tuple[float, ...] = (0.5, 1.0, 2.0)
    beta: Tuple[float, ...] = (0.5, 1.0, 2.0)
    base: Tuple[float, ...] = (2.0, math.e)
    kinds: Tuple[str, ...] = KINDS
    n: Tuple[int, ...] = (16, 64, 256)
    alpha: float = 0.5
    corpus: Tuple[str, ...] = CORPUS_LABELS
    window: Tuple[float, float] = (-3.0, 3.0)
    step: float = 0.02
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    weights: Tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)
    format: str = "csv"
    out: str = ""
    thetas: Tuple[float, ...] = (0.05, 0.1, 0.5, 1.0)
    tail_n: Tuple[int, ...] = (9, 16, 25, 36, 64)
    moment_orders: Tuple[int, ...] = (1, 2, 3, 4, 5)
    taylor_orders: Tuple[int, ...] = (1, 2)
    taylor_n: Tuple[int, ...] = (64, 100)
    taylor_labels: Tuple[str, ...] = ("sin", "gauss")
    chains: Tuple[Tuple[int, ...], ...] = ((16,), (16, 16), (16, 16, 16), (9, 16, 25))
    iterate_labels: Tuple[str, ...] = ("sin", "gauss")
    jobs: int = 1

    def grid(self):
        a, b = self.window
        count = int(round((b - a) / self.step)) + 1
        return np.linspace(a, b, count)

    def triples(self):
        return [ActivationParams(q, b, B) for q, b, B in itertools.product(self.q, self.beta, self.base)]

    def spec(self, kind, n):
        return OperatorSpec(kind, n, self.weights if kind == QUADRATURE else None)


def _floats(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(math.e if tok.lower() == "e" else float(tok))
    return tuple(out)


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _words(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _chains(text):
    # "16x3" is a 3-fold power, "9-16-25" a chain of scales
    out = []
    for tok in _words(text):
        if "x" in tok:
            n, r = tok.split("x")
            out.append((int(n),) * int(r))
        else:
            out.append(tuple(int(v) for v in tok.split("-")))
    return tuple(out)


def _chain_name(chain):
    if len(set(chain)) == 1:
        return f"{chain[0]}x{len(chain)}"
    return "-".join(str(v) for v in chain)


PARSERS = {
    "q": ("q", _floats),
    "beta": ("beta", _floats),
    "b": ("base", _floats),
    "base": ("base", _floats),
    "kinds": ("kinds", _words),
    "n": ("n", _ints),
    "alpha": ("alpha", float),
    "corpus": ("corpus", _words),
    "window": ("window", _floats),
    "step": ("step", float),
    "weights": ("weights", _floats),
    "format": ("format", str.strip),
    "out": ("out", str.strip),
    "thetas": ("thetas", _floats),
    "tail_n": ("tail_n", _ints),
    "moment_orders": ("moment_orders", _ints),
    "taylor_orders": ("taylor_orders", _ints),
    "taylor_n": ("taylor_n", _ints),
    "taylor_labels": ("taylor_labels", _words),
    "chains": ("chains", _chains),
    "iterate_labels": ("iterate_labels", _words),
    "jobs": ("jobs", int),
}
QUAD_KEYS = {
    "tail_eps": ("tail_epsilon", float),
    "rel_tol": ("rel_tol", float),
    "max_refinements": ("max_refinements", int),
    "panel_width": ("panel_width", float),
}


def read_config_file(path):
    """Parse ``key = value`` lines into a dict of raw strings."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key.lower().replace("-", "_")] = value
    return entries


def build_config(entries) -> StudyConfig:
    """Turn raw key/value strings into a validated :class:`StudyConfig`."""
    kwargs = {}
    quad_kwargs = {}
    try:
        for key, raw in entries.items():
            if key in PARSERS:
                name, conv = PARSERS[key]
                kwargs[name] = conv(raw)
            elif key in QUAD_KEYS:
                name, conv = QUAD_KEYS[key]
                quad_kwargs[name] = conv(raw)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        defaults = StudyConfig()
        kwargs["quad"] = replace(defaults.quad, **quad_kwargs)
        config = StudyConfig(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    validate(config)
    return config


def validate(config: StudyConfig):
    """Reject a study before any computation starts."""
    try:
        config.triples()
        for kind in config.kinds:
            config.spec(kind, 1)
    except PsiOperatorsError as exc:
        raise ConfigError(str(exc)) from exc
    if not config.q or not config.beta or not config.base:
        raise ConfigError("the activation grid is empty")
    if not (0.0 < config.alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {config.alpha}")
    scales = set(config.n) | set(config.tail_n) | set(config.taylor_n) | {k for c in config.chains for k in c}
    for n in sorted(scales):
        if n < 1 or not n ** (1.0 - config.alpha) > 2.0:
            raise ConfigError(f"n = {n} violates n^(1-alpha) > 2 for alpha = {config.alpha}")
    unknown = [lab for lab in config.corpus + config.taylor_labels + config.iterate_labels if lab not in CORPUS_LABELS]
    if unknown:
        raise ConfigError(f"unknown corpus labels: {', '.join(unknown)}")
    if len(config.window) != 2 or not config.window[0] < config.window[1]:
        raise ConfigError(f"window must be 'a, b' with a < b, got {config.window}")
    if not config.step > 0:
        raise ConfigError("step must be positive")
    if config.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {config.format!r}")
    if any(not 1 <= len(c) <= 3 for c in config.chains):
        raise ConfigError("chains must have length 1, 2 or 3")
    if any(any(a > b for a, b in zip(c, c[1:])) for c in config.chains):
        raise ConfigError("chain scales must be nondecreasing")
    if config.jobs < 1:
        raise ConfigError("jobs must be positive")
    if any(k < 1 for k in config.moment_orders + config.taylor_orders):
        raise ConfigError("moment and Taylor orders must be positive")


def _format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def render(rows, columns, fmt):
    """Serialize rows as CSV or as a JSON array of flat records."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(row.get(c, "")) for c in columns])
        return buf.getvalue()
    records = []
    for row in rows:
        items = []
        for c in columns:
            v = row.get(c, None)
            if isinstance(v, (bool, np.bool_)):
                text = "true" if v else "false"
            elif isinstance(v, (int, float, np.integer, np.floating)):
                text = _format_value(v)
                if text in ("nan", "inf", "-inf"):
                    text = json.dumps(text)
            elif v is None:
                text = "null"
            else:
                text = json.dumps(str(v))
            items.append(f"{json.dumps(c)}: {text}")
        records.append("  {" + ", ".join(items) + "}")
    return "[\n" + ",\n".join(records) + "\n]\n" if records else "[]\n"


def _row(params=None, **values):
    row = {"schema_version": SCHEMA_VERSION}
    if params is not None:
        row.update(q=params.q, beta=params.beta, B=params.base)
    row.update(values)
    return row


def _sort_key(row):
    return tuple(
        (0, v) if isinstance(v, (int, float)) and not isinstance(v, bool) else (1, str(v))
        for v in (
            row.get("kind", ""), row.get("q", 0.0), row.get("beta", 0.0), row.get("B", 0.0),
            row.get("n", 0), row.get("chain", ""), row.get("label", ""), row.get("record", ""),
            row.get("k", 0), row.get("N", 0), row.get("theta", 0.0),
        )
    )


class Study:
    """Runs independent items, collects rows and failure messages."""

    def __init__(self, config: StudyConfig):
        self.config = config
        self.failures: List[str] = []
        self.shortfalls: List[str] = []

    def _guarded(self, item):
        # keep the rows of other items when one misses its tolerance
        try:
            return item()
        except (ToleranceNotMetError, BudgetExceededError) as exc:
            self.shortfalls.append(str(exc))
            return []

    def run(self, items: Sequence[Callable[[], list]]):
        if self.config.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                chunks = list(pool.map(self._guarded, items))
        else:
            chunks = [self._guarded(item) for item in items]
        rows = [row for chunk in chunks for row in chunk]
        rows.sort(key=_sort_key)
        return rows

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)
        return bool(ok)


# --- density-check ---------------------------------------------------------

def _density_items(study: Study):
    cfg = study.config
    sample = np.linspace(-10.0, 10.0, 1001)

    def item(params):
        kernel = DensityKernel(params)
        tag = f"(q={params.q:g}, beta={params.beta:g}, B={params.base:g})"
        rows = []
        mass = integrate_weighted(kernel, lambda h: np.ones_like(h), cfg.quad)
        res = abs(mass.value - 1.0)
        rows.append(_row(params, record="mass", value=mass.value, bound=1.0, residual=res,
                         passed=study.check(res <= 1e-8, f"mass {tag}: |int psi - 1| = {res:.3g}")))
        sym = float(np.max(np.abs(kernel.psi(sample) - kernel.psi(-sample))))
        rows.append(_row(params, record="psi_symmetry", value=sym, bound=1e-13, residual=sym,
                         passed=study.check(sym < 1e-13, f"psi evenness {tag}: {sym:.3g}")))
        deformed = float(np.max(np.abs(eval_G(params, -sample) - eval_G(params.mirrored(), sample))))
        rows.append(_row(params, record="G_deformed_symmetry", value=deformed, bound=1e-14, residual=deformed,
                         passed=study.check(deformed <= 1e-14, f"deformed symmetry {tag}: {deformed:.3g}")))
        loc = kernel.max_location
        fine = np.linspace(loc - 5.0, loc + 5.0, 100_001)
        g = kernel.G(fine)
        arg = fine[int(np.argmax(g))]
        loc_res = abs(arg - loc)
        rows.append(_row(params, record="max_location", value=arg, bound=loc, residual=loc_res,
                         passed=study.check(loc_res <= 1e-3, f"argmax G {tag}: off by {loc_res:.3g}")))
        top = float(kernel.G(loc))
        val_res = abs(top - kernel.max_value_G)
        rows.append(_row(params, record="max_value", value=top, bound=kernel.max_value_G, residual=val_res,
                         passed=study.check(val_res <= 1e-10, f"max G {tag}: off by {val_res:.3g}")))
        for n in cfg.tail_n:
            reach = n ** (1.0 - cfg.alpha)
            tm = tail_mass(kernel, reach, cfg.quad)
            tb = tail_bound(params, reach)
            rows.append(_row(params, record="tail", n=n, alpha=cfg.alpha, value=tm, bound=tb, residual=tb - tm,
                             passed=study.check(tm < tb, f"tail {tag} n={n}: {tm:.6g} >= {tb:.6g}")))
        return rows

    return [lambda p=p: item(p) for p in cfg.triples()]


# --- converge --------------------------------------------------------------

def _corpus(cfg, labels, n_min, quad=None, depth=1):
    # widen the verified region by how far the operator stages can look
    quad = quad or cfg.quad
    reach = max(truncation_radius(p, quad.tail_epsilon).radius for p in cfg.triples())
    margin = depth * (reach + 2.0) / n_min + 1.0
    return {e.label: e for e in build_corpus(labels, cfg.window, margin=margin)}


def _converge_items(study: Study):
    cfg = study.config
    grid = cfg.grid()
    corpus = _corpus(cfg, cfg.corpus, min(cfg.n))

    def item(params, kind, label):
        kernel = DensityKernel(params)
        target = corpus[label].target
        rows = []
        for n in sorted(cfg.n):
            rep = compare(target, cfg.spec(kind, n), BoundQuery(cfg.alpha, n, kind), grid, kernel, cfg.quad)
            rows.append(_row(params, kind=kind, n=n, alpha=cfg.alpha, label=label, sup_error=rep.empirical,
                             bound=rep.theoretical, ratio=rep.ratio, quad_error=rep.quad_error,
                             conclusive=rep.conclusive))
            tag = f"{kind} {label} n={n} (q={params.q:g}, beta={params.beta:g}, B={params.base:g})"
            study.check(rep.passed, f"{tag}: ratio {rep.ratio:.6g} > 1 + {RATIO_SLACK:g}")
        for prev, cur in zip(rows, rows[1:]):
            slack = prev["quad_error"] + cur["quad_error"] + 1e-12
            study.check(cur["sup_error"] <= prev["sup_error"] + slack,
                        f"{kind} {label}: sup error grew from n={prev['n']} to n={cur['n']}")
        return rows

    return [
        lambda p=p, k=k, lab=lab: item(p, k, lab)
        for p in cfg.triples() for k in cfg.kinds for lab in cfg.corpus
    ]


# --- bounds ----------------------------------------------------------------

def _bounds_items(study: Study):
    cfg = study.config
    grid = cfg.grid()
    corpus = _corpus(cfg, cfg.taylor_labels, min(cfg.taylor_n))
    max_order = max(cfg.taylor_orders)

    def moments(params):
        kernel = DensityKernel(params)
        rows = []
        for k in cfg.moment_orders:
            res = integrate_weighted(kernel, lambda h, k=k: np.abs(h) ** k, cfg.quad)
            mb = moment_bound(params, k)
            rows.append(_row(params, record="moment", kind="", k=k, value=res.value, bound=mb,
                             quad_error=res.error,
                             passed=study.check(res.value < mb, f"moment k={k} q={params.q:g}: {res.value:.6g} >= {mb:.6g}")))
        return rows

    def centered(params, kind):
        kernel = DensityKernel(params)
        rows = []
        for n in cfg.taylor_n:
            spec = cfg.spec(kind, n)
            for k in range(1, max_order + 1):
                m = centered_moment(spec, 0.0, k, kernel, cfg.quad, with_error=True)
                cb = centered_moment_bound(params, kind, n, k)
                ok = abs(m.value) <= cb
                if kind == DIRECT and k % 2:
                    ok = ok and abs(m.value) <= 1e-9
                rows.append(_row(params, record="centered_moment", kind=kind, n=n, k=k, value=m.value,
                                 bound=cb, quad_error=m.error,
                                 passed=study.check(ok, f"centered moment {kind} n={n} k={k}: {m.value:.6g}")))
        return rows

    def taylor(params, kind, label):
        kernel = DensityKernel(params)
        target = corpus[label].target
        rows = []
        for n in cfg.taylor_n:
            spec = cfg.spec(kind, n)
            for N in cfg.taylor_orders:
                query = BoundQuery(cfg.alpha, n, kind, N=N)
                values, errors = taylor_remainder(target, spec, grid, N, kernel, cfg.quad)
                emp = float(np.max(values))
                bound = bound_taylor(target, query, params).remainder_bound
                rows.append(_row(params, record="taylor_remainder", kind=kind, n=n, alpha=cfg.alpha, label=label,
                                 N=N, value=emp, bound=bound, quad_error=float(np.max(errors)),
                                 passed=study.check(emp <= bound, f"Taylor {kind} {label} n={n} N={N}: {emp:.6g} > {bound:.6g}")))
        return rows

    items = [lambda p=p: moments(p) for p in cfg.triples()]
    items += [lambda p=p, k=k: centered(p, k) for p in cfg.triples() for k in cfg.kinds]
    items += [
        lambda p=p, k=k, lab=lab: taylor(p, k, lab)
        for p in cfg.triples() for k in cfg.kinds for lab in cfg.taylor_labels
    ]
    return items


# --- iterate ---------------------------------------------------------------

REFINE_POINTS = 201


def _refined_sup(deviation, grid, values):
    """Grid sup of ``|deviation|`` polished on a dense patch around the argmax."""
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    patch = np.linspace(lo, hi, REFINE_POINTS)
    return max(float(values[i]), float(np.max(np.abs(deviation(patch)))))


def _iterate_items(study: Study):
    cfg = study.config
    quad = cfg.quad
    grid = cfg.grid()
    scales = sorted({k for c in cfg.chains for k in c})
    corpus = _corpus(cfg, cfg.iterate_labels, scales[0], quad, max(len(ch) for ch in cfg.chains))

    def item(params, kind, label):
        kernel = DensityKernel(params)
        target = corpus[label].target
        f_grid = target(grid)
        singles = {}
        for n in scales:
            spec = cfg.spec(kind, n)
            res = apply(target, spec, grid, kernel, quad, with_error=True)
            dev = np.abs(res.value - f_grid)
            # The telescoping argument needs the true sup of one stage, which
            # the grid can only underestimate.
            sup = _refined_sup(lambda x, s=spec: apply(target, s, x, kernel, quad) - target(x), grid, dev)
            singles[n] = (float(np.max(dev)), sup, float(np.max(res.error)), float(np.max(np.abs(res.value))))
        rows = []
        for chain in cfg.chains:
            plan = IterationPlan(tuple(cfg.spec(kind, n) for n in chain), monotone=True)
            res = apply_iterated(target, plan, grid, kernel, quad, with_error=True)
            emp = float(np.max(np.abs(res.value - f_grid)))
            qerr = float(np.max(res.error)) + sum(singles[n][2] for n in chain)
            single = singles[chain[0]][0]
            stage_sum = sum(singles[n][1] for n in chain)
            one = bound_for_kind(target, BoundQuery(cfg.alpha, chain[0], kind), params)
            sigma = iterated_bound(target, plan, params, cfg.alpha)
            # non-expansiveness is checked after every stage, not only the last
            sup_out = max(float(np.max(np.abs(res.value))), singles[chain[0]][3])
            for depth in range(2, len(chain)):
                prefix = IterationPlan(plan.chain[:depth], monotone=True)
                sup_out = max(sup_out, float(np.max(np.abs(apply_iterated(target, prefix, grid, kernel, quad)))))
            slack = qerr + 1e-9
            tag = f"{kind} {label} chain {_chain_name(chain)} (q={params.q:g}, beta={params.beta:g}, B={params.base:g})"
            ok = study.check(emp <= stage_sum + slack, f"{tag}: {emp:.6g} > stage sum {stage_sum:.6g}")
            ok &= study.check(emp <= sigma, f"{tag}: {emp:.6g} > summed bound {sigma:.6g}")
            ok &= study.check(emp <= len(chain) * one, f"{tag}: {emp:.6g} > r x bound at k_1 {len(chain) * one:.6g}")
            ok &= study.check(sup_out <= target.sup_norm + 1e-7, f"{tag}: output sup {sup_out:.6g} exceeds the input norm")
            rows.append(_row(params, kind=kind, chain=_chain_name(chain), alpha=cfg.alpha, label=label,
                             empirical=emp, single_empirical=single, stage_sum=stage_sum,
                             bound_r=len(chain) * one, bound_sigma=sigma, sup_output=sup_out,
                             sup_norm=target.sup_norm, quad_error=qerr, passed=ok))
        return rows

    return [
        lambda p=p, k=k, lab=lab: item(p, k, lab)
        for p in cfg.triples() for k in cfg.kinds for lab in cfg.iterate_labels
    ]


# --- smoothness ------------------------------------------------------------

def _smoothness_items(study: Study):
    cfg = study.config
    grid = cfg.grid()
    step = (grid[-1] - grid[0]) / (grid.size - 1)
    corpus = _corpus(cfg, cfg.corpus, min(cfg.n))

    def item(params, kind, label):
        kernel = DensityKernel(params)
        target = corpus[label].target
        # omega(f) from the closed form or the fine estimator; omega(Op f) from
        # the study grid, which can only underestimate the continuum sup.
        reference = {theta: modulus(target, theta) for theta in cfg.thetas}
        rows = []
        for n in cfg.n:
            res = apply(target, cfg.spec(kind, n), grid, kernel, cfg.quad, with_error=True)
            qerr = float(np.max(res.error))
            for theta in cfg.thetas:
                w_f = reference[theta]
                w_op = modulus_from_samples(res.value, step, theta)
                tag = f"{kind} {label} n={n} theta={theta:g} (q={params.q:g}, beta={params.beta:g}, B={params.base:g})"
                ok = study.check(w_op <= w_f + 2.0 * qerr, f"{tag}: omega(Op f) {w_op:.6g} > omega(f) {w_f:.6g}")
                rows.append(_row(params, record="modulus", kind=kind, n=n, label=label, theta=theta,
                                 omega_f=w_f, omega_op=w_op, quad_error=qerr, passed=ok))
                if label == "id":
                    sharp = abs(w_op - theta) <= step and abs(w_f - theta) <= step
                    rows.append(_row(params, record="id_sharpness", kind=kind, n=n, label=label, theta=theta,
                                     omega_f=w_f, omega_op=w_op, quad_error=qerr,
                                     passed=study.check(sharp, f"{tag}: identity moduli differ from theta")))
        return rows

    return [
        lambda p=p, k=k, lab=lab: item(p, k, lab)
        for p in cfg.triples() for k in cfg.kinds for lab in cfg.corpus
    ]


COMMANDS = {
    "density-check": (_density_items, DENSITY_COLUMNS),
    "converge": (_converge_items, CONVERGE_COLUMNS),
    "bounds": (_bounds_items, BOUNDS_COLUMNS),
    "iterate": (_iterate_items, ITERATE_COLUMNS),
    "smoothness": (_smoothness_items, SMOOTHNESS_COLUMNS),
}


def make_parser():
    parser = argparse.ArgumentParser(prog="psi-ops", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value study file")
    common.add_argument("--out", metavar="PATH", help="report path (default: <command>.<format>)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--tail-eps", type=float, help="kernel mass allowed outside the truncation window")
    common.add_argument("--rel-tol", type=float, help="refinement tolerance")
    common.add_argument("--window", metavar="A,B", help="x-window of the study grid")
    common.add_argument("--step", type=float, help="spacing of the study grid")
    common.add_argument("--jobs", type=int, help="worker threads for independent study items")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def load_config(args) -> StudyConfig:
    entries = read_config_file(args.config) if args.config else {}
    overrides = {
        "out": args.out,
        "format": args.format,
        "tail_eps": None if args.tail_eps is None else repr(args.tail_eps),
        "rel_tol": None if args.rel_tol is None else repr(args.rel_tol),
        "window": args.window,
        "step": None if args.step is None else repr(args.step),
        "jobs": None if args.jobs is None else str(args.jobs),
    }
    entries.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(entries)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    make_items, columns = COMMANDS[args.command]
    study = Study(config)
    out = config.out or f"{args.command}.{config.format}"
    status = EXIT_OK
    rows = study.run(make_items(study))
    for msg in study.shortfalls:
        print(f"tolerance not met: {msg}", file=sys.stderr)
        status = EXIT_TOLERANCE
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(render(rows, columns, config.format))
    log.info("wrote %d rows to %s", len(rows), out)
    if study.failures:
        for msg in study.failures:
            print(f"FAIL {msg}", file=sys.stderr)
        status = status or EXIT_ASSERTION
    return status


if __name__ == "__main__":
    sys.exit(main())
