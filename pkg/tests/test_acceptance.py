"""Acceptance criteria, each run at its stated tolerance on the default study.

Every test prints (and records for the terminal summary) one line
``PASS criterion N: ...`` or ``FAIL criterion N: ...``. The heavy studies run
through the command-line front end once per session; the criteria are then
re-checked from the emitted rows instead of trusting the exit code alone.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import csv
import filecmp
import itertools
import math
from collections import defaultdict

import numpy as np
import pytest

from psi_operators import (
    DIRECT,
    KANTOROVICH,
    KINDS,
    ActivationParams,
    DensityKernel,
    OperatorSpec,
    QUADRATURE,
    apply,
    derivative_commutation_check,
    make_target,
    moment_bound,
)
from psi_operators import cli

from conftest import ACCEPTANCE_LINES

GRID = [ActivationParams(q, b, B) for q, b, B in itertools.product((0.5, 1.0, 2.0), (0.5, 1.0, 2.0), (2.0, math.e))]
XS = np.linspace(-3.0, 3.0, 301)


def report(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def studies(tmp_path_factory):
    """Run each subcommand once on the default configuration."""
    root = tmp_path_factory.mktemp("studies")
    cache = {}

    def get(command):
        if command not in cache:
            out = root / f"{command}.csv"
            code = cli.main([command, "--out", str(out)])
            with open(out) as fh:
                cache[command] = (code, list(csv.DictReader(fh)))
        return cache[command]

    return get


def num(row, key):
    return float(row[key])


def is_e(row):
    return abs(num(row, "B") - math.e) < 1e-15


def test_c01_density_normalization(studies):
    code, rows = studies("density-check")
    mass = [r for r in rows if r["record"] == "mass"]
    sym = [r for r in rows if r["record"] == "psi_symmetry"]
    worst_mass = max(abs(num(r, "value") - 1.0) for r in mass)
    worst_sym = max(num(r, "value") for r in sym)
    ok = len(mass) == len(sym) == 18 and worst_mass <= 1e-8 and worst_sym < 1e-13
    report(1, "density normalization", ok, f"max |mass-1| = {worst_mass:.2e}, max evenness residual = {worst_sym:.2e}")


def test_c02_deformed_symmetry(studies):
    _, rows = studies("density-check")
    sym = [r for r in rows if r["record"] == "G_deformed_symmetry"]
    worst = max(num(r, "value") for r in sym)
    report(2, "deformed symmetry", len(sym) == 18 and worst <= 1e-14, f"max residual = {worst:.2e}")


def test_c03_global_maximum(studies):
    _, rows = studies("density-check")
    loc = [r for r in rows if r["record"] == "max_location"]
    val = [r for r in rows if r["record"] == "max_value"]
    worst_loc = max(num(r, "residual") for r in loc)
    worst_val = max(num(r, "residual") for r in val)
    # the reference values in the rows are recomputed here from the closed forms
    closed = all(
        abs(num(r, "bound") - math.log(num(r, "q"), num(r, "B")) / num(r, "beta")) < 1e-12 for r in loc
    ) and all(
        abs(num(r, "bound") - (num(r, "B") ** num(r, "beta") - 1) / (2 * (num(r, "B") ** num(r, "beta") + 1))) < 1e-15
        for r in val
    )
    ok = len(loc) == len(val) == 18 and closed and worst_loc <= 1e-3 and worst_val <= 1e-10
    report(3, "global maximum of G", ok, f"argmax off by <= {worst_loc:.1e}, value off by <= {worst_val:.1e}")


def test_c04_tail_domination(studies):
    _, rows = studies("density-check")
    tail = [r for r in rows if r["record"] == "tail"]
    strict = all(num(r, "value") < num(r, "bound") for r in tail)
    ns = {int(r["n"]) for r in tail}
    spot = [r for r in tail if r["q"] == "1" and r["beta"] == "1" and is_e(r) and r["n"] == "16"][0]
    spot_ok = abs(num(spot, "bound") - 2 * math.exp(-3)) < 1e-15 and abs(num(spot, "bound") - 0.09957) < 5e-6
    ok = len(tail) == 90 and ns == {9, 16, 25, 36, 64} and strict and spot_ok
    report(4, "tail domination", ok, f"90 rows strict; spot bound {num(spot, 'bound'):.5f} vs tail {num(spot, 'value'):.5f}")


def test_c05_moment_domination(studies):
    _, rows = studies("bounds")
    mom = [r for r in rows if r["record"] == "moment"]
    strict = all(num(r, "value") < num(r, "bound") for r in mom)
    spot = moment_bound(ActivationParams(1.0, 1.0, math.e), 1)
    # the quoted 5.66761 is the closed form 5.6676222... cut after five decimals
    ok = len(mom) == 90 and {int(r["k"]) for r in mom} == {1, 2, 3, 4, 5} and strict and abs(spot - 5.66761) < 2e-5
    report(5, "moment domination", ok, f"90 rows strict; spot bound {spot:.6f}")


def test_c06_jackson_domination(studies):
    code, rows = studies("converge")
    conclusive = [r for r in rows if r["conclusive"] == "true"]
    worst_ratio = max(num(r, "ratio") for r in conclusive)
    groups = defaultdict(list)
    for r in rows:
        groups[(r["kind"], r["q"], r["beta"], r["B"], r["label"])].append(r)
    monotone = True
    for g in groups.values():
        g.sort(key=lambda r: int(r["n"]))
        for a, b in zip(g, g[1:]):
            slack = num(a, "quad_error") + num(b, "quad_error") + 1e-12
            monotone &= num(b, "sup_error") <= num(a, "sup_error") + slack
    complete = len(rows) == 18 * 3 * 8 * 3
    ok = code == 0 and complete and worst_ratio <= 1 + 1e-3 and monotone
    report(6, "Jackson-type domination", ok,
           f"{len(rows)} rows, {len(conclusive)} conclusive, max ratio {worst_ratio:.3f}, monotone in n: {monotone}")


def test_c07_exactness():
    const, ident = make_target("const").target, make_target("id", half_width=40.0).target
    worst_c = worst_id = worst_k = 0.0
    for p in GRID:
        kern = DensityKernel(p)
        for n in (16, 64, 256):
            for kind in KINDS:
                spec = OperatorSpec(kind, n, (0.25,) * 4 if kind == QUADRATURE else None)
                worst_c = max(worst_c, float(np.max(np.abs(apply(const, spec, XS, kern) - 1.0))))
            worst_id = max(worst_id, float(np.max(np.abs(apply(ident, OperatorSpec(DIRECT, n), XS, kern) - XS))))
            shifted = apply(ident, OperatorSpec(KANTOROVICH, n), XS, kern) - (XS + 1 / (2 * n))
            worst_k = max(worst_k, float(np.max(np.abs(shifted))))
    ok = max(worst_c, worst_id, worst_k) <= 1e-8
    report(7, "exactness cases", ok, f"constants {worst_c:.1e}, A_n(id) {worst_id:.1e}, A*_n(id) {worst_k:.1e}")


def test_c08_smoothness_preservation(studies):
    code, rows = studies("smoothness")
    mod = [r for r in rows if r["record"] == "modulus"]
    sharp = [r for r in rows if r["record"] == "id_sharpness"]
    held = all(num(r, "omega_op") <= num(r, "omega_f") + 2 * num(r, "quad_error") for r in mod)
    step = 0.02
    sharp_ok = all(abs(num(r, "omega_op") - num(r, "theta")) <= step for r in sharp)
    thetas = {num(r, "theta") for r in mod}
    ok = code == 0 and held and sharp_ok and thetas == {0.05, 0.1, 0.5, 1.0} and len(mod) == 18 * 3 * 8 * 3 * 4
    slack = max(num(r, "omega_op") - num(r, "omega_f") for r in mod)
    report(8, "smoothness preservation", ok, f"{len(mod)} modulus rows, max omega(Op f) - omega(f) = {slack:.2e}")


def test_c09_derivative_commutation():
    worst = 0.0
    count = 0
    for p in GRID:
        kern = DensityKernel(p)
        for label in ("sin", "gauss"):
            f = make_target(label).target
            for kind in KINDS:
                spec = OperatorSpec(kind, 16, (0.25,) * 4 if kind == QUADRATURE else None)
                for k in (1, 2):
                    for x in (-1.5, 0.0, 0.7, 2.0):
                        worst = max(worst, derivative_commutation_check(f, spec, x, k, kern).residual)
                        count += 1
    report(9, "derivative commutation", worst <= 1e-3, f"{count} checks, max residual {worst:.1e}")


def test_c10_taylor_remainder(studies):
    code, rows = studies("bounds")
    taylor = [r for r in rows if r["record"] == "taylor_remainder"]
    held = all(num(r, "value") <= num(r, "bound") for r in taylor)
    odd = [r for r in rows if r["record"] == "centered_moment" and r["kind"] == DIRECT and int(r["k"]) % 2]
    odd_ok = all(abs(num(r, "value")) <= 1e-9 for r in odd)
    shape = {(r["label"], r["N"], r["n"]) for r in taylor} == {
        (lab, N, n) for lab in ("gauss", "sin") for N in ("1", "2") for n in ("64", "100")
    }
    ok = code == 0 and held and odd_ok and shape and len(taylor) == 18 * 3 * 8
    worst = max(num(r, "value") / num(r, "bound") for r in taylor)
    report(10, "Taylor remainder", ok, f"{len(taylor)} rows, max value/bound {worst:.3f}; odd direct moments <= 1e-9: {odd_ok}")


def test_c11_iterated_bounds(studies):
    code, rows = studies("iterate")
    homo = [r for r in rows if "x" in r["chain"] and not r["chain"].endswith("x1")]
    mono = [r for r in rows if "-" in r["chain"]]
    homo_ok = all(
        num(r, "empirical") <= num(r, "stage_sum") + num(r, "quad_error") + 1e-9
        and num(r, "empirical") <= num(r, "bound_r")
        for r in homo
    )
    mono_ok = all(num(r, "empirical") <= num(r, "bound_sigma") for r in mono)
    contraction = all(num(r, "sup_output") <= num(r, "sup_norm") + 1e-7 for r in rows)
    ok = code == 0 and homo and mono and homo_ok and mono_ok and contraction
    report(11, "iterated bounds", ok, f"{len(homo)} homogeneous and {len(mono)} monotone chain rows")


SMALL = "q = 0.5, 2\nbeta = 1\nB = 2, e\nn = 16, 64\ncorpus = sin, ramp\ntaylor_n = 64\nwindow = -1, 1\nstep = 0.05\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_c12_determinism(tmp_path, fmt):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    same = True
    for command in cli.COMMANDS:
        # density-check is cheap enough to repeat on the full default grid
        base = [command, "--format", fmt] + ([] if command == "density-check" else ["--config", str(cfg)])
        outs = []
        for i, jobs in enumerate(("1", "1", "3")):
            out = tmp_path / f"{command}-{i}.{fmt}"
            cli.main(base + ["--out", str(out), "--jobs", jobs])
            outs.append(out)
        same &= all(filecmp.cmp(outs[0], o, shallow=False) for o in outs[1:])
    report(12, f"determinism ({fmt})", same, "every subcommand, two serial runs and one with 3 threads")
