"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line, then asserts.  The benchmark
experiments take several minutes on one core; set ``QUARMA_WORKERS`` to
spread runs over processes and ``QUARMA_ACCEPTANCE_OUT`` to keep the
curves, summaries and plots.  Run on its own with

    pytest tests/test_acceptance.py -m acceptance
    python tests/test_acceptance.py
"""

import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from quarma.bench import bundled_config_path, emit_outputs, parse_config, run_experiment
from quarma.learners import DecisionSet, QogdLearner, QonsLearner
from quarma.quat_core import (
    AugmentedVector,
    decompose,
    flatten,
    j_matrix,
    lift,
    qabs2,
    qconj,
    qinvolution,
    qmul,
    qnorm,
)
from quarma.quat_linalg import (
    InverseTracker,
    complex_adjoint,
    hermitian_transpose,
    identity,
    qdet,
    qinv,
    qmatmul,
)
from quarma.reference import reference_ogd, reference_ons
from quarma.signal_model import generate_qarma, ghr_gradient, padded, squared_loss

pytestmark = pytest.mark.acceptance

WORKERS = int(os.environ.get("QUARMA_WORKERS", "1"))

C1_BAND = (0.36, 0.414)
C2_BAND = (0.333, 0.383)
C4_TOL = {"qogd": 1e-8, "qons": 1e-7}
C5_TOL = 1e-6
C6_RESIDUAL = 1e-8
C6_POTENTIAL_SLACK = 1e-8
C6_QDET_RTOL = 1e-10
C8_CASES = 1000


def report(cid, ok, detail):
    line = f"{cid} {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    return line


@pytest.fixture
def check(capsys):
    def _check(cid, ok, detail):
        with capsys.disabled():
            print()
            report(cid, ok, detail)
        assert ok, f"{cid}: {detail}"

    return _check


def _run(name, tmp_path_factory, algorithms=None):
    cfg = parse_config(bundled_config_path(name))
    if algorithms is not None:
        cfg = replace(cfg, algorithms=tuple(algorithms))
    rep = run_experiment(cfg, workers=WORKERS)
    root = os.environ.get("QUARMA_ACCEPTANCE_OUT")
    out = Path(root) / name if root else tmp_path_factory.mktemp(name)
    emit_outputs(rep, out)
    return rep


@pytest.fixture(scope="module")
def ex1(tmp_path_factory):
    return _run("example1", tmp_path_factory)


@pytest.fixture(scope="module")
def ex2(tmp_path_factory):
    return _run("example2", tmp_path_factory, ("qogd", "qons"))


def _finals(rep, algos):
    return {a: rep.final_avg_mse(a) for a in algos}


def _fmt_finals(finals):
    return " ".join(f"{a}={v:.4f}" for a, v in finals.items())


def test_c1_example1_final_mse_band(ex1, check):
    f = _finals(ex1, ("qogd", "qons"))
    lo, hi = C1_BAND
    ok = all(lo <= v <= hi for v in f.values())
    check("C1", ok, f"example1 final avg MSE {_fmt_finals(f)}; band [{lo}, {hi}]")


def test_c2_example2_final_mse_band(ex2, check):
    f = _finals(ex2, ("qogd", "qons"))
    lo, hi = C2_BAND
    ok = all(lo <= v <= hi for v in f.values())
    check("C2", ok, f"example2 final avg MSE {_fmt_finals(f)}; band [{lo}, {hi}]")


def test_c3_componentwise_baselines_lose(ex1, check):
    f = _finals(ex1, ex1.algorithms)
    ok = f["cw_ogd"] > f["qogd"] and f["cw_ons"] > f["qons"]
    mc = f"; multichannel (not gated) mc_ogd={f['mc_ogd']:.4f} mc_ons={f['mc_ons']:.4f}" if "mc_ogd" in f else ""
    check(
        "C3",
        ok,
        f"cw_ogd={f['cw_ogd']:.4f} > qogd={f['qogd']:.4f}, cw_ons={f['cw_ons']:.4f} > qons={f['qons']:.4f}{mc}",
    )


def _path(learner, series):
    n = learner.dset.dim
    xp = padded(series, n)
    out = []
    for s in range(series.shape[0]):
        learner.step(xp[s:s + n][::-1], series[s])
        out.append(decompose(learner.gamma))
    return np.array(out)


def _deviation(a, b):
    return float(np.max(np.linalg.norm(a - b, axis=1) / np.maximum(np.linalg.norm(b, axis=1), 1e-300)))


def test_c4_oracle_equivalence(check):
    cfg = parse_config(bundled_config_path("example1"))
    series, _ = generate_qarma(cfg.spec, cfg.noise.with_seed(cfg.base_seed), 1000, cfg.burn_in)
    p, n, c = cfg.params, cfg.dim, cfg.params.c
    dset = DecisionSet(c, n)
    dev_ogd = _deviation(
        _path(QogdLearner(dset, H=p.H, eta=p.ogd_eta, eta_max=p.ogd_eta_max), series),
        reference_ogd(series, n, c, H=p.H, eta=p.ogd_eta, eta_max=p.ogd_eta_max),
    )
    # the bundled Newton constants, plus a small eps that keeps the weighted projection busy
    dev_ons = 0.0
    for eta, eps in ((p.eta, p.eps), (2.0, 1e-3)):
        got = _path(QonsLearner(dset, eta=eta, eps=eps), series)
        dev_ons = max(dev_ons, _deviation(got, reference_ons(series, n, c, eta=eta, eps=eps)))
    ok = dev_ogd < C4_TOL["qogd"] and dev_ons < C4_TOL["qons"]
    check("C4", ok, f"max relative deviation qogd {dev_ogd:.2e} (< {C4_TOL['qogd']:g}), "
                    f"qons {dev_ons:.2e} (< {C4_TOL['qons']:g}) over 1000 steps")


def test_c5_gradient_finite_differences(check):
    rng = np.random.default_rng(5)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        gamma, win, x = rng.normal(size=(n, 4)), rng.normal(size=(n, 4)), rng.normal(size=4)
        analytic = 4.0 * ghr_gradient(gamma, win, x)  # real-coordinate gradient
        fd = np.empty_like(gamma)
        for i in range(n):
            for k in range(4):
                up, dn = gamma.copy(), gamma.copy()
                up[i, k] += h
                dn[i, k] -= h
                fd[i, k] = (squared_loss(x, qmul(up, win).sum(0)) - squared_loss(x, qmul(dn, win).sum(0))) / (2 * h)
        worst = max(worst, np.linalg.norm(fd - analytic) / np.linalg.norm(analytic))
    check("C5", worst < C5_TOL, f"max relative error {worst:.2e} over 100 instances (< {C5_TOL:g})")


def _random_hpd(rng, n):
    B = rng.normal(size=(n, n, 4))
    return qmatmul(B, hermitian_transpose(B)) + identity(n, 0.5)


def test_c6_linear_algebra(ex1, ex2, check):
    rng = np.random.default_rng(6)
    tr = InverseTracker.scaled_identity(40, 0.01)
    for _ in range(10_000):
        tr.rank1_update(rng.normal(size=(40, 4)))
    residual = tr.residual()

    gaps = [d["potential_gap_min"] for rep in (ex1, ex2) for d in rep.diagnostics["qons"]]
    worst_gap = min(gaps)

    worst_rel = 0.0
    for _ in range(100):
        A, B = _random_hpd(rng, 3), _random_hpd(rng, 3)
        ab, ba = qdet(qmatmul(A, B)), qdet(qmatmul(B, A))
        lam = np.linalg.eigvalsh(complex_adjoint(A))[::2]
        worst_rel = max(
            worst_rel,
            abs(qdet(A) - np.prod(lam**2)) / qdet(A),
            abs(ab - ba) / ab,
            abs(qdet(qinv(A)) * qdet(A) - 1.0),
        )
    ok = residual < C6_RESIDUAL and worst_gap >= -C6_POTENTIAL_SLACK and worst_rel < C6_QDET_RTOL
    check(
        "C6",
        ok,
        f"tracked inverse residual {residual:.1e} after 1e4 updates at dim 40; "
        f"min potential gap {worst_gap:.3g} over {len(gaps)} runs; qdet identities max rel err {worst_rel:.1e}",
    )


def test_c7_excess_loss_decreases(ex1, check):
    ts = (100, 1000, 10_000)
    parts, ok = [], True
    for algo in ("qogd", "qons"):
        ex = ex1.excess_at(algo, ts)
        ok &= bool(np.all(np.diff(ex) < 0))
        parts.append(f"{algo} " + ", ".join(f"{v:.4f}" for v in ex))
    check("C7", ok, "average excess at t=100, 1000, 10000: " + "; ".join(parts))


def test_c8_algebra_laws(check):
    rng = np.random.default_rng(8)
    p, q = rng.normal(size=(2, C8_CASES, 4))
    errs = {
        "norm": np.max(np.abs(qnorm(qmul(p, q)) - qnorm(p) * qnorm(q)) / (qnorm(p) * qnorm(q))),
        "conj": np.max(np.abs(qconj(qmul(p, q)) - qmul(qconj(q), qconj(p)))),
        "inv": max(np.max(np.abs(qinvolution(qinvolution(p, a), a) - p)) for a in "ijk"),
        "q*q": np.max(np.abs(qmul(p, qconj(p)) - np.c_[qabs2(p), np.zeros((C8_CASES, 3))])),
    }
    jj, rt = 0.0, 0.0
    for case in range(C8_CASES):
        n = 1 + case % 5
        J = j_matrix(n)
        if case < 25:
            JJ = qmatmul(J, hermitian_transpose(J))
            jj = max(jj, np.max(np.abs(JJ - identity(4 * n, 4.0))))
        r = rng.normal(size=4 * n)
        u = lift(r)
        g = rng.normal(size=(n, 4))
        rt = max(
            rt,
            np.max(np.abs(flatten(u) - r)),
            np.max(np.abs(AugmentedVector.from_quat(g).blocks - lift(decompose(g)).blocks)),
        )
    errs["JJ^H"] = jj
    errs["round trip"] = rt
    ok = all(v < 1e-12 for v in errs.values())
    check("C8", ok, f"{C8_CASES} cases per law, max errors " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))


@pytest.mark.parametrize("name", ["example1_negated_beta", "example2_negated_beta"])
def test_supplementary_invertible_model(name, tmp_path_factory, capsys):
    """Same setups with the moving-average coefficients negated.  Reported, not gated."""
    rep = _run(name, tmp_path_factory, ("qogd", "qons"))
    band = C1_BAND if name.startswith("example1") else C2_BAND
    f = _finals(rep, ("qogd", "qons"))
    inside = all(band[0] <= v <= band[1] for v in f.values())
    with capsys.disabled():
        print()
        print(f"S{name[7]}   INFO  {name} final avg MSE {_fmt_finals(f)}; "
              f"{'inside' if inside else 'outside'} [{band[0]}, {band[1]}]")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-m", "acceptance"]))
