"""Acceptance gate: one test per criterion, each at its stated tolerance."""

import math
import time

import numpy as np
import pytest

from truncgrad.chain_model import build_blocks, verify_drift
from truncgrad.cycle_values import cycle_quantities
from truncgrad.errors import HypothesisFailure
from truncgrad.gradient_interval import dtmc_enclosure
from truncgrad.linsys import theorem1_bounds
from truncgrad.models import GM1Chain, gm1_xi, jackson_chain
from truncgrad.models.gm1 import gm1_tail
from truncgrad.models.synthetic import birth_death_chain, exact_lyapunov, finite_chain_oracle, random_nonneg_system
from truncgrad.report import config_from_dict, run_sweep

GM1_ALPHA = 1.2046186974
GM1_DALPHA = -1.9530450987
JACKSON_ALPHA = 2.316614420063
JACKSON_DALPHA = 4.38785487564
TOL = 1e-9


def timed_sweep(raw):
    t0 = time.perf_counter()
    records, summary = run_sweep(config_from_dict(raw))
    return records, summary, time.perf_counter() - t0


@pytest.fixture(scope="module")
def gm1_sweep():
    return timed_sweep({"model": {"name": "gm1"}, "sweep": {"n_min": 15, "n_max": 80}})


@pytest.fixture(scope="module")
def gm1_long():
    return timed_sweep({"model": {"name": "gm1"}, "sweep": {"n_min": 81, "n_max": 100}})


@pytest.fixture(scope="module")
def jackson_sweep():
    return timed_sweep({"model": {"name": "jackson"}, "sweep": {"n_min": 15, "n_max": 60}})


def ok_rows(records):
    rows = [r for r in records if r.hypothesis_ok]
    assert rows, "no row passed its hypothesis checks"
    return rows


@pytest.mark.criterion(1, "G/M/1 gradient containment, n = 15..80, < 10 s")
def test_gm1_gradient_containment(gm1_sweep):
    records, _, elapsed = gm1_sweep
    assert [r.n for r in records] == list(range(15, 81))
    for r in ok_rows(records):
        assert r.dalpha_lo - TOL <= GM1_DALPHA <= r.dalpha_hi + TOL, r.n
    print(f"G/M/1 sweep: {len(records)} rows in {elapsed:.2f} s")
    assert elapsed < 10.0


@pytest.mark.criterion(2, "G/M/1 level containment, n = 15..80")
def test_gm1_level_containment(gm1_sweep):
    for r in ok_rows(gm1_sweep[0]):
        assert r.alpha_lo - TOL <= GM1_ALPHA <= r.alpha_hi + TOL, r.n


@pytest.mark.criterion(3, "Jackson containment of alpha and alpha', n = 15..60, < 120 s")
def test_jackson_containment(jackson_sweep):
    records, _, elapsed = jackson_sweep
    for r in ok_rows(records):
        assert r.states <= 3721
        assert r.alpha_lo - TOL <= JACKSON_ALPHA <= r.alpha_hi + TOL, r.n
        assert r.dalpha_lo - TOL <= JACKSON_DALPHA <= r.dalpha_hi + TOL, r.n
    print(f"Jackson sweep: {len(records)} rows in {elapsed:.2f} s")
    assert elapsed < 120.0


@pytest.mark.criterion(4, "gap_rel non-increasing and reaches 1e-2")
def test_accuracy_trend(gm1_sweep, gm1_long, jackson_sweep):
    for records, n_cap in ((gm1_sweep[0] + gm1_long[0], 100), (jackson_sweep[0],  60)):
        rows = [r for r in records if r.n >= ok_rows(records)[0].n]
        assert all(r.hypothesis_ok for r in rows)
        gaps = [r.gap_rel for r in rows]
        for a, b in zip(gaps, gaps[1:]):
            assert b <= a + 1e-10
        hit = [r.n for r in rows if r.gap_rel <= 1e-2 and r.n <= n_cap]
        assert hit
        print(f"first n with gap_rel <= 1e-2: {hit[0]}")


@pytest.mark.criterion(5, "level error bounds hold on 200 random systems, < 5 s")
def test_level_bounds_random_suite():
    t0 = time.perf_counter()
    for seed in range(200):
        size = 2 + seed % 19
        rs = random_nonneg_system(seed, size, slack=1e-9)
        res = theorem1_bounds(rs.system)
        nk, nkap = rs.split[0], rs.n_kappa
        scale = 1e-12 * (1 + np.max(rs.u_star))
        assert np.all(np.abs(rs.u_star[:nkap] - res.u_tilde) <= res.eps_kappa + scale), seed
        assert np.all(rs.u_star[:nk] <= res.m + scale), seed
        assert np.all(rs.u_star[nkap:] <= rs.v[nkap:] + res.m + scale), seed
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.criterion(6, "exact collapse on a finite birth-death chain")
def test_exactness_degeneration():
    chain = birth_death_chain()
    chain.lyapunov = exact_lyapunov(chain, ["r", "e"])
    enc = dtmc_enclosure(chain, 0)
    ref = finite_chain_oracle(chain)
    for q in enc.quantities.values():
        assert q.mu1 <= 1e-12 and q.mu1_prime <= 1e-12
    assert enc.dalpha_hi - enc.dalpha_lo <= 1e-10
    assert abs(enc.dalpha_lo - ref["alpha_prime"]) <= 1e-10
    assert abs(enc.dalpha_hi - ref["alpha_prime"]) <= 1e-10


def _fd_ratio(chain, label, n=40):
    def wt(ch):
        blocks = build_blocks(ch, ch.partition(n))
        return cycle_quantities(blocks, ch.rewards[label], label)

    q0 = wt(chain)
    errs = []
    for h in (1e-4, 1e-5):
        fd = (wt(chain.at_theta(chain.theta0 + h)).w_tilde - wt(chain.at_theta(chain.theta0 - h)).w_tilde) / (2 * h)
        errs.append(abs(q0.w_tilde_prime - fd))
    return errs[0] / errs[1]


@pytest.mark.criterion(7, "w' matches central differences with O(h^2) error at n = 40")
@pytest.mark.parametrize("model, label", [("gm1", "r"), ("gm1", "e"), ("jackson", "r1"), ("jackson", "r2")])
def test_derivative_consistency(model, label):
    chain = GM1Chain() if model == "gm1" else jackson_chain()
    ratio = _fd_ratio(chain, label)
    print(f"{model} {label}: error ratio {ratio:.1f}")
    assert 50 <= ratio <= 200


@pytest.mark.criterion(8, "xi normalisation, row sums and drift margins")
def test_model_sanity():
    total = math.fsum(gm1_xi(k, 2.0, 1.5)[0] for k in range(301)) + gm1_tail(301, 2.0, 1.5)
    assert abs(total - 1.0) <= 1e-12
    for chain, ns in ((GM1Chain(), range(15, 81)), (jackson_chain(), range(19, 61))):
        lyap = chain.lyapunov
        labels = [k for k in chain.rewards if k != "e"] + ["e"]
        for n in ns:
            part = chain.partition(n)
            blocks = build_blocks(chain, part)
            assert np.max(np.abs(blocks.row_sums() - 1.0)) <= 1e-12
            assert np.max(np.abs(blocks.derivative_row_sums())) <= 1e-10
            for label in labels:
                rep = verify_drift(chain, part, chain.rewards[label], lyap.v_for(label), 2,
                                   lyap.vt, lyap.nut, raise_on_violation=False)
                assert all(m >= 0.0 for m in rep.min_margin.values()), (n, label, rep.min_margin)
