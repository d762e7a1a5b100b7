import numpy as np
import pytest

from truncgrad.chain_model import build_blocks, one
from truncgrad.cycle_error_bounds import (
    Thm2Terms,
    error_radii,
    m_tilde_and_mu_tilde,
    prop2_radii,
    thm2_terms,
)
from truncgrad.cycle_values import cycle_quantities, factorize
from truncgrad.gradient_interval import certified_run
from truncgrad.models import GM1Chain
from truncgrad.models.synthetic import (
    FiniteChain,
    birth_death_chain,
    exact_cycle,
    exact_lyapunov,
    random_finite_chain,
)


def path_sum(G, rhs, horizon=400):
    """sum_{k <= horizon} G^k rhs by forward iteration."""
    acc = np.array(rhs, dtype=float)
    term = acc.copy()
    for _ in range(horizon):
        term = G @ term
        acc += term
    return acc


@pytest.fixture
def five_state():
    # z = 0, K' = {1}, Atilde = {2, 3}, A^c = {4}
    B = np.array([
        [0.2, 0.5, 0.3, 0.0, 0.0],
        [0.3, 0.1, 0.2, 0.2, 0.2],
        [0.1, 0.3, 0.2, 0.2, 0.2],
        [0.2, 0.1, 0.1, 0.2, 0.4],
        [0.5, 0.1, 0.1, 0.1, 0.2],
    ])
    C = np.array([
        [0.0, 0.3, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.2, 0.0, 0.4],
        [0.1, 0.0, 0.0, 0.0, 0.3],
        [0.0, 0.2, 0.0, 0.0, 0.5],
        [0.0, 0.0, 0.0, 0.0, 0.0],
    ])
    chain = FiniteChain(B, C, 0.5, {"r": [0.0, 1.0, 2.0, 3.0, 4.0]}, K=[0, 1], A={4: range(4)})
    chain.lyapunov = exact_lyapunov(chain, ["r", "e"], slack=1e-9)
    return chain


class TestPathOracle:
    def test_terms_match_horizon_dp(self, five_state):
        chain = five_state
        blocks = build_blocks(chain, chain.partition(4))
        F = factorize(blocks)
        lyap = chain.lyapunov
        f = chain.rewards["r"]
        q = cycle_quantities(blocks, f, "r", F)
        p2 = prop2_radii(blocks, F, blocks.values_on_A(f), lyap.v_for("r"))
        terms = thm2_terms(blocks, F, q, p2, lyap.v_for("r"), lyap.vt, lyap.nut)

        P, dP = chain.Pm, np.abs(chain.dPm)
        kap, out = [1, 2, 3], 4
        G = P[np.ix_(kap, kap)]
        g = {name: fn((out,)) for name, fn in
             [("v", lyap.v_for("r")), ("vt", lyap.vt), ("nut", lyap.nut), ("e", one)]}
        s = {k: P[kap, out] * val for k, val in g.items()}
        ds = {k: dP[kap, out] * val for k, val in g.items()}
        t_v, t_e = path_sum(G, s["v"]), path_sum(G, s["e"])
        W = np.max(q.kappa_values[:1] + p2.mu_kappa[:1])
        C = np.max(np.abs(q.kappa_derivs[:1]))
        dGk = dP[np.ix_(kap, kap)]
        np.testing.assert_allclose(terms.a, path_sum(G, dGk @ t_v + ds["v"]), rtol=1e-12)
        np.testing.assert_allclose(terms.at, W * path_sum(G, dGk @ t_e + ds["e"]), rtol=1e-12)
        np.testing.assert_allclose(terms.b, path_sum(G, s["vt"]), rtol=1e-12)
        np.testing.assert_allclose(terms.bt, W * path_sum(G, s["nut"]), rtol=1e-12)
        np.testing.assert_allclose(terms.c, C * t_e, rtol=1e-12)
        assert terms.tail.evaluate((out,), {"vt": lyap.vt, "nut": lyap.nut}) == pytest.approx(
            g["vt"] + W * g["nut"] + C)

    def test_containment(self, five_state):
        run = certified_run(five_state, 4, ["r", "e"])
        for label in ("r", "e"):
            ex = exact_cycle(five_state, label)
            q = run.quantities[label]
            assert q.w_tilde <= ex.w <= q.w_tilde + q.mu1 + 1e-12
            assert abs(ex.dw - q.w_tilde_prime) <= q.mu1_prime + 1e-12


class TestExitJump:
    @pytest.fixture
    def exit_chain(self):
        # the derivative lives only on the jump 2 -> 3 out of A = {0, 1, 2}
        B = np.zeros((5, 5))
        C = np.zeros((5, 5))
        B[0, 1] = 1.0
        B[1, 2] = B[1, 0] = 0.5
        B[2, 0] = 1.0
        C[2, 3], C[2, 0] = 1.0, -1.0
        B[3, 4], B[3, 0] = 0.9, 0.1
        B[4, 4], B[4, 0] = 0.9, 0.1
        chain = FiniteChain(B, C, 0.3, {"r": [0, 0, 0, 10.0, 10.0]}, K=[0], A={3: [0, 1, 2]})
        chain.lyapunov = exact_lyapunov(chain, ["r", "e"])
        return chain

    def test_exit_jump_term_needed(self, exit_chain):
        true = exact_cycle(exit_chain, "r")
        q = certified_run(exit_chain, 3, ["r", "e"]).quantities["r"]
        q_without = certified_run(exit_chain, 3, ["r", "e"], include_exit_jump=False).quantities["r"]
        err = abs(true.dw - q.w_tilde_prime)
        assert err == pytest.approx(50.0)
        assert err <= q.mu1_prime * (1 + 1e-12)
        assert q_without.mu1_prime < err


class TestRandomContainment:
    @pytest.mark.parametrize("seed", range(40))
    def test_finite_chain(self, seed):
        base = random_finite_chain(seed, size=12)
        K = [0, 1, 2]
        chain = FiniteChain(base.B, base.C, base.theta0, {"r": base.reward_array("r")},
                            K=K, A={n: range(n) for n in range(4, 13)})
        chain.lyapunov = exact_lyapunov(chain, ["r", "e"], slack=1e-9)
        exact = {lab: exact_cycle(chain, lab) for lab in ("r", "e")}
        for n in (5, 8, 11):
            try:
                run = certified_run(chain, n, ["r", "e"])
            except RuntimeError:
                continue
            for lab, ex in exact.items():
                q, rad = run.quantities[lab], run.radii[lab]
                tol = 1e-10 * (1 + abs(ex.w) + abs(ex.dw))
                assert q.w_tilde - tol <= ex.w <= q.w_tilde + q.mu1 + tol
                assert abs(ex.dw - q.w_tilde_prime) <= q.mu1_prime + tol
                # derivative errors on K' stay inside mu_tilde
                nk = 2
                dw_exact_kprime = ex.dw_lambda[:nk]
                assert np.all(np.abs(dw_exact_kprime - q.kappa_derivs[:nk]) <= rad.mu_tilde_kappa[:nk] + tol)
                assert rad.m_tilde >= 0 and np.all(rad.mu_tilde_kappa >= 0)


class TestDegenerate:
    def test_tail_free_radii_vanish(self):
        chain = birth_death_chain()
        chain.lyapunov = exact_lyapunov(chain, ["r", "e"])
        run = certified_run(chain, 0, ["r", "e"])
        for rad in run.radii.values():
            assert rad.mu1 == 0.0 and rad.mu1_prime == 0.0 and rad.m_tilde == 0.0
            for arr in (rad.terms.a, rad.terms.at, rad.terms.b, rad.terms.bt, rad.terms.c):
                np.testing.assert_array_equal(arr, 0.0)

    def test_zero_terms(self):
        z = np.zeros(3)
        terms = Thm2Terms(z, z, z, z, z)
        chain = GM1Chain()
        blocks = build_blocks(chain, chain.partition(20))
        p2 = prop2_radii(blocks, factorize(blocks), blocks.values_on_A(one), chain.lyapunov.v_for("e"))
        p2.solve_e = np.zeros(3)
        m_t, mu_k, _ = m_tilde_and_mu_tilde(terms, p2, 2)
        assert m_t == 0.0 and np.all(mu_k == 0.0)

    def test_homogeneity(self):
        chain = GM1Chain()
        blocks = build_blocks(chain, chain.partition(25))
        F = factorize(blocks)
        lyap = chain.lyapunov
        f = chain.rewards["r"]
        q = cycle_quantities(blocks, f, "r", F)
        p2 = prop2_radii(blocks, F, blocks.values_on_A(f), lyap.v_for("r"))
        terms = thm2_terms(blocks, F, q, p2, lyap.v_for("r"), lyap.vt, lyap.nut)
        nk = blocks.partition.n_kprime
        base = m_tilde_and_mu_tilde(terms, p2, nk)[0]
        for lam in (0.5, 3.0):
            assert m_tilde_and_mu_tilde(terms.scaled(lam), p2, nk)[0] == pytest.approx(lam * base, rel=1e-14)


class TestGM1Radii:
    def test_decreasing_in_n(self):
        chain = GM1Chain()
        mu1, mup = {}, {}
        for n in range(15, 61):
            run = certified_run(chain, n, ["r", "e"])
            mu1[n] = {k: q.mu1 for k, q in run.quantities.items()}
            mup[n] = {k: q.mu1_prime for k, q in run.quantities.items()}
            assert all(v >= 0 for v in mu1[n].values())
        for lab in ("r", "e"):
            a = np.array([mu1[n][lab] for n in sorted(mu1)])
            b = np.array([mup[n][lab] for n in sorted(mup)])
            assert np.all(np.diff(a) <= 1e-10)
            assert np.all(np.diff(b) <= 1e-10)
        assert mu1[30]["r"] > mu1[50]["r"] > mu1[70 - 10]["r"] > 0
        assert 0 < mup[50]["r"] < mup[30]["r"]

    def test_error_radii_fills_quantities(self):
        chain = GM1Chain()
        blocks = build_blocks(chain, chain.partition(30))
        F = factorize(blocks)
        f = chain.rewards["r"]
        q = cycle_quantities(blocks, f, "r", F)
        lyap = chain.lyapunov
        rad = error_radii(blocks, F, q, blocks.values_on_A(f), lyap.v_for("r"), lyap.vt, lyap.nut)
        assert q.mu1 == rad.mu1 > 0 and q.mu1_prime == rad.mu1_prime > 0
        assert rad.prop2.mu2(9).shape == (9,)
        assert rad.prop2.mu3(9).shape == (21,)
