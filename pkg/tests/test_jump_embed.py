import numpy as np
import pytest

from truncgrad.chain_model import LyapunovSet, build_blocks, one
from truncgrad.errors import ModelError
from truncgrad.jump_embed import EmbeddedChain, RateModel, ctmc_alpha_prime_interval, embed
from truncgrad.models import JacksonParams, JacksonRates, jackson_analytic
from truncgrad.state_codec import Partition


class FiniteBirthDeath(RateModel):
    """``x -> x+1`` at rate ``theta``, ``x -> x-1`` at rate 1, on ``{0..N}``."""

    def __init__(self, theta0=0.7, N=4, up_depends=True):
        self.theta0 = theta0
        self.N = N
        self.up_depends = up_depends
        self.holding_rates_theta_free = not up_depends
        zero = lambda x: 0.0
        self.lyapunov = LyapunovSet({}, zero, zero, v_default=zero, analytic_certificate=True)

    def rates(self, x):
        (i,) = x
        out = []
        if i < self.N:
            out.append(((i + 1,), self.theta0, 1.0 if self.up_depends else 0.0))
        if i > 0:
            out.append(((i - 1,), 1.0, 0.0))
        return out

    def reward(self, x):
        return float(x[0])

    def partition(self, n):
        states = frozenset((i,) for i in range(self.N + 1))
        return Partition((0,), states, states)

    def at_theta(self, theta):
        return FiniteBirthDeath(theta, self.N, self.up_depends)


def mm1n_alpha(rho, N):
    p = rho ** np.arange(N + 1)
    return float(np.arange(N + 1) @ p / p.sum())


class TwoState(RateModel):
    theta0 = 0.0

    def __init__(self, self_loop=False, dead=False):
        self.self_loop = self_loop
        self.dead = dead
        self.lyapunov = LyapunovSet({}, one, one, v_default=one)

    def rates(self, x):
        if self.dead and x == (1,):
            return []
        out = [((1 - x[0],), 2.0 if x == (0,) else 3.0, 0.0)]
        if self.self_loop:
            out.append((x, 1.0, 0.0))
        return out

    def reward(self, x):
        return 1.0

    def partition(self, n):
        return Partition((0,), {0, 1}, {0, 1})


class TestEmbed:
    def test_two_state(self):
        chain = embed(TwoState())
        blocks = build_blocks(chain, chain.partition(0))
        np.testing.assert_allclose(blocks.P.toarray(), [[0, 1], [1, 0]])
        np.testing.assert_array_equal(blocks.dP.toarray(), 0.0)
        assert chain.r2((0,)) == pytest.approx(0.5)
        assert chain.r2((1,)) == pytest.approx(1 / 3)

    def test_self_loop(self):
        with pytest.raises(ModelError, match="self-transition"):
            embed(TwoState(self_loop=True)).transitions((0,))

    def test_absorbing(self):
        with pytest.raises(ModelError, match="absorbing"):
            embed(TwoState(dead=True)).transitions((1,))

    def test_jackson_holding_rate(self):
        chain = embed(JacksonRates())
        lam, dlam = chain.holding_rate((1, 1))
        assert lam == pytest.approx(2 / 3 + 1 + 2.4 + 2.625)
        assert lam == pytest.approx(6.69167, abs=1e-5)
        assert dlam == 0.0
        assert "dr1+" not in chain.rewards

    def test_jackson_transfer(self):
        chain = embed(JacksonRates())
        lam, _ = chain.holding_rate((1, 1))
        row = {y: (p, dp) for y, p, dp in chain.transitions((1, 1))}
        p, dp = row[(0, 2)]
        assert p == pytest.approx(3.0 * 0.4 / lam)
        assert dp == pytest.approx(3.0 / lam)
        assert (1, 1) not in row

    def test_embedded_rows(self):
        chain = embed(JacksonRates())
        blocks = build_blocks(chain, chain.partition(20))
        np.testing.assert_allclose(blocks.row_sums(), 1.0, atol=1e-12, rtol=0)
        np.testing.assert_allclose(blocks.derivative_row_sums(), 0.0, atol=1e-10, rtol=0)
        assert np.all(blocks.P.diagonal() == 0.0)


class TestCTMCEnclosure:
    def test_theta_free_zero_derivative(self):
        model = FiniteBirthDeath(up_depends=False)
        enc = ctmc_alpha_prime_interval(model, 0)
        assert enc.dalpha_lo <= 0.0 <= enc.dalpha_hi
        assert enc.dalpha_hi - enc.dalpha_lo < 1e-12
        assert enc.alpha.contains(mm1n_alpha(0.7, 4), tol=1e-12)

    def test_signed_reward_parts(self):
        # theta moves the holding rates, so w(r1') and w(r2') enter
        model = FiniteBirthDeath()
        chain = EmbeddedChain(model)
        assert {"dr1+", "dr1-", "dr2+", "dr2-"} <= set(chain.rewards)
        enc = ctmc_alpha_prime_interval(chain, 0)
        h = 1e-5
        fd = (mm1n_alpha(0.7 + h, 4) - mm1n_alpha(0.7 - h, 4)) / (2 * h)
        assert enc.alpha.contains(mm1n_alpha(0.7, 4), tol=1e-12)
        assert enc.dalpha_lo - 1e-8 <= fd <= enc.dalpha_hi + 1e-8
        assert enc.dalpha_hi - enc.dalpha_lo < 1e-12

    def test_jackson(self):
        ref = jackson_analytic()
        enc = ctmc_alpha_prime_interval(JacksonRates(), 40)
        assert enc.alpha.contains(ref.alpha)
        assert enc.dalpha.contains(ref.alpha_prime)
        assert enc.validity["drift_certified"]

    def test_jackson_params_reject_bad_routing(self):
        with pytest.raises(ModelError, match="routing"):
            JacksonParams(theta0=0.85)
