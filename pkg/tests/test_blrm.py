import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combodose.core import Combo, DoseGrid, TrialState
from combodose.designs.blrm import DEFAULT_PRIORS, BlrmDesign, BlrmParams, blrm_prob
from combodose.stats import RngStream

from conftest import make_state


def reference_prob(a1, a2, b1, b2, eta, da, db):
    # equivalent form: odds = (1 + t1)(1 + t2) - 1, times the interaction
    t1 = a1 * da**b1
    t2 = a2 * db**b2
    odds = ((1 + t1) * (1 + t2) - 1) * math.exp(eta * da * db)
    return odds / (1 + odds)


class TestProb:
    def test_worked_example(self):
        assert blrm_prob(0.5, 0.5, 1.0, 1.0, 0.0, 1.0, 1.0) == pytest.approx(1.25 / 2.25)

    def test_single_agent_limit(self):
        got = blrm_prob(0.4, 1e-300, 1.2, 1.0, 0.0, 0.8, 0.5)
        t = 0.4 * 0.8**1.2
        assert got == pytest.approx(t / (1 + t), rel=1e-9)

    @given(
        la1=st.floats(-3, 2), la2=st.floats(-3, 2),
        lb1=st.floats(-1, 1), lb2=st.floats(-1, 1),
        eta=st.floats(-1, 1), da=st.floats(0.1, 1.0), db=st.floats(0.1, 1.0),
    )
    @settings(max_examples=120, deadline=None)
    def test_dual_implementation(self, la1, la2, lb1, lb2, eta, da, db):
        args = (math.exp(la1), math.exp(la2), math.exp(lb1), math.exp(lb2), eta, da, db)
        assert blrm_prob(*args) == pytest.approx(reference_prob(*args), abs=1e-12)

    @given(
        la1=st.floats(-2, 1), la2=st.floats(-2, 1),
        lb1=st.floats(-1, 1), lb2=st.floats(-1, 1),
        eta=st.floats(0, 1),
        d1=st.floats(0.1, 0.9), d2=st.floats(0.1, 0.9),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_each_dose(self, la1, la2, lb1, lb2, eta, d1, d2):
        a = (math.exp(la1), math.exp(la2), math.exp(lb1), math.exp(lb2), eta)
        base = blrm_prob(*a, d1, d2)
        assert blrm_prob(*a, d1 + 0.05, d2) >= base - 1e-12
        assert blrm_prob(*a, d1, d2 + 0.05) >= base - 1e-12


@pytest.fixture(scope="module")
def design33():
    return BlrmDesign(DoseGrid.regular(3, 3))


class TestPosterior:
    def test_prior_only_matches_direct_sampling(self):
        d = BlrmDesign(
            DoseGrid.regular(3, 3), BlrmParams(burn_in=4000, iterations=120_000)
        )
        state = TrialState.fresh((3, 3))
        means, p_over, p_band, _ = d.posterior(state, 11)
        rng = np.random.default_rng(0)
        mu, sd = d.params.mu_sd()
        draws = rng.normal(mu, sd, size=(200_000, 5))
        scaled = np.array([1 / 3, 2 / 3, 1.0])
        for i, j in [(0, 0), (1, 1), (2, 2)]:
            t1 = np.exp(draws[:, 0] + np.exp(draws[:, 2]) * np.log(scaled[i]))
            t2 = np.exp(draws[:, 1] + np.exp(draws[:, 3]) * np.log(scaled[j]))
            lo = np.log(t1 + t2 + t1 * t2) + draws[:, 4] * scaled[i] * scaled[j]
            pi = 1 / (1 + np.exp(-np.clip(lo, -700, 700)))
            assert p_over[i, j] == pytest.approx(np.mean(pi > 0.33), abs=0.01)
            assert p_band[i, j] == pytest.approx(np.mean((pi > 0.16) & (pi < 0.33)), abs=0.01)

    def test_degenerate_prior_collapses(self):
        priors = {
            "log_alpha1": (math.log(0.25), 1e-6),
            "log_alpha2": (math.log(0.25), 1e-6),
            "log_beta1": (0.0, 1e-6),
            "log_beta2": (0.0, 1e-6),
            "eta": (0.0, 1e-6),
        }
        d = BlrmDesign(DoseGrid.regular(3, 3), BlrmParams(priors=priors, burn_in=500, iterations=2000))
        means, p_over, p_band, _ = d.posterior(TrialState.fresh((3, 3)), 3)
        for i, dai in enumerate((1 / 3, 2 / 3, 1.0)):
            for j, dbj in enumerate((1 / 3, 2 / 3, 1.0)):
                pi = blrm_prob(0.25, 0.25, 1.0, 1.0, 0.0, dai, dbj)
                assert means[i, j] == pytest.approx(pi, abs=1e-3)
                assert p_over[i, j] == (1.0 if pi > 0.33 else 0.0)

    def test_two_parameter_reduction_quadrature(self):
        # slopes and interaction pinned: posterior over (log a1, log a2) only
        priors = {
            "log_alpha1": (math.log(0.3), 0.8),
            "log_alpha2": (math.log(0.3), 0.8),
            "log_beta1": (0.0, 1e-9),
            "log_beta2": (0.0, 1e-9),
            "eta": (0.0, 1e-9),
        }
        d = BlrmDesign(
            DoseGrid.regular(2, 2),
            BlrmParams(priors=priors, burn_in=4000, iterations=120_000),
        )
        state = make_state({(1, 1): (6, 1), (2, 2): (6, 3)}, shape=(2, 2))
        nodes, weights = np.polynomial.hermite_e.hermegauss(80)
        la1 = math.log(0.3) + 0.8 * nodes
        la2 = math.log(0.3) + 0.8 * nodes
        A1, A2 = np.meshgrid(np.exp(la1), np.exp(la2), indexing="ij")
        W = np.outer(weights, weights)
        scaled = (1 / 3, 2 / 3)  # regular 2x2 grid doses over the 300 mg reference
        lik = np.ones_like(A1)
        cells = {}
        for i in range(2):
            for j in range(2):
                t1 = A1 * scaled[i]
                t2 = A2 * scaled[j]
                pi = (t1 + t2 + t1 * t2) / (1 + t1 + t2 + t1 * t2)
                cells[(i, j)] = pi
                n, y = int(state.n[i, j]), int(state.y[i, j])
                if n:
                    lik = lik * pi**y * (1 - pi) ** (n - y)
        post = W * lik
        z = post.sum()
        # indicators are discontinuous, so probabilities get an importance
        # sampling reference instead of Gauss quadrature
        rng = np.random.default_rng(1)
        n_mc = 2_000_000
        s1 = np.exp(rng.normal(math.log(0.3), 0.8, n_mc))
        s2 = np.exp(rng.normal(math.log(0.3), 0.8, n_mc))
        mc_cells = {}
        mc_lik = np.ones(n_mc)
        for i in range(2):
            for j in range(2):
                t1 = s1 * scaled[i]
                t2 = s2 * scaled[j]
                pi = (t1 + t2 + t1 * t2) / (1 + t1 + t2 + t1 * t2)
                mc_cells[(i, j)] = pi
                n, y = int(state.n[i, j]), int(state.y[i, j])
                if n:
                    mc_lik = mc_lik * pi**y * (1 - pi) ** (n - y)
        mc_z = mc_lik.sum()
        means, p_over, p_band, _ = d.posterior(state, 13)
        for (i, j), pi in cells.items():
            mc_pi = mc_cells[(i, j)]
            assert means[i, j] == pytest.approx((pi * post).sum() / z, abs=0.01)
            assert p_over[i, j] == pytest.approx(
                ((mc_pi > 0.33) * mc_lik).sum() / mc_z, abs=0.01
            )
            assert p_band[i, j] == pytest.approx(
                (((mc_pi > 0.16) & (mc_pi < 0.33)) * mc_lik).sum() / mc_z, abs=0.01
            )


class TestDecide:
    def test_injected_posterior_ranking(self):
        p_over = np.zeros((3, 3))
        p_band = np.zeros((3, 3))
        p_band[0, 1] = 0.9  # (1,2) maximises the band probability
        p_band[1, 0] = 0.5
        provider = lambda state, seed: (np.full((3, 3), 0.2), p_over, p_band, 1.0)
        d = BlrmDesign(DoseGrid.regular(3, 3), posterior_provider=provider)
        state = make_state({(1, 1): (3, 0)})
        decision = d.decide(state, RngStream(0).generator())
        assert decision.next == Combo(1, 2)

    def test_all_ewoc_fail_terminates(self):
        provider = lambda state, seed: (
            np.full((3, 3), 0.6),
            np.ones((3, 3)),
            np.zeros((3, 3)),
            1.0,
        )
        d = BlrmDesign(DoseGrid.regular(3, 3), posterior_provider=provider)
        state = make_state({(1, 1): (3, 2)})
        assert d.decide(state, RngStream(0).generator()).is_terminal

    def test_epsilon_one_never_binds(self):
        provider = lambda state, seed: (
            np.full((3, 3), 0.6),
            np.ones((3, 3)),
            np.full((3, 3), 0.1),
            1.0,
        )
        d = BlrmDesign(
            DoseGrid.regular(3, 3),
            BlrmParams(epsilon=1.0),
            posterior_provider=provider,
        )
        state = make_state({(1, 1): (3, 2)})
        assert not d.decide(state, RngStream(0).generator()).is_terminal

    def test_symmetric_drugs_symmetric_selection(self, design33):
        # transpose-symmetric data, symmetric priors and doses: selection
        # frequencies of mirror combos agree within Monte Carlo error
        state = make_state({(1, 1): (3, 0)})
        counts = {}
        for k in range(200):
            decision = design33.decide(state, RngStream(1000 + k).generator())
            counts[decision.next] = counts.get(decision.next, 0) + 1
        for combo, n in counts.items():
            mirror = Combo(combo.j, combo.i)
            assert abs(n - counts.get(mirror, 0)) / 200 <= 0.06


class TestSelect:
    def test_no_combo_with_six_patients(self, design33):
        state = make_state({(1, 1): (3, 0), (1, 2): (3, 1)})
        assert design33.select_mtc(state, RngStream(5).generator()) is None

    def test_single_qualifying_combo(self):
        p_over = np.zeros((3, 3))
        p_band = np.random.default_rng(0).random((3, 3))
        provider = lambda state, seed: (np.full((3, 3), 0.2), p_over, p_band, 1.0)
        d = BlrmDesign(DoseGrid.regular(3, 3), posterior_provider=provider)
        state = make_state({(1, 1): (6, 1), (1, 2): (3, 1)})
        assert d.select_mtc(state, RngStream(0).generator()) == Combo(1, 1)

    def test_double_evaluation_consistency(self, design33):
        state = make_state({(1, 1): (6, 1), (1, 2): (9, 2), (2, 2): (6, 2)})
        a = design33.select_mtc(state, RngStream(7).generator())
        b = design33.select_mtc(state, RngStream(7).generator())
        assert a == b


@pytest.mark.slow
class TestScenario15Safety:
    def test_never_terminates_on_flat_safe_scenario(self):
        from combodose.engine import simulate
        from combodose.scenarios import get_scenario

        config = {"design": "blrm", "epsilon": 1.0}
        oc = simulate(config, get_scenario("15"), n_sim=500, master_seed=4, n_jobs=2)
        assert oc.no_selection * 500 < 500  # selections happen
        assert oc.mean_total_patients == pytest.approx(36.0)
