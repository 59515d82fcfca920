"""WAIC, RMSE, and abundance integration."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from prefsim.fields import GridSpec
from prefsim.inference import fit, posterior_functional_draws
from prefsim.metrics import (
    ScenarioResult,
    abundance,
    mark_loglik_matrix,
    rmse,
    waic,
)
from prefsim.models import ModelKind
from prefsim.sampling import make_dataset
from prefsim.scenarios import ScenarioSpec

# waic([[0, 1], [1, 2], [2, 0]]): both columns hold the draw set {0, 1, 2},
# so lppd = 2 log((1 + e + e^2)/3) and p_eff = 2 var({0,1,2}) = 2; the
# expected value below is that expression evaluated at 50-digit precision.
WAIC_ORACLE = -1.2359747031050825

# integral of exp(x + y) over the unit square, (e - 1)^2
EXP_INTEGRAL = 2.9524924420125598


class TestWaic:
    def test_hand_oracle(self):
        got = waic(np.array([[0.0, 1.0], [1.0, 2.0], [2.0, 0.0]]))
        assert got.waic == pytest.approx(WAIC_ORACLE, rel=1e-12)
        assert got.p_eff == pytest.approx(2.0, rel=1e-12)

    def test_identical_draws_have_zero_p_eff(self):
        row = np.array([-1.3, 0.2, -0.7])
        got = waic(np.tile(row, (5, 1)))
        assert got.p_eff == pytest.approx(0.0, abs=1e-12)
        assert got.waic == pytest.approx(-2.0 * row.sum(), rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        L=arrays(
            float,
            (4, 3),
            elements=st.floats(-20, 2, allow_nan=False, allow_infinity=False),
        ),
        c=st.floats(-5, 5, allow_nan=False, allow_infinity=False),
    )
    def test_translation_shifts_waic_linearly(self, L, c):
        base = waic(L)
        shifted = waic(L + c)
        n_obs = L.shape[1]
        assert shifted.p_eff == pytest.approx(base.p_eff, abs=1e-8)
        assert shifted.waic == pytest.approx(base.waic - 2.0 * n_obs * c, abs=1e-7)

    def test_needs_two_draws(self):
        with pytest.raises(ValueError):
            waic(np.array([[0.0, 1.0]]))

    def test_rejects_non_matrix(self):
        with pytest.raises(ValueError):
            waic(np.zeros(4))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            waic(np.array([[0.0, np.inf], [1.0, 2.0]]))


@pytest.fixture(scope="module")
def fitted():
    grid = GridSpec(6, 6)
    sc = ScenarioSpec(
        spatial_range=0.35, prop_random=0.5, n_total=25, replicate=0, grid=grid
    )
    d = make_dataset(sc, 21)
    from prefsim.inference import InferenceConfig

    result = fit(ModelKind.GEO, d, grid, InferenceConfig(n_starts=1, outer_maxfev=60))
    return result, d, grid


class TestMarkLoglik:

    def test_shape_and_finiteness(self, fitted):
        result, d, grid = fitted
        draws = posterior_functional_draws(result, grid, 30, seed=2)
        L = mark_loglik_matrix(result, d, grid, draws)
        assert L.shape == (30, d.n_train)
        assert np.all(np.isfinite(L))

    def test_zero_field_draw_hand_value(self, fitted):
        result, d, grid = fitted
        draws = np.zeros((2, grid.n_nodes))
        L = mark_loglik_matrix(result, d, grid, draws)
        h = result.hyper_hat
        z = (d.train_y - h.eta) / h.tau
        expected = -0.5 * z**2 - math.log(h.tau) - 0.5 * math.log(2 * math.pi)
        np.testing.assert_allclose(L[0], expected, rtol=1e-12)
        np.testing.assert_allclose(L[1], expected, rtol=1e-12)

    def test_rejects_wrong_width(self, fitted):
        result, d, grid = fitted
        with pytest.raises(ValueError):
            mark_loglik_matrix(result, d, grid, np.zeros((3, grid.n_nodes + 1)))


class TestRmse:
    def test_hand_values(self):
        assert rmse(np.array([0.0, 1.0]), np.array([1.0, 0.0])) == 1.0
        assert rmse(np.array([0.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(
            math.sqrt(0.5), rel=1e-15
        )
        assert rmse(np.array([3.0]), np.array([3.0])) == 0.0

    def test_symmetry(self):
        a = np.array([0.3, -1.2, 4.0])
        b = np.array([1.1, 0.0, 2.5])
        assert rmse(a, b) == rmse(b, a)

    def test_rejects_mismatched(self):
        with pytest.raises(ValueError):
            rmse(np.zeros(3), np.zeros(4))
        with pytest.raises(ValueError):
            rmse(np.zeros(0), np.zeros(0))


class TestAbundance:
    def test_flat_zero_surface_gives_area(self):
        g = GridSpec(9, 9)
        assert abundance(np.zeros(g.n_nodes), 0.0, g) == pytest.approx(1.0, rel=1e-14)

    def test_eta_scales_exponentially(self):
        g = GridSpec(5, 5)
        u = np.linspace(-0.5, 0.5, g.n_nodes)
        a0 = abundance(u, 0.0, g)
        a2 = abundance(u, 2.0, g)
        assert a2 == pytest.approx(math.exp(2.0) * a0, rel=1e-12)

    def test_separable_exponential_integral(self):
        g = GridSpec(32, 32)
        u = g.node_coords().sum(axis=1)
        got = abundance(u, 0.0, g)
        assert got == pytest.approx(EXP_INTEGRAL, rel=5e-3)

    def test_refinement_approaches_integral_from_below(self):
        # exp of the corner average underestimates the cell average of exp
        # (Jensen), so the quadrature increases toward the integral
        vals = []
        for k in (8, 16, 32):
            g = GridSpec(k, k)
            vals.append(abundance(g.node_coords().sum(axis=1), 0.0, g))
        assert vals[0] < vals[1] < vals[2] < EXP_INTEGRAL

    def test_draw_matrix_averages_per_draw_values(self):
        g = GridSpec(6, 6)
        rng = np.random.default_rng(3)
        draws = rng.normal(size=(4, g.n_nodes))
        per = [abundance(draws[i], 0.3, g) for i in range(4)]
        assert abundance(draws, 0.3, g) == pytest.approx(np.mean(per), rel=1e-12)

    def test_rejects_wrong_length(self):
        g = GridSpec(4, 4)
        with pytest.raises(ValueError):
            abundance(np.zeros(g.n_nodes - 1), 0.0, g)


class TestScenarioResult:
    def _row(self, **over):
        base = dict(
            scenario_id="r0.2_p0.10_n60_rep3",
            model="mix",
            spatial_range=0.2,
            prop_random=0.1,
            n_total=60,
            replicate=3,
            waic=12.5,
            p_eff=4.2,
            rmse=0.8,
            abundance_ratio=1.1,
            log_evidence=-50.0,
            converged=True,
        )
        base.update(over)
        return ScenarioResult(**base)

    def test_dict_round_trip(self):
        row = self._row()
        assert ScenarioResult.from_dict(row.to_dict()) == row

    def test_rejects_negative_rmse(self):
        with pytest.raises(ValueError):
            self._row(rmse=-0.1)

    def test_rejects_nonpositive_ratio(self):
        with pytest.raises(ValueError):
            self._row(abundance_ratio=0.0)
