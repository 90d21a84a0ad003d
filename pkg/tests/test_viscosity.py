"""
Unit tests for the artificial viscosity pipeline: proxy, preliminary values,
smoothing, blending and the initial smearing mask.
"""
import numpy as np
import pytest

from app.core.exceptions import InvalidStateError
from app.services.classifier import FallbackClassifier
from app.services.comm_plan import build_blend_plan
from app.services.diagnostics import covered_area
from app.services.gas import conservative
from app.services.problems import (
    SOD_LEFT,
    SOD_RIGHT,
    PlanarDiscontinuity,
    UniformFlow,
    get_problem,
    make_shock_ic,
)
from app.services.subpatches import window
from app.services.viscosity import (
    blend,
    cosine_kernel,
    discontinuity_mask,
    evaluate_proxy,
    mwsb,
    preliminary_viscosity,
    smooth_viscosity,
    subpatch_viscosity,
)

N_F = 3


class TestProxy:
    """Test suite for the Mach proxy and the wave-speed bound."""

    def test_uniform_flow(self):
        """Mach 3 flow with unit sound speed has proxy 3 and speed bound 4."""
        x = np.linspace(0.0, 1.0, 5)
        state = UniformFlow(3.0)(x, x)
        assert np.allclose(evaluate_proxy(state), 3.0)
        assert np.allclose(mwsb(state), 4.0)

    def test_invalid_state(self):
        state = conservative(np.array([1.0, -1.0]), 0.0, 0.0, 1.0)
        with pytest.raises(InvalidStateError) as info:
            evaluate_proxy(state, subpatch=7)
        assert info.value.context["subpatch"] == 7

    def test_mask_skips_points(self):
        """Points outside ``where`` are not checked."""
        state = conservative(np.array([1.0, -1.0]), 0.0, 0.0, 1.0)
        evaluate_proxy(state, where=np.array([True, False]))


class TestPreliminaryViscosity:
    """Test suite for c(tau) h S and its smoothing."""

    def test_class_weights(self):
        tau = np.array([1, 2, 3, 4])
        mu = preliminary_viscosity(tau, np.full(4, 2.0), 0.1)
        assert np.allclose(mu, [0.3, 0.2, 0.05, 0.0])

    def test_fringe_is_zero(self):
        tau = np.ones(3, dtype=int)
        mu = preliminary_viscosity(tau, np.ones(3), 1.0, fringe=np.array([True, False, False]))
        assert mu[0] == 0.0 and mu[1] == 1.5

    def test_cosine_kernel(self):
        k = cosine_kernel(3)
        assert k.shape == (7,)
        assert k[3] == pytest.approx(1.0)
        assert np.allclose(k, k[::-1])
        assert np.all(k > 0.0)

    def test_smoothing_preserves_constants(self, sod_dec):
        """Normalized smoothing leaves a constant unchanged away from the fringe."""
        sp = sod_dec.subpatches[1]
        out = smooth_viscosity(np.full(sp.shape, 0.7), sp, 4)
        assert np.allclose(out[sp.active], 0.7)

    def test_smoothing_zeroes_fringe(self, sod_dec):
        sp = sod_dec.subpatches[1]
        fringe = sp.fringe_mask(N_F)
        out = smooth_viscosity(np.full(sp.shape, 0.7), sp, 4, fringe)
        assert np.all(out[fringe] == 0.0)


class TestSubpatchViscosity:
    """Test suite for the per-subpatch viscosity of real states."""

    def test_uniform_flow_has_no_viscosity(self, sod_dec):
        classifier = FallbackClassifier(window=16)
        sp = sod_dec.subpatches[0]
        state = UniformFlow(2.0)(*sp.physical)
        mu_hat, tau = subpatch_viscosity(classifier, state, sp, sp.fringe_mask(N_F))
        assert np.all(mu_hat == 0.0)
        assert np.all(tau == 4)

    def test_shock_gets_viscosity_near_the_jump_only(self, sod_dec):
        """A moving shock at x = 0.5 is marked discontinuous; far regions stay inviscid."""
        classifier = FallbackClassifier(window=16)
        ic = make_shock_ic(3.0, 0.5)
        peak = 0.0
        for sp in sod_dec.subpatches:
            state = ic(*sp.physical)
            mu_hat, tau = subpatch_viscosity(classifier, state, sp, sp.fringe_mask(N_F))
            x, _ = sp.physical
            far = sp.active & (np.abs(x - 0.5) > 0.2)
            assert np.all(mu_hat[far] == 0.0)
            assert np.all(mu_hat >= 0.0)
            peak = max(peak, float(mu_hat.max()))
            assert np.all(tau[far] == 4)
        assert peak > 0.0


class TestBlend:
    """Test suite for window-weighted blending."""

    def test_constant_is_reproduced(self, sod_dec):
        plan = build_blend_plan(sod_dec)
        windows = {sp.gid: window(sp, N_F) for sp in sod_dec.subpatches}
        prelim = {sp.gid: np.full(sp.shape, 0.3) for sp in sod_dec.subpatches}
        mu, normalized = blend(plan, windows, prelim)
        for sp in sod_dec.subpatches:
            assert np.allclose(mu[sp.gid][sp.active], 0.3)

    def test_normalized_windows_partition_unity(self, sod_dec):
        """Normalized windows integrate to the channel area."""
        plan = build_blend_plan(sod_dec)
        windows = {sp.gid: window(sp, N_F) for sp in sod_dec.subpatches}
        zeros = {sp.gid: np.zeros(sp.shape) for sp in sod_dec.subpatches}
        _, normalized = blend(plan, windows, zeros)
        assert covered_area(sod_dec.subpatches, normalized) == pytest.approx(0.25, rel=1e-12)

    def test_subset_of_receivers(self, sod_dec):
        plan = build_blend_plan(sod_dec)
        windows = {sp.gid: window(sp, N_F) for sp in sod_dec.subpatches}
        prelim = {sp.gid: np.ones(sp.shape) for sp in sod_dec.subpatches}
        mu, normalized = blend(plan, windows, prelim, receivers=[2])
        assert list(mu) == [2] and list(normalized) == [2]

    @pytest.mark.parametrize("problem, hbar", [("sod", None), ("flow-cylinder", 0.048)])
    def test_ones_blend_to_one(self, default_settings, problem, hbar):
        """Normalized windows sum to one at every active point, interpolated overlaps included."""
        dec = get_problem(problem).decomposition(default_settings, hbar=hbar)
        plan = build_blend_plan(dec)
        windows = {sp.gid: window(sp, default_settings.geom_nf) for sp in dec.subpatches}
        ones = {sp.gid: np.ones(sp.shape) for sp in dec.subpatches}
        mu, _ = blend(plan, windows, ones)
        for sp in dec.subpatches:
            assert np.max(np.abs(mu[sp.gid][sp.active] - 1.0)) <= 1e-10


class TestDiscontinuityMask:
    """Test suite for the initial smearing mask."""

    def test_smooth_data_is_not_smeared(self, sod_dec):
        classifier = FallbackClassifier(window=16)
        sp = sod_dec.subpatches[0]
        mask = discontinuity_mask(classifier, UniformFlow(0.5)(*sp.physical), sp)
        assert np.all(mask == 0.0)

    def test_sod_jump_is_marked(self, sod_dec):
        classifier = FallbackClassifier(window=16)
        ic = PlanarDiscontinuity(SOD_LEFT, SOD_RIGHT, 0.5)
        marked = False
        for sp in sod_dec.subpatches:
            mask = discontinuity_mask(classifier, ic(*sp.physical), sp)
            x, _ = sp.physical
            assert np.all((mask >= 0.0) & (mask <= 1.0))
            assert np.all(mask[np.abs(x - 0.5) > 0.25] == 0.0)
            marked |= bool(np.any(mask > 0.0))
        assert marked


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
