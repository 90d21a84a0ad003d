"""
Unit tests for the per-subpatch Euler solver: right-hand side, boundary
conditions, time-step bound, filtering and smearing.
"""
import numpy as np
import pytest

from app.core.exceptions import ConfigurationError, InvalidStateError
from app.services.decomposition import DomainDecomposition
from app.services.euler import BoundaryData, SubpatchSolver
from app.services.gas import conservative, pressure, primitives
from app.services.operator_cache import InMemoryOperatorCache
from app.services.patches import PatchKind, build_i_patch
from app.services.problems import UniformFlow, get_problem

N_F = 3
H_MIN = 0.25 / 28


@pytest.fixture
def solvers(sod_dec, small_settings):
    cache = InMemoryOperatorCache(small_settings)
    return {sp.gid: SubpatchSolver(sp, cache, N_F) for sp in sod_dec.subpatches}


def _smooth_state(sp) -> np.ndarray:
    x, y = sp.physical
    rho = 1.0 + 0.2 * np.sin(2 * np.pi * x) * np.cos(8 * np.pi * y)
    u = 0.3 + 0.1 * np.cos(2 * np.pi * x)
    v = 0.2 * np.sin(8 * np.pi * y)
    p = 1.0 + 0.1 * np.cos(2 * np.pi * x)
    return np.ascontiguousarray(conservative(rho, u, v, p))


def _box_solver(small_settings, sides, bc=BoundaryData()) -> SubpatchSolver:
    patch = build_i_patch(0.0, 1.0, 0.0, 1.0, sides=sides)
    dec = DomainDecomposition([patch], nv=4, n0=21, n1=13)
    return SubpatchSolver(dec.subpatches[0], InMemoryOperatorCache(small_settings), N_F, bc)


class TestRightHandSide:
    """Test suite for SubpatchSolver.rhs."""

    def test_uniform_flow_is_steady(self, solvers, sod_dec):
        sp = sod_dec.subpatches[1]
        state = UniformFlow(0.5)(*sp.physical)
        assert np.max(np.abs(solvers[1].rhs(state))) <= 1e-8

    def test_uniform_flow_with_viscosity(self, solvers, sod_dec):
        sp = sod_dec.subpatches[2]
        state = UniformFlow(0.5)(*sp.physical)
        mu = np.full(sp.shape, 0.01)
        assert np.max(np.abs(solvers[2].rhs(state, mu))) <= 1e-6

    def test_mass_flux_divergence(self, solvers, sod_dec):
        """For rho = 1 + x moving at u = 1 the density rate is -1."""
        sp = sod_dec.subpatches[1]
        x, _ = sp.physical
        state = conservative(1.0 + x, 1.0, 0.0, 1.0)
        rate = solvers[1].rhs(state)
        assert np.allclose(rate[0], -1.0, atol=1e-4)

    def test_invalid_state(self, solvers, sod_dec):
        sp = sod_dec.subpatches[0]
        state = UniformFlow(0.5)(*sp.physical)
        state[0, 10, 10] = -1.0
        with pytest.raises(InvalidStateError) as info:
            solvers[0].rhs(state, t=0.3)
        assert info.value.context["subpatch"] == 0
        assert info.value.context["t"] == 0.3

    def test_gradient_of_linear_field(self, solvers, sod_dec):
        sp = sod_dec.subpatches[1]
        x, y = sp.physical
        gx, gy = solvers[1].gradient(2.0 * x - 3.0 * y)
        assert np.allclose(gx, 2.0, atol=1e-4)
        assert np.allclose(gy, -3.0, atol=1e-4)

    @pytest.mark.parametrize("problem, hbar", [("flow-cylinder", 0.048), ("wedge-m3.5", 0.003)])
    def test_free_stream_on_mapped_patches(self, small_settings, problem, hbar):
        """A uniform flow stays steady on curved and corner patches."""
        dec = get_problem(problem).decomposition(small_settings, hbar=hbar)
        cache = InMemoryOperatorCache(small_settings)
        mapped = [sp for sp in dec.subpatches if sp.patch.kind != PatchKind.I]
        assert mapped
        for sp in mapped:
            state = UniformFlow(0.5)(*sp.physical)
            rate = SubpatchSolver(sp, cache, N_F).rhs(state)
            assert np.max(np.abs(rate)) <= 1e-7, sp.gid


class TestBoundaryConditions:
    """Test suite for SubpatchSolver.enforce_bc."""

    def test_slip_wall_removes_normal_momentum(self, solvers, sod_dec):
        """The x = 0 wall zeroes rho u and keeps the pressure."""
        sp = sod_dec.subpatches[0]
        state = _smooth_state(sp)
        p_before = pressure(state)[0].copy()
        solvers[0].enforce_bc(state)
        assert np.all(state[1, 0, :] == 0.0)
        assert np.allclose(pressure(state)[0, 1:-1], p_before[1:-1])

    def test_zero_normal_derivative(self, solvers, sod_dec):
        """Top and bottom points copy their inward neighbors."""
        sp = sod_dec.subpatches[1]
        state = _smooth_state(sp)
        solvers[1].enforce_bc(state)
        assert np.array_equal(state[:, :, 0], state[:, :, 1])
        assert np.array_equal(state[:, :, -1], state[:, :, -2])

    def test_enforce_is_in_place(self, solvers, sod_dec):
        state = _smooth_state(sod_dec.subpatches[0])
        assert solvers[0].enforce_bc(state) is state

    def test_inflow_needs_a_state(self, small_settings):
        with pytest.raises(ConfigurationError):
            _box_solver(small_settings, {"q1_min": "inflow_dirichlet"})

    def test_inflow_and_outflow(self, small_settings):
        sides = {"q1_min": "inflow_dirichlet", "q1_max": "outflow_pressure"}
        bc = BoundaryData(inflow=(1.4, 2.0, 0.0, 1.0), outflow_pressure=0.7)
        solver = _box_solver(small_settings, {**sides, "q2_min": "slip_wall", "q2_max": "slip_wall"}, bc)
        state = _smooth_state(solver.sp)
        solver.enforce_bc(state)
        rho, u, v, p = primitives(state)
        assert np.allclose(rho[0, 1:-1], 1.4) and np.allclose(u[0, 1:-1], 2.0)
        assert np.allclose(p[-1, 1:-1], 0.7)

    def test_noslip_adiabatic(self, small_settings):
        sides = {"q1_min": "noslip_adiabatic", "q1_max": "supersonic_outflow_none"}
        solver = _box_solver(small_settings, {**sides, "q2_min": "slip_wall", "q2_max": "slip_wall"})
        state = _smooth_state(solver.sp)
        before = state.copy()
        solver.enforce_bc(state)
        assert np.all(state[1:3, 0, 1:-1] == 0.0)
        theta_wall = pressure(state)[0, 1:-1] / state[0, 0, 1:-1]
        theta_in = pressure(state)[1, 1:-1] / state[0, 1, 1:-1]
        assert np.allclose(theta_wall, theta_in)
        assert np.array_equal(state[:, -1, 1:-1], before[:, -1, 1:-1])


class TestTimeStepBound:
    """Test suite for dt_bound."""

    def test_gas_at_rest(self, solvers, sod_dec):
        """Unit sound speed: the bound is the smallest spacing."""
        sp = sod_dec.subpatches[0]
        state = conservative(np.full(sp.shape, 1.4), 0.0, 0.0, 1.0)
        assert solvers[0].dt_bound(state) == pytest.approx(H_MIN)

    def test_viscosity_tightens_the_bound(self, solvers, sod_dec):
        sp = sod_dec.subpatches[0]
        state = conservative(np.full(sp.shape, 1.4), 0.0, 0.0, 1.0)
        mu = np.full(sp.shape, 0.01)
        expected = 1.0 / (1.0 / H_MIN + 0.01 / H_MIN**2)
        assert solvers[0].dt_bound(state, mu) == pytest.approx(expected)

    def test_fastest_subpatch_sets_the_step(self, solvers, sod_dec):
        """The flow speed grows with the gid, so the last subpatch has the smallest bound."""
        states = {sp.gid: UniformFlow(float(sp.gid))(*sp.physical) for sp in sod_dec.subpatches}
        bounds = [solvers[gid].dt_bound(states[gid]) for gid in sorted(states)]
        assert min(bounds) == pytest.approx(H_MIN / 4.0)
        assert min(bounds) == bounds[-1]


class TestFiltering:
    """Test suite for the per-step filter and the initial smearing."""

    def test_filter_keeps_constants(self, solvers, sod_dec):
        state = UniformFlow(1.0)(*sod_dec.subpatches[1].physical)
        assert np.allclose(solvers[1].filter(state), state, atol=1e-10)

    def test_filter_returns_new_array(self, solvers, sod_dec):
        state = _smooth_state(sod_dec.subpatches[1])
        before = state.copy()
        out = solvers[1].filter(state)
        assert out is not state
        assert np.array_equal(state, before)

    def test_smear_with_empty_mask(self, solvers, sod_dec):
        sp = sod_dec.subpatches[1]
        state = _smooth_state(sp)
        out = solvers[1].smear(state, np.zeros(sp.shape))
        assert np.array_equal(out, state) and out is not state


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
