"""
Unit tests for patches, subpatches, refinement, overlap checks and mesh files.
"""
import itertools

import numpy as np
import pytest

from app.core.exceptions import ConfigurationError, GeometryError, UsageError
from app.services.curves import AffineMapping, CircularArc, LineSegment
from app.services.decomposition import (
    DomainDecomposition,
    check_coverage,
    check_min_overlap,
    refine,
)
from app.services.mesh_io import load_mesh, mesh_from_dict, mesh_to_dict, save_mesh
from app.services.patches import (
    Patch,
    PatchKind,
    build_c1_patch,
    build_c2_patch,
    build_i_patch,
    build_s_patch,
)
from app.services.subpatches import (
    PHYSICAL,
    fringe_region,
    preliminary_squares_L,
    subdivide_L,
    subdivide_Q,
    window,
    window_profile,
)

WALLS = {"q1_min": "slip_wall", "q1_max": "slip_wall", "q2_min": "slip_wall", "q2_max": "slip_wall"}


def _right_angle_c1(**kwargs):
    """Concave corner at the origin; the obstacle is the lower-left quadrant."""
    return build_c1_patch(
        LineSegment((-0.5, 0.0), (0.5, 0.0)),
        LineSegment((0.0, -0.5), (0.0, 0.5)),
        (0.0, 0.0),
        **kwargs,
    )


class TestCornerPatches:
    """Test suite for build_c1_patch and build_c2_patch."""

    def test_c1_corner_image(self):
        patch = _right_angle_c1()
        x, y = patch.mapping.map(np.array(0.5), np.array(0.5))
        assert float(x) == pytest.approx(0.0, abs=1e-15)
        assert float(y) == pytest.approx(0.0, abs=1e-15)

    def test_c1_is_affine_on_each_arm(self):
        """Straight perpendicular arcs give a shifted identity map."""
        patch = _right_angle_c1()
        q = np.random.default_rng(0).uniform(0.5, 1.0, size=(2, 50))
        x, y = patch.mapping.map(q[0], q[1])
        assert np.allclose(x, q[0] - 0.5) and np.allclose(y, q[1] - 0.5)

    def test_c1_area_is_three_quarters(self):
        """Quadrature of |det J| over the L set of a unit-speed corner."""
        patch = _right_angle_c1()
        [corner_sp] = subdivide_L(patch, 2, 43, 9)
        assert corner_sp.is_l_shaped
        assert corner_sp.quadrature_weights.sum() == pytest.approx(0.75, abs=1e-3)

    def test_c1_arcs_default_to_walls(self):
        patch = _right_angle_c1()
        assert patch.sides["arc_a"] == "noslip_adiabatic"
        assert patch.sides["arc_b"] == "noslip_adiabatic"

    def test_c1_parallel_tangents_rejected(self):
        with pytest.raises(GeometryError):
            build_c1_patch(
                LineSegment((-0.5, 0.0), (0.5, 0.0)),
                LineSegment((-0.5, 0.0), (0.5, 0.0)),
                (0.0, 0.0),
            )

    def test_c1_arcs_must_meet_at_corner(self):
        with pytest.raises(GeometryError):
            build_c1_patch(
                LineSegment((-0.5, 0.0), (0.5, 0.0)),
                LineSegment((0.1, -0.5), (0.1, 0.5)),
                (0.0, 0.0),
            )

    def test_c2_corner_is_image_of_one_one(self):
        patch = build_c2_patch(
            LineSegment((-1.0, 0.0), (0.0, 0.0)), LineSegment((0.0, -1.0), (0.0, 0.0)), (0.0, 0.0)
        )
        x, y = patch.mapping.map(np.array(1.0), np.array(1.0))
        assert (float(x), float(y)) == pytest.approx((0.0, 0.0))

    def test_c2_forty_degree_corner(self):
        """A 40 degree convex corner has a constant-sign Jacobian."""
        angle = np.deg2rad(40.0)
        tip = np.array([0.0, 0.0])
        a = LineSegment(tip - 0.01 * np.array([1.0, 0.0]), tip)
        b = LineSegment(tip - 0.01 * np.array([np.cos(angle), np.sin(angle)]), tip)
        patch = build_c2_patch(a, b, tip)
        q = np.linspace(0, 1, 101)
        Q1, Q2 = np.meshgrid(q, q, indexing="ij")
        det = patch.mapping.determinant(Q1, Q2)
        assert np.all(det > 0) or np.all(det < 0)


class TestInverseMapping:
    """Test suite for the damped Newton inverse."""

    def test_round_trip_on_curved_patch(self):
        arc = CircularArc((0.0, 0.0), 0.5, 0.0, np.pi / 2)
        patch = build_s_patch(arc, 0.2, side=-1, sides={"q2_min": "slip_wall"}, n=43, nv=9)
        q1, q2 = patch.parameter_grid()
        Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
        x, y = patch.mapping.map(Q1.ravel(), Q2.ravel())
        p1, p2, ok = patch.inverse_map(x, y)
        assert ok.all()
        assert np.max(np.abs(p1 - Q1.ravel())) <= 1e-9
        assert np.max(np.abs(p2 - Q2.ravel())) <= 1e-9

    def test_locate_outside(self):
        patch = build_i_patch(0.0, 1.0, 0.0, 1.0, sides=WALLS)
        _, _, inside = patch.locate(np.array([0.5, 1.5]), np.array([0.5, 0.5]))
        assert inside.tolist() == [True, False]

    def test_extrusion_side_orientation(self):
        """Outward extrusion of a counterclockwise arc grows the radius."""
        arc = CircularArc((0.0, 0.0), 0.5, 0.0, np.pi / 2)
        patch = build_s_patch(arc, 0.2, side=-1)
        x, y = patch.mapping.map(np.array(0.5), np.array(1.0))
        assert np.hypot(float(x), float(y)) == pytest.approx(0.7)


class TestSubdivideL:
    """Test suite for subdivide_L."""

    def test_small_configuration(self):
        """r=4, n1=9, nv=3: 12 preliminary squares and 10 subpatches, one L-shaped."""
        patch = _right_angle_c1()
        assert len(preliminary_squares_L(4)) == 12
        subs = subdivide_L(patch, 4, 9, 3)
        assert len(subs) == 10
        assert sum(sp.is_l_shaped for sp in subs) == 1
        assert subs[0].label == (0,)

    def test_r2_gives_only_the_corner(self):
        patch = _right_angle_c1()
        assert len(preliminary_squares_L(2)) == 3
        subs = subdivide_L(patch, 2, 9, 3)
        assert len(subs) == 1 and subs[0].is_l_shaped

    @pytest.mark.parametrize("r", [4, 6, 8, 10])
    def test_counting_law(self, r):
        """Three quarters of r^2 squares, minus three, plus the corner subpatch."""
        subs = subdivide_L(_right_angle_c1(), r, 9, 3)
        assert len(preliminary_squares_L(r)) == 3 * r * r // 4
        assert len(subs) == 3 * r * r // 4 - 2

    def test_odd_r_rejected(self):
        with pytest.raises(UsageError):
            subdivide_L(_right_angle_c1(), 3, 9, 3)

    def test_half_index(self):
        patch = _right_angle_c1()
        subdivide_L(patch, 4, 9, 3)
        assert patch.shape == (39, 39)
        assert patch.half_index == 19

    def test_overlap_widths(self):
        """Neighbouring subpatches share 2 nv + 1 grid lines."""
        subs = {sp.label: sp for sp in subdivide_L(_right_angle_c1(), 4, 9, 3)}
        upper, lower = subs[(0, 3)], subs[(0, 2)]
        assert lower.j1 - upper.j0 + 1 == 7
        corner = subs[(0,)]
        assert lower.i1 - corner.i0 + 1 == 7

    def test_subpatches_cover_the_grid(self):
        patch = _right_angle_c1()
        subs = subdivide_L(patch, 6, 9, 3)
        covered = set().union(*(sp.index_set() for sp in subs))
        n1, n2 = patch.shape
        I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        inside = patch.in_parameter_space(I, J)
        assert covered == set(zip(I[inside].tolist(), J[inside].tolist()))

    def test_clipped_subpatches_are_rectangles(self):
        """Only the corner subpatch carries a mask; rectangle sides are uniformly classified."""
        for sp in subdivide_L(_right_angle_c1(), 6, 9, 3):
            if sp.label == (0,):
                continue
            assert not sp.is_l_shaped
            assert "mixed" not in sp.side_classification().values()

    def test_grid_index_bijection(self):
        for sp in subdivide_L(_right_angle_c1(), 4, 9, 3):
            x, y = sp.physical
            assert len(sp.index_set()) == x[sp.active].size


class TestSubdivideQ:
    """Test suite for subdivide_Q."""

    def test_single_subpatch(self):
        patch = build_i_patch(0.0, 1.0, 0.0, 1.0, sides=WALLS)
        [sp] = subdivide_Q(patch, 1, 1, 83, 9)
        assert sp.shape == (101, 101)
        assert sp.index_set() == frozenset(itertools.product(range(101), range(101)))

    def test_two_subpatches_overlap(self):
        patch = build_i_patch(0.0, 2.0, 0.0, 1.0, sides=WALLS)
        a, b = subdivide_Q(patch, 2, 1, 83, 9)
        assert a.shape == b.shape == (101, 101)
        assert a.i1 - b.i0 + 1 == 19

    def test_riemann4_layout(self):
        """7x7 subpatches of 101^2 points, about half a million in total."""
        patch = build_i_patch(0.0, 1.0, 0.0, 1.0, sides=WALLS)
        subs = subdivide_Q(patch, 7, 7, 83, 9)
        assert len(subs) == 49
        assert sum(sp.n_points for sp in subs) == 49 * 101 * 101
        assert patch.h[0] == pytest.approx(1 / 592)

    def test_c1_rejected(self):
        with pytest.raises(UsageError):
            subdivide_Q(_right_angle_c1(), 2, 2, 9, 3)


class TestFringeAndWindows:
    """Test suite for fringe regions and windows."""

    def test_all_external_sides(self):
        patch = build_i_patch(0.0, 1.0, 0.0, 1.0, sides=WALLS)
        [sp] = subdivide_Q(patch, 1, 1, 83, 9)
        assert fringe_region(sp, 5) == frozenset()

    def test_one_internal_side(self):
        sides = dict(WALLS, q1_max=None)
        patch = build_i_patch(0.0, 1.0, 0.0, 1.0, sides=sides)
        [sp] = subdivide_Q(patch, 1, 1, 83, 9)
        fringe = fringe_region(sp, 5)
        assert len(fringe) == 5 * 101
        assert all(i >= 96 for i, _ in fringe)

    def test_corner_subpatch_matches_brute_force(self):
        """Fringe of the L-shaped subpatch equals a walk from every point toward internal ends."""
        patch = _right_angle_c1()
        subs = subdivide_L(patch, 4, 9, 3)
        corner = subs[0]
        n_f = 3
        members = corner.index_set()
        expected = set()
        for i, j in members:
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                for k in range(1, n_f + 1):
                    q = (i + k * di, j + k * dj)
                    if q in members:
                        continue
                    if patch.boundary_kind(np.array(q[0]), np.array(q[1])) != PHYSICAL:
                        expected.add((i, j))
                    break
        assert fringe_region(corner, n_f) == expected
        assert expected

    def test_obstacle_arcs_are_external(self):
        """With r=2 the corner subpatch has no internal side at all."""
        patch = _right_angle_c1(sides={s: "slip_wall" for s in WALLS})
        [corner] = subdivide_L(patch, 2, 9, 3)
        assert fringe_region(corner, 3) == frozenset()

    def test_window_profile(self):
        w = window_profile(np.array([0, 4, 5, 9, 14, 20, np.inf]), 5, 10)
        assert w[0] == 0.0 and w[1] == 0.0
        assert w[3] == pytest.approx(0.5)
        assert w[4] == 1.0 and w[5] == 1.0 and w[6] == 1.0
        assert np.all(np.diff(w) >= 0)

    def test_window_vanishes_on_fringe(self):
        patch = build_i_patch(0.0, 2.0, 0.0, 1.0, sides=WALLS)
        subs = subdivide_Q(patch, 2, 1, 83, 9)
        for sp in subs:
            w = window(sp, 5)
            assert np.all(w[sp.fringe_mask(5)] == 0.0)
            assert w.max() == 1.0

    def test_trapezoid_weights_integrate_area(self):
        patch = build_i_patch(0.0, 2.0, 0.0, 0.5, sides=WALLS)
        [sp] = subdivide_Q(patch, 1, 1, 83, 9)
        assert sp.quadrature_weights.sum() == pytest.approx(1.0, rel=1e-12)

    def test_boundary_faces(self):
        sides = dict(WALLS, q1_max=None)
        patch = build_i_patch(0.0, 1.0, 0.0, 1.0, sides=sides)
        [sp] = subdivide_Q(patch, 1, 1, 83, 9)
        faces = {f.side: f for f in sp.boundary_faces}
        assert set(faces) == {"q1_min", "q2_min", "q2_max"}
        assert np.allclose(faces["q1_min"].nx, -1.0) and np.allclose(faces["q1_min"].ny, 0.0)
        assert np.allclose(faces["q2_max"].ny, 1.0)
        assert faces["q1_min"].points.size == 101


class TestRefinement:
    """Test suite for refine."""

    def _rectangle(self):
        patch = build_i_patch(0.0, 2.0, 0.0, 1.0, sides=WALLS)
        return DomainDecomposition([patch], nv=9, n0=83, n1=43)

    def test_unchanged_when_bound_holds(self):
        dec = self._rectangle()
        assert refine(dec, 1.0) is dec

    def test_halving_hbar_doubles_counts(self):
        coarse = refine(self._rectangle(), 0.012)
        assert (coarse.patches[0].r, coarse.patches[0].s) == (2, 1)
        fine = refine(coarse, 0.006)
        assert (fine.patches[0].r, fine.patches[0].s) == (4, 2)
        assert fine.max_spacing() <= 0.006

    def test_c1_stays_even_and_square(self):
        dec = DomainDecomposition([_right_angle_c1()], nv=9, n0=83, n1=43)
        out = refine(dec, 0.005)
        patch = out.patches[0]
        assert patch.r == patch.s and patch.r % 2 == 0
        assert out.max_spacing() <= 0.005

    def test_invalid_bound(self):
        with pytest.raises(UsageError):
            refine(self._rectangle(), 0.0)


class TestMinimumOverlap:
    """Test suite for check_min_overlap and check_coverage."""

    def _pair(self, shift):
        left = build_i_patch(
            0.0, 1.0, 0.0, 1.0, sides={"q1_min": "slip_wall", "q2_min": "slip_wall", "q2_max": "slip_wall"}
        )
        right = build_i_patch(
            shift,
            shift + 1.0,
            0.0,
            1.0,
            sides={"q1_max": "slip_wall", "q2_min": "slip_wall", "q2_max": "slip_wall"},
        )
        domain = lambda x, y: (x >= 0) & (x <= shift + 1.0) & (y >= 0) & (y <= 1.0)  # noqa: E731
        return DomainDecomposition([left, right], nv=9, n0=83, n1=43, domain=domain)

    def test_wide_overlap_passes(self):
        report = check_min_overlap(self._pair(0.5))
        assert report.passed
        assert report.checked_sides == 2

    def test_narrow_overlap_fails(self):
        report = check_min_overlap(self._pair(0.95))
        assert not report.passed
        assert all(issue.rule == "layer" for issue in report.issues)
        assert report.issues[0].count > 0
        assert report.issues[0].points

    def test_coverage(self):
        report = check_coverage(self._pair(0.5), samples=2000)
        assert report.passed
        assert report.uncovered == 0

    def test_coverage_needs_domain(self):
        dec = DomainDecomposition([build_i_patch(0, 1, 0, 1, sides=WALLS)], nv=9, n0=83, n1=43)
        with pytest.raises(UsageError):
            check_coverage(dec)

    def test_strip_must_reach_c1_corner(self):
        corner = _right_angle_c1()
        short = build_s_patch(LineSegment((0.2, 0.0), (1.0, 0.0)), 0.2, side=1)
        report = check_min_overlap(DomainDecomposition([corner, short], nv=9, n0=83, n1=43))
        assert any(issue.rule == "s_c1_corner" for issue in report.issues)

    def test_strip_reaching_corner(self):
        corner = _right_angle_c1()
        full = build_s_patch(LineSegment((0.0, 0.0), (1.0, 0.0)), 0.2, side=1)
        report = check_min_overlap(DomainDecomposition([corner, full], nv=9, n0=83, n1=43))
        assert report.checked_corners == 1
        assert not any(issue.rule == "s_c1_corner" for issue in report.issues)


class TestMeshFiles:
    """Test suite for mesh serialization."""

    def _decomposition(self):
        arc = CircularArc((0.0, 0.0), 0.5, 0.0, np.pi / 2)
        strip = build_s_patch(arc, 0.2, side=-1, sides={"q2_min": "noslip_adiabatic"}, r=2)
        return DomainDecomposition([_right_angle_c1(r=4), strip], nv=3, n0=9, n1=9, name="demo")

    def test_round_trip(self, tmp_path):
        dec = self._decomposition()
        path = save_mesh(dec, tmp_path / "mesh.json")
        loaded = load_mesh(path)
        assert mesh_to_dict(loaded) == mesh_to_dict(dec)
        q = np.linspace(0.0, 1.0, 7)
        for a, b in zip(dec.patches, loaded.patches):
            assert np.array_equal(np.array(a.mapping.map(q, q)), np.array(b.mapping.map(q, q)))

    def test_rejects_other_formats(self):
        with pytest.raises(ConfigurationError):
            mesh_from_dict({"format": "other", "version": 1})

    def test_rejects_inconsistent_tables(self):
        data = mesh_to_dict(self._decomposition())
        data["subpatches"] = data["subpatches"][:-1]
        with pytest.raises(Exception) as info:
            mesh_from_dict(data)
        assert "subpatch" in str(info.value)

    def test_patch_kinds_survive(self):
        loaded = mesh_from_dict(mesh_to_dict(self._decomposition()))
        assert [p.kind for p in loaded.patches] == [PatchKind.C1, PatchKind.S]
        assert isinstance(loaded.patches[0], Patch)


class TestAffineMapping:
    def test_singular_mapping_rejected(self):
        with pytest.raises(GeometryError):
            AffineMapping((0, 0), (1, 0), (2, 0))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
