"""
End-to-end tests for the run driver, the worker transports and the scaling bench.
"""
import json
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial import cKDTree

from app.core.config import Settings
from app.core.exceptions import ConfigurationError, UsageError
from app.models.run import RunConfig
from app.services.comm_plan import assign_ranks
from app.services.diagnostics import fit_shock_angle, raster_grid
from app.services.driver import bench, run
from app.services.oracles import exact_riemann_1d, oblique_shock_angle
from app.services.problems import get_problem
from app.services.solver_context import build_context, execute
from app.services.transport import ThreadTransport, make_transport, slice_payload
from app.services.writers import read_energy_csv, read_fields_csv, read_manifest, read_pgm

WEDGE_BOX = (0.0, 0.024, 0.0, 0.03)


def _sod(**kwargs) -> RunConfig:
    return RunConfig(problem="sod", raster_width=64, **{"max_steps": 2, "run_name": "sod", **kwargs})


def _final_step(run_dir: Path) -> Path:
    return sorted(run_dir.glob("step_*"))[-1]


def _final_fields(run_dir: Path) -> dict[str, np.ndarray]:
    """Columns of every subpatch CSV of the last written step, concatenated."""
    parts = [read_fields_csv(p) for p in sorted(_final_step(run_dir).glob("subpatch_*.csv"))]
    return {key: np.concatenate([part[key] for part in parts]) for key in parts[0]}


def _column_means(x: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs, inverse = np.unique(np.round(x, 9), return_inverse=True)
    inverse = inverse.ravel()
    return xs, np.bincount(inverse, weights=values) / np.bincount(inverse)


def _merged_points(fields: dict[str, np.ndarray], key: str) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``key`` over overlap duplicates, one row per distinct grid point."""
    coords = np.round(np.column_stack([fields["x"], fields["y"]]), 9)
    unique, inverse = np.unique(coords, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    return unique, np.bincount(inverse, weights=fields[key]) / np.bincount(inverse)


def _wedge_shock_angle(run_dir: Path, width: int) -> float:
    """Shock angle fitted to the density-gradient magnitude above the wedge tip."""
    problem = get_problem("wedge-m3.5")
    fields = _final_fields(run_dir)
    xs, ys = raster_grid(WEDGE_BOX, width)
    X, Y = np.meshgrid(xs, ys)
    tree = cKDTree(np.column_stack([fields["x"], fields["y"]]))
    _, idx = tree.query(np.column_stack([X.ravel(), Y.ravel()]))
    image = np.where(problem.domain(X.ravel(), Y.ravel()), fields["rho"][idx], np.nan)
    image = image.reshape(X.shape)
    d_y, d_x = np.gradient(image, ys, xs)
    return fit_shock_angle(xs, ys, np.hypot(d_x, d_y), y_min=0.015, x_range=(0.0145, 0.0235))


class TestRun:
    """Test suite for driver.run on the coarse Sod channel."""

    def test_outputs(self, small_settings):
        result = run(_sod(), small_settings)
        assert result.steps == 2
        assert result.final_time > 0.0
        assert result.decomposition["subpatches"] == 4
        assert "step_000002/subpatch_0000.csv" in result.files
        assert "step_000002/schlieren.pgm" in result.files
        assert result.energy_file == "energy.csv"

    def test_run_directory(self, small_settings, tmp_path):
        result = run(_sod(), small_settings)
        run_dir = tmp_path / "runs" / "sod"
        assert result.run_dir == str(run_dir)
        manifest = read_manifest(run_dir / "manifest.json")
        assert manifest["transport"] == "thread"
        assert manifest["workers"] == 1
        assert manifest["exchange"]["interpolations"] == 0
        assert manifest["problem_spec"]["name"] == "sod"
        assert (run_dir / "run.log").exists()

    def test_fields_stay_physical(self, small_settings, tmp_path):
        run(_sod(), small_settings)
        step_dir = tmp_path / "runs" / "sod" / "step_000002"
        for gid in range(4):
            fields = read_fields_csv(step_dir / f"subpatch_{gid:04d}.csv")
            assert np.all(fields["rho"] > 0.0)
            assert np.all(fields["p"] > 0.0)
            assert np.all(fields["mu"] >= 0.0)
            assert set(np.unique(fields["tau"])) <= {1.0, 2.0, 3.0, 4.0}
        image = read_pgm(step_dir / "schlieren.pgm")
        assert image.shape == (16, 64)

    def test_energy_series(self, small_settings, tmp_path):
        run(_sod(), small_settings)
        series = read_energy_csv(tmp_path / "runs" / "sod" / "energy.csv")
        assert [row[0] for row in series] == [0, 1, 2]
        assert series[0][2] == pytest.approx(1.375, abs=0.02)
        assert all(e == pytest.approx(series[0][2], rel=2e-2) for _, _, e in series)

    def test_worker_count_does_not_change_results(self, small_settings, tmp_path):
        """Per-subpatch tasks and gid-ordered reductions give bitwise-identical outputs."""
        runs = {}
        for workers in (1, 2, 4):
            run(_sod(run_name=f"w{workers}", workers=workers), small_settings)
            run_dir = tmp_path / "runs" / f"w{workers}"
            fields = [p.read_bytes() for p in sorted((run_dir / "step_000002").glob("subpatch_*.csv"))]
            runs[workers] = (read_energy_csv(run_dir / "energy.csv"), fields)
        assert len(runs[1][1]) == 4
        assert runs[1] == runs[2] == runs[4]

    def test_periodic_output(self, small_settings):
        result = run(_sod(output_every=1), small_settings)
        steps = sorted({f.split("/")[0] for f in result.files})
        assert steps == ["step_000000", "step_000001", "step_000002"]

    def test_end_time_clips_last_step(self, small_settings):
        result = run(_sod(max_steps=None, t_end=0.001), small_settings)
        assert result.steps == 1
        assert result.final_time == pytest.approx(0.001, rel=1e-12)

    def test_zero_end_time(self, small_settings):
        result = run(_sod(max_steps=None, t_end=0.0, write_schlieren=False), small_settings)
        assert result.steps == 0
        assert "step_000000/subpatch_0003.csv" in result.files

    def test_unknown_problem(self, small_settings):
        with pytest.raises(UsageError):
            run(RunConfig(problem="nozzle"), small_settings)

    def test_ann_without_weights(self, small_settings, tmp_path):
        config = _sod(classifier_variant="ann", classifier_weights=str(tmp_path / "none.fcw"))
        with pytest.raises(ConfigurationError):
            run(config, small_settings)

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"schema_version": 1, "problem": "sod", "workers": 2}))
        config = RunConfig.from_file(path)
        assert config.settings_overrides() == {"workers": 2}
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(path)
        path.write_text(json.dumps({"problem": "sod", "filter_order": 3}))
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(path)


class TestTransport:
    """Test suite for transports and worker tasks."""

    def test_slice_payload(self):
        payload = {"states": {0: "a", 1: "b", 2: "c"}, "prelim": {0: 1, 1: 2}, "t": 0.5}
        sliced = slice_payload(payload, [2, 0])
        assert sliced["states"] == {2: "c", 0: "a"}
        assert sliced["prelim"] == {0: 1, 1: 2}
        assert sliced["t"] == 0.5

    def test_thread_results_in_gid_order(self, small_settings):
        context = build_context(_sod(), small_settings)
        states = {
            sp.gid: context.problem.initial_state(*sp.physical) for sp in context.dec.subpatches
        }
        with ThreadTransport(context, assign_ranks(context.dec, 3)) as transport:
            assert len(transport.ranks) == 3
            bounds = transport.run("dt", {"states": states, "mu": {g: None for g in states}})
        assert list(bounds) == [0, 1, 2, 3]
        serial = execute(context, "dt", context.gids, {"states": states, "mu": {g: None for g in states}})
        assert bounds == serial

    def test_unknown_transport(self, small_settings):
        context = build_context(_sod(), small_settings)
        with pytest.raises(UsageError):
            make_transport("carrier-pigeon", context, assign_ranks(context.dec, 1))

    def test_unknown_task(self, small_settings):
        context = build_context(_sod(), small_settings)
        with pytest.raises(UsageError):
            execute(context, "teleport", [0], {})

    @pytest.mark.slow
    def test_process_transport_matches_threads(self, small_settings, tmp_path):
        run(_sod(run_name="threads", workers=2), small_settings)
        run(_sod(run_name="procs", workers=2, transport="process"), small_settings)
        threads = read_energy_csv(tmp_path / "runs" / "threads" / "energy.csv")
        procs = read_energy_csv(tmp_path / "runs" / "procs" / "energy.csv")
        assert threads == procs


class TestBench:
    """Test suite for the scaling bench."""

    def test_strong_scaling_outputs(self, small_settings, tmp_path):
        records = bench("sod", [1, 2], steps=1, base_settings=small_settings, output_dir=str(tmp_path))
        assert [r.workers for r in records] == [1, 2]
        assert records[0].strong_efficiency == pytest.approx(1.0)
        assert records[1].strong_efficiency is not None
        bench_dir = tmp_path / "bench-sod"
        assert (bench_dir / "scaling.csv").read_text().startswith("N,N_C,T_S,S,E_s,E_w")
        assert (bench_dir / "scaling.md").exists()
        assert json.loads((bench_dir / "bench.json").read_text())["problem"] == "sod"

    def test_invalid_arguments(self, small_settings):
        with pytest.raises(UsageError):
            bench("sod", [1, 2], weak="sideways", base_settings=small_settings)
        with pytest.raises(UsageError):
            bench("sod", [1], base_settings=small_settings)


@pytest.mark.slow
class TestAcceptance:
    """Longer runs checked against exact solutions, conserved quantities and each other."""

    def test_sod_density_profile(self, default_settings, tmp_path):
        """On 403 columns the t = 0.2 profile has L1 error <= 0.02 and a shock within 2 cells."""
        settings = default_settings.model_copy(update={"geom_n0": 97})
        run(RunConfig(problem="sod", run_name="sod", write_schlieren=False), settings)
        fields = _final_fields(tmp_path / "runs" / "sod")
        xs, rho = _column_means(fields["x"], fields["rho"])
        assert xs.size == 403
        exact = exact_riemann_1d((1.0, 0.0, 1.0), (0.125, 0.0, 0.1), 0.2, xs)
        assert np.mean(np.abs(rho - exact.rho)) <= 0.02
        h = xs[1] - xs[0]
        middle = 0.5 * (exact.rho_star_right + 0.125)
        shock = xs[np.flatnonzero(rho >= middle)[-1]]
        assert abs(shock - exact.shock_positions[-1]) <= 2.0 * h

    def test_energy_is_conserved_through_reflections(self, tmp_path):
        """The closed channel keeps its mean energy near 1.375 up to t = 5."""
        settings = Settings(
            geom_n0=51, geom_n1=13, geom_nv=4, geom_nf=3, output_dir=str(tmp_path / "runs")
        )
        config = RunConfig(
            problem="sod-energy", run_name="energy", write_fields=False, write_schlieren=False
        )
        result = run(config, settings)
        assert result.final_time == pytest.approx(5.0)
        series = read_energy_csv(tmp_path / "runs" / "energy" / "energy.csv")
        energies = np.array([e for _, _, e in series])
        assert np.all((energies >= 1.355) & (energies <= 1.395))
        assert abs(energies[-1] - 1.375) <= 0.02

    def test_riemann4_split_matches_single_patch(self, tmp_path):
        """One 126-point patch and a 3x3 split of the same grid agree; workers do not matter."""

        def settings(n0: int) -> Settings:
            return Settings(
                geom_n0=n0, geom_n1=13, geom_nv=4, geom_nf=3, output_dir=str(tmp_path / "runs")
            )

        def config(name: str, r: int, workers: int = 1) -> RunConfig:
            return RunConfig(
                problem="riemann4",
                problem_options={"r": r, "s": r},
                run_name=name,
                workers=workers,
                write_schlieren=False,
            )

        run(config("single", 1), settings(118))
        run(config("split", 3), settings(40))
        run(config("split4", 3, workers=4), settings(40))
        coords1, rho1 = _merged_points(_final_fields(tmp_path / "runs" / "single"), "rho")
        coords2, rho2 = _merged_points(_final_fields(tmp_path / "runs" / "split"), "rho")
        assert rho1.size == 126 * 126
        assert np.array_equal(coords1, coords2)
        assert np.mean(np.abs(rho1 - rho2)) <= 1e-3 * np.mean(rho1)
        split, split4 = (
            [p.read_bytes() for p in sorted(_final_step(tmp_path / "runs" / name).glob("*.csv"))]
            for name in ("split", "split4")
        )
        assert split == split4

    def test_viscosity_stays_near_waves(self, default_settings, tmp_path):
        """At t = 0.1 the blended viscosity vanishes 10 cells away from every Sod wave."""
        run(RunConfig(problem="sod", run_name="mu", t_end=0.1, write_schlieren=False), default_settings)
        fields = _final_fields(tmp_path / "runs" / "mu")
        xs = np.unique(np.round(fields["x"], 9))
        h = xs[1] - xs[0]
        waves = np.array(exact_riemann_1d((1.0, 0.0, 1.0), (0.125, 0.0, 0.1), 0.1, xs).wave_positions)
        distance = np.min(np.abs(fields["x"][:, None] - waves[None, :]), axis=1)
        far = distance >= 10.0 * h
        assert far.sum() > fields["x"].size // 2
        assert np.all(fields["mu"][far] == 0.0)
        assert np.any(fields["mu"][~far] > 0.0)

    def test_wedge_shock_angle(self, default_settings, tmp_path):
        """The Mach 3.5 wedge shock approaches the inviscid angle from above under refinement."""
        angles = {}
        for scale in (2.0, 1.0):
            name = f"wedge-{scale:g}"
            config = RunConfig(
                problem="wedge-m3.5", run_name=name, scale=scale, workers=4, write_schlieren=False
            )
            run(config, default_settings)
            angles[scale] = _wedge_shock_angle(tmp_path / "runs" / name, width=int(240 / scale))
        inviscid = oblique_shock_angle(3.5, 40.0)
        assert inviscid == pytest.approx(34.6, abs=0.05)
        assert abs(angles[1.0] - 36.8) <= 2.5
        assert angles[2.0] >= angles[1.0] > inviscid - 1.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
