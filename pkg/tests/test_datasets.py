import numpy as np
import pytest

from eqdiscover.datasets import (
    ODEBENCH,
    OdeTrajectory,
    PDE_SYSTEMS,
    generate_odebench,
    generate_pde,
    load_grid,
    load_trajectory,
    save_grid,
    save_trajectory,
    serialize_grid,
    truth_expression,
    odebench_truth,
)
from eqdiscover.errors import FormatError
from eqdiscover.expressions import evaluate
from eqdiscover.numerics import fd_derivative


class TestPdeGeneration:
    def test_burgers_discretization(self, burgers):
        assert burgers.fields["u"].shape == (201, 256)
        assert burgers.x0 == -8.0
        assert abs(burgers.dx - 16.0 / 256) < 1e-15
        assert abs(burgers.t0) < 1e-15
        assert abs(burgers.dt - 0.05) < 1e-15
        assert burgers.ground_truth == {"u*u_x": -1.0, "u_xx": 0.1}

    def test_chafee_discretization(self, chafee):
        assert chafee.fields["u"].shape == (200, 301)
        assert chafee.ground_truth == {"u_xx": 1.0, "u": 1.0, "u^3": -1.0}

    def test_ks_discretization(self, ks):
        assert ks.fields["u"].shape == (256, 512)

    def test_divide_discretization(self, divide):
        assert divide.fields["u"].shape == (251, 100)
        assert divide.x[0] == 1.0
        assert abs(divide.x[-1] - 1.99) < 1e-12

    def test_fisher_discretization(self, fisher):
        assert fisher.fields["u"].shape == (99, 199)
        assert abs(fisher.x[0] + 0.99) < 1e-12
        assert abs(fisher.t[0] - 0.01) < 1e-12

    def test_generation_is_deterministic(self):
        a = generate_pde("fisher-kpp")
        b = generate_pde("fisher-kpp")
        np.testing.assert_array_equal(a.fields["u"], b.fields["u"])
        assert a.fingerprint() == b.fingerprint()

    def test_features_present(self, burgers):
        for name in ("u_x", "u_xx", "u_xxx", "u_xxxx", "u_t", "x"):
            assert name in burgers.features
            assert burgers.features[name].shape == burgers.fields["u"].shape

    def test_unknown_system(self):
        with pytest.raises(KeyError):
            generate_pde("navier-stokes-3d")

    def test_aliases(self):
        assert generate_pde.__wrapped__ if hasattr(generate_pde, "__wrapped__") else True
        grid = generate_pde("fisher", overrides={"n": 12})
        assert grid.name == "fisher-kpp"
        assert grid.fields["u"].shape[0] == 12


class TestGridIO:
    def test_round_trip(self, tmp_path, fisher):
        path = tmp_path / "fisher.grid"
        fingerprint = save_grid(fisher, path)
        loaded = load_grid(path)
        np.testing.assert_array_equal(loaded.fields["u"], fisher.fields["u"])
        np.testing.assert_array_equal(loaded.features["u_xx"], fisher.features["u_xx"])
        assert loaded.ground_truth == fisher.ground_truth
        assert loaded.fingerprint() == fingerprint

    def test_fingerprint_tracks_content(self, fisher):
        text = serialize_grid(fisher)
        import dataclasses
        changed = dataclasses.replace(fisher)
        changed.fields = {"u": fisher.fields["u"].copy()}
        changed.fields["u"][0, 0] += 1e-9
        changed.features = {}
        changed.__post_init__()
        assert changed.fingerprint() != fisher.fingerprint()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.grid"
        path.write_text("not a grid\n1,2,3\n")
        with pytest.raises(FormatError):
            load_grid(path)

    def test_row_length_mismatch(self, tmp_path, fisher):
        path = tmp_path / "fisher.grid"
        save_grid(fisher, path)
        lines = path.read_text().splitlines()
        lines[2] = "1.0,2.0"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError) as err:
            load_grid(path)
        assert err.value.line == 3

    def test_truncated_field(self, tmp_path, fisher):
        path = tmp_path / "fisher.grid"
        save_grid(fisher, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:50]) + "\n")
        with pytest.raises(FormatError):
            load_grid(path)

    def test_two_field_grid(self, tmp_path):
        # multi-field data is load-only; both fields become operands with
        # their own derivative features
        rng = np.random.default_rng(0)
        from eqdiscover.datasets import PdeGrid
        grid = PdeGrid(name="two", fields={"u": rng.normal(size=(12, 16)),
                                           "v": rng.normal(size=(12, 16))},
                       x0=0.0, dx=0.1, t0=0.0, dt=0.01)
        path = tmp_path / "two.grid"
        save_grid(grid, path)
        loaded = load_grid(path)
        assert set(loaded.fields) == {"u", "v"}
        for name in ("u_x", "v_x", "u_t", "v_t", "v_xxxx"):
            assert name in loaded.features


class TestOdeBench:
    def test_sixteen_systems(self):
        assert set(ODEBENCH) == set(range(1, 17))

    def test_ode1_train_setup(self, ode1_train):
        assert ode1_train.initial_condition == 10.0
        assert ode1_train.t.size == 512
        # analytic xdot at t=0 equals the right-hand side at x0
        assert abs(ode1_train.xdot[0] - (0.7 - 10.0 / 1.2) / 2.31) < 1e-12

    def test_ode16_setup(self, ode16_train):
        assert ode16_train.initial_condition == -2.74
        assert abs(ode16_train.xdot[0] - (0.21 - np.sin(-2.74))) < 1e-12

    def test_ode1_fixed_point(self):
        # x -> c0 * c1 = 0.84 for the charging-capacitor system
        traj = generate_odebench(1, "train", t_span=(0.0, 60.0))
        assert abs(traj.x[-1] - 0.84) < 1e-6

    def test_xdot_consistent_with_finite_differences(self):
        errs = []
        for n in (256, 512):
            traj = generate_odebench(2, "train", n_points=n)
            fd = fd_derivative(traj.x, "time", 1, traj.t[1] - traj.t[0])
            errs.append(np.abs(fd - traj.xdot)[1:-1].max())
        assert 3.0 <= errs[0] / errs[1] <= 5.0

    def test_which_ic_validation(self):
        with pytest.raises(ValueError):
            generate_odebench(1, "validation")
        with pytest.raises(KeyError):
            generate_odebench(99, "train")

    def test_truth_expression_evaluates(self):
        for system_id in (3, 7, 13, 15):
            truth = odebench_truth(system_id)
            expr = truth_expression(truth)
            value = evaluate(expr.root, {"x": np.array([truth.ic_train])})
            assert np.isfinite(value).all()


class TestTrajectoryIO:
    def test_round_trip_with_metadata(self, tmp_path, ode16_train):
        path = tmp_path / "ode16.traj"
        save_trajectory(ode16_train, path)
        loaded = load_trajectory(path)
        np.testing.assert_array_equal(loaded.t, ode16_train.t)
        np.testing.assert_array_equal(loaded.x, ode16_train.x)
        np.testing.assert_array_equal(loaded.xdot, ode16_train.xdot)
        assert loaded.system_id == 16
        assert loaded.ground_truth == ode16_train.ground_truth

    def test_plain_csv_without_metadata(self, tmp_path):
        path = tmp_path / "plain.traj"
        path.write_text("t,x,xdot\n0,1,0.5\n1,1.5,0.4\n2,1.9,0.3\n")
        loaded = load_trajectory(path)
        assert loaded.ground_truth is None
        assert loaded.t.size == 3

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.traj"
        path.write_text("time,state\n0,1\n")
        with pytest.raises(FormatError):
            load_trajectory(path)

    def test_column_count(self, tmp_path):
        path = tmp_path / "bad2.traj"
        path.write_text("t,x,xdot\n0,1\n")
        with pytest.raises(FormatError):
            load_trajectory(path)

    def test_time_must_increase(self):
        with pytest.raises(ValueError):
            OdeTrajectory(t=np.array([0.0, 0.0, 1.0]), x=np.zeros(3),
                          xdot=np.zeros(3), initial_condition=0.0)
