import numpy as np
import pytest
from sklearn.base import clone

from eqdiscover.backends import MockBackend
from eqdiscover.estimators import OdeDiscovery, PdeDiscovery


class TestOdeDiscovery:
    def test_get_set_params_and_clone(self):
        est = OdeDiscovery(M=6, P=4, seed=3)
        params = est.get_params()
        assert params["M"] == 6 and params["P"] == 4 and params["seed"] == 3
        est.set_params(K=2)
        assert est.K == 2
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_fit_with_mock_backend(self, ode1_train):
        script = ["```\nc0*x\nsin(x)\n```", "```\nc0 + c1*x\n```"]
        est = OdeDiscovery(backend=MockBackend(script), M=4, P=1, K=3, seed=1,
                           restarts=3, fallback_enabled=False, target_score=0.9)
        est.fit(ode1_train.t, ode1_train.x, xdot=ode1_train.xdot)
        assert est.equation_ == "c0 + c1*x"
        np.testing.assert_allclose(est.constants_, [0.3030, -0.3608], atol=2e-3)
        assert est.score_ > 0.97

    def test_fit_derives_xdot_by_finite_differences(self, ode1_train):
        script = ["```\nc0 + c1*x\n```"]
        est = OdeDiscovery(backend=MockBackend(script), M=2, P=1, K=2, seed=1,
                           restarts=3, fallback_enabled=False, target_score=0.9)
        est.fit(ode1_train.t, ode1_train.x)
        np.testing.assert_allclose(est.constants_, [0.3030, -0.3608], atol=5e-3)

    def test_predict_and_solve(self, ode1_train):
        script = ["```\nc0 + c1*x\n```"]
        est = OdeDiscovery(backend=MockBackend(script), M=2, P=1, K=2, seed=1,
                           restarts=3, fallback_enabled=False, target_score=0.9)
        est.fit(ode1_train.t, ode1_train.x, xdot=ode1_train.xdot)
        xs = np.linspace(1.0, 9.0, 7)
        prediction = est.predict(xs)
        np.testing.assert_allclose(prediction, ode1_train.xdot[0] * 0 + (
            est.constants_[0] + est.constants_[1] * xs), rtol=1e-10)
        solved = est.solve(ode1_train.initial_condition, ode1_train.t)
        assert solved is not None
        from eqdiscover.evaluation import r_squared
        assert r_squared(ode1_train.x, solved) > 0.999

    def test_native_only_fit(self, ode1_train):
        est = OdeDiscovery(backend=None, M=5, P=4, K=3, seed=7, restarts=2)
        est.fit(ode1_train.t, ode1_train.x, xdot=ode1_train.xdot)
        assert est.score_ is not None
        assert est.run_record_.best is not None

    def test_shape_mismatch(self, ode1_train):
        est = OdeDiscovery()
        with pytest.raises(ValueError):
            est.fit(ode1_train.t[:-1], ode1_train.x)


class TestPdeDiscovery:
    def test_fit_with_mock_backend(self, burgers):
        script = ["```\nu_xx + u^2\nu*u_xx\n```", "```\nu*u_x + u_xx\n```"]
        est = PdeDiscovery(backend=MockBackend(script), M=4, P=1, K=3, seed=1,
                           fallback_enabled=False, target_score=0.97)
        est.fit(burgers)
        assert est.equation_ == "u*u_x + u_xx"
        assert est.terms_ == ("u*u_x", "u_xx")
        np.testing.assert_allclose(est.constants_, [-1.0, 0.1], rtol=0.03)

    def test_predict_shape(self, burgers):
        script = ["```\nu*u_x + u_xx\n```"]
        est = PdeDiscovery(backend=MockBackend(script), M=2, P=1, K=2, seed=1,
                           fallback_enabled=False, target_score=0.9)
        est.fit(burgers)
        prediction = est.predict(burgers)
        assert prediction.shape == burgers.fields["u"].shape
        # the prediction approximates u_t away from the boundaries
        err = np.abs(prediction - burgers.features["u_t"])[1:-1, 2:-2]
        assert np.sqrt((err ** 2).mean()) / np.std(burgers.features["u_t"]) < 0.01

    def test_fit_from_path(self, burgers, tmp_path):
        from eqdiscover.datasets import save_grid
        path = tmp_path / "b.grid"
        save_grid(burgers, path)
        script = ["```\nu*u_x + u_xx\n```"]
        est = PdeDiscovery(backend=MockBackend(script), M=2, P=1, K=2, seed=1,
                           fallback_enabled=False, target_score=0.9)
        est.fit(str(path))
        assert est.equation_ == "u*u_x + u_xx"

    def test_rejects_other_inputs(self):
        with pytest.raises(TypeError):
            PdeDiscovery().fit(np.zeros((4, 4)))
