#!/usr/bin/env python3
"""
Tests for the optim package: parameter spaces, Stiefel helpers and Riemannian ADAM.
"""

import numpy as np
import pytest

from common.exceptions import (
    ConfigError,
    InvalidInputError,
    ModelStateError,
    NonFiniteGradientError,
    NumericError,
)
from optim import (
    ParamKind,
    ParamSpace,
    Parameter,
    RiemannianAdam,
    check_stiefel,
    random_stiefel,
    stiefel_deviation,
    stiefel_project,
    stiefel_retract,
)


def stiefel_param(rng, n=5, p=2, name="bimap.W"):
    return Parameter(name, random_stiefel(n, p, rng), ParamSpace.stiefel((n, p)))


class TestParamSpace:
    def test_stiefel_has_no_weight_decay(self):
        space = ParamSpace.stiefel((4, 2))
        assert space.kind == ParamKind.STIEFEL
        assert not space.weight_decay_applies

    def test_weight_decay_on_stiefel_rejected(self):
        with pytest.raises(ConfigError):
            ParamSpace(ParamKind.STIEFEL, (4, 2), True)

    def test_wide_stiefel_rejected(self):
        with pytest.raises(ConfigError):
            ParamSpace.stiefel((2, 4))

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            Parameter("bias", np.zeros(3), ParamSpace.euclidean((4,)))

    def test_accumulate_adds(self):
        param = Parameter("bias", np.zeros(2), ParamSpace.euclidean((2,)))
        param.accumulate([1.0, 2.0])
        param.accumulate([0.5, 0.5])
        np.testing.assert_array_equal(param.grad, [1.5, 2.5])
        param.zero_grad()
        np.testing.assert_array_equal(param.grad, [0.0, 0.0])

    def test_accumulate_wrong_shape(self):
        param = Parameter("bias", np.zeros(2), ParamSpace.euclidean((2,)))
        with pytest.raises(InvalidInputError):
            param.accumulate(np.zeros(3))


class TestStiefelHelpers:
    def test_random_stiefel_is_orthonormal(self, rng):
        assert stiefel_deviation(random_stiefel(7, 3, rng)) < 1e-12

    def test_projection_is_tangent(self, rng):
        w = random_stiefel(6, 3, rng)
        xi = stiefel_project(w, rng.standard_normal((6, 3)))
        skew = w.T @ xi
        assert np.linalg.norm(skew + skew.T) < 1e-10

    def test_projection_is_idempotent(self, rng):
        w = random_stiefel(6, 3, rng)
        xi = stiefel_project(w, rng.standard_normal((6, 3)))
        np.testing.assert_allclose(stiefel_project(w, xi), xi, atol=1e-12)

    def test_retraction_stays_on_manifold(self, rng):
        w = random_stiefel(6, 3, rng)
        step = stiefel_project(w, rng.standard_normal((6, 3)))
        assert stiefel_deviation(stiefel_retract(w, step)) < 1e-10

    def test_zero_step_retracts_to_same_point(self, rng):
        w = random_stiefel(5, 2, rng)
        np.testing.assert_allclose(stiefel_retract(w, np.zeros_like(w)), w, atol=1e-12)

    def test_check_stiefel_reports_deviation(self, rng):
        w = random_stiefel(5, 2, rng) * 1.01
        with pytest.raises(ModelStateError) as excinfo:
            check_stiefel(w, "bimap.W")
        assert excinfo.value.parameter == "bimap.W"
        assert excinfo.value.deviation > 1e-6

    def test_shape_mismatch(self, rng):
        w = random_stiefel(5, 2, rng)
        with pytest.raises(InvalidInputError):
            stiefel_project(w, np.zeros((5, 3)))


class TestRiemannianAdam:
    def test_invalid_hyperparameters(self, rng):
        with pytest.raises(InvalidInputError):
            RiemannianAdam([stiefel_param(rng)], lr=0.0)
        with pytest.raises(InvalidInputError):
            RiemannianAdam([stiefel_param(rng)], betas=(1.0, 0.999))

    def test_duplicate_names_rejected(self, rng):
        with pytest.raises(InvalidInputError):
            RiemannianAdam([stiefel_param(rng), stiefel_param(rng)])

    def test_stiefel_iterates_stay_orthonormal(self, rng):
        param = stiefel_param(rng, 8, 3)
        optimizer = RiemannianAdam([param], lr=0.05, weight_decay=0.0)
        for _ in range(50):
            optimizer.zero_grad()
            param.accumulate(rng.standard_normal((8, 3)))
            optimizer.step()
            assert stiefel_deviation(param.value) < 1e-10

    def test_stiefel_least_squares_decreases(self, rng):
        param = stiefel_param(rng, 5, 2)
        target = random_stiefel(5, 2, rng)
        optimizer = RiemannianAdam([param], lr=0.01, weight_decay=0.0)

        def loss():
            return float(np.sum((param.value - target) ** 2))

        initial = loss()
        for _ in range(300):
            optimizer.zero_grad()
            param.accumulate(2.0 * (param.value - target))
            optimizer.step()
        assert loss() < 0.05 * initial

    def test_euclidean_quadratic_converges(self):
        param = Parameter("bias", np.array([3.0, -2.0]), ParamSpace.euclidean((2,), weight_decay=False))
        optimizer = RiemannianAdam([param], lr=0.05)
        for _ in range(500):
            optimizer.zero_grad()
            param.accumulate(2.0 * param.value)
            optimizer.step()
        assert np.linalg.norm(param.value) < 0.1

    def test_weight_decay_only_touches_euclidean(self, rng):
        stiefel = stiefel_param(rng)
        decayed = Parameter("clf.weight", np.ones(3), ParamSpace.euclidean((3,)))
        exempt = Parameter("clf.bias", np.ones(3), ParamSpace.euclidean((3,), weight_decay=False))
        before = stiefel.value.copy()
        optimizer = RiemannianAdam([stiefel, decayed, exempt], lr=0.1, weight_decay=0.5)
        optimizer.step()
        np.testing.assert_allclose(decayed.value, 0.95 * np.ones(3), atol=1e-12)
        np.testing.assert_array_equal(exempt.value, np.ones(3))
        np.testing.assert_allclose(stiefel.value, before, atol=1e-12)

    def test_non_finite_gradient_leaves_parameters_untouched(self, rng):
        first = stiefel_param(rng, name="a")
        second = Parameter("b", np.ones(2), ParamSpace.euclidean((2,)))
        optimizer = RiemannianAdam([first, second], lr=0.1)
        first.accumulate(rng.standard_normal((5, 2)))
        second.accumulate([1.0, np.nan])
        snapshot = first.value.copy()

        with pytest.raises(NonFiniteGradientError) as excinfo:
            optimizer.step()
        assert excinfo.value.parameter == "b"
        np.testing.assert_array_equal(first.value, snapshot)
        np.testing.assert_array_equal(second.value, np.ones(2))
        assert optimizer.state.step == 0
        assert np.all(optimizer.state.exp_avg["a"] == 0.0)

    def test_memoryless_adam_is_sign_descent(self):
        param = Parameter("scales", np.array([3.0, -2.0, 0.5, 1.0]), ParamSpace.euclidean((4,)))
        optimizer = RiemannianAdam([param], lr=0.1, betas=(0.0, 0.0), weight_decay=0.0)
        for grad in ([4.0, -0.1, 0.0, 25.0], [-1e-2, 7.0, -2.0, 0.5]):
            before = param.value.copy()
            optimizer.zero_grad()
            param.accumulate(grad)
            optimizer.step()
            np.testing.assert_allclose(param.value, before - 0.1 * np.sign(grad), atol=1e-6)

    def test_failed_retraction_commits_nothing(self, rng, monkeypatch):
        first = Parameter("a", np.ones(2), ParamSpace.euclidean((2,)))
        second = stiefel_param(rng, name="b")
        optimizer = RiemannianAdam([first, second], lr=0.1)
        first.accumulate([1.0, -1.0])
        second.accumulate(rng.standard_normal((5, 2)))
        snapshot = second.value.copy()

        def reject(w, name, tol):
            raise NumericError("retraction left the manifold", {"parameter": name})

        monkeypatch.setattr("optim.riemannian_adam.check_stiefel", reject)
        with pytest.raises(NumericError):
            optimizer.step()
        np.testing.assert_array_equal(first.value, np.ones(2))
        np.testing.assert_array_equal(second.value, snapshot)
        assert optimizer.state.step == 0
        assert np.all(optimizer.state.exp_avg["a"] == 0.0)
        assert np.all(optimizer.state.exp_avg_sq["a"] == 0.0)

    def test_first_moment_is_tangent_after_step(self, rng):
        param = stiefel_param(rng, 6, 2)
        optimizer = RiemannianAdam([param], lr=0.05)
        param.accumulate(rng.standard_normal((6, 2)))
        optimizer.step()
        moment = optimizer.state.exp_avg[param.name]
        skew = param.value.T @ moment
        assert np.linalg.norm(skew + skew.T) < 1e-10

    def test_state_dict_resumes_identically(self, rng):
        start = random_stiefel(5, 2, rng)
        grads = [rng.standard_normal((5, 2)) for _ in range(6)]

        def make():
            param = Parameter("w", start.copy(), ParamSpace.stiefel((5, 2)))
            return param, RiemannianAdam([param], lr=0.02)

        def run(param, optimizer, steps):
            for grad in steps:
                optimizer.zero_grad()
                param.accumulate(grad)
                optimizer.step()

        reference, reference_opt = make()
        run(reference, reference_opt, grads)

        first, first_opt = make()
        run(first, first_opt, grads[:3])
        state = first_opt.state_dict()
        resumed = Parameter("w", first.value.copy(), ParamSpace.stiefel((5, 2)))
        resumed_opt = RiemannianAdam([resumed], lr=0.02)
        resumed_opt.load_state_dict(state)
        assert resumed_opt.state.step == 3
        run(resumed, resumed_opt, grads[3:])

        np.testing.assert_array_equal(resumed.value, reference.value)

    def test_state_dict_layout(self, rng):
        optimizer = RiemannianAdam([stiefel_param(rng)], lr=0.01)
        state = optimizer.state_dict()
        assert set(state["tensors"]) == {"exp_avg/bimap.W", "exp_avg_sq/bimap.W"}
        assert state["hyperparameters"]["lr"] == 0.01
        assert state["step"] == 0

    def test_load_state_dict_rejects_wrong_shape(self, rng):
        optimizer = RiemannianAdam([stiefel_param(rng)])
        state = optimizer.state_dict()
        state["tensors"]["exp_avg/bimap.W"] = np.zeros((3, 3))
        with pytest.raises(InvalidInputError):
            optimizer.load_state_dict(state)
