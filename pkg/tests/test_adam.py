"""Adam optimizer behavior: descent, convergence, moment persistence."""

import numpy as np
import pytest

import nirrec.autodiff as ad
from nirrec.autodiff import Adam, zero_grads
from nirrec.errors import ConfigurationError


class TestAdam:
    """Scalar-objective checks against the optimizer's contract."""

    def test_zero_gradient_leaves_parameter_unchanged(self):
        """A zero grad must not move the parameter (bias correction included)."""
        w = ad.Tensor([1.5, -2.0], requires_grad=True)
        w.zero_grad()
        Adam(lr=0.1).step({"w": w})
        np.testing.assert_array_equal(w.data, [1.5, -2.0])

    def test_single_step_descends_on_square(self):
        """One step on f(w) = w² at w = 1 decreases w."""
        w = ad.Tensor(1.0, requires_grad=True)
        with ad.Tape() as tape:
            tape.backward(ad.mul(w, w))
        Adam(lr=0.1).step({"w": w})
        assert w.data < 1.0

    def test_converges_on_shifted_quadratic(self):
        """500 steps on f(w) = (w−3)² reach |w−3| < 1e-3."""
        w = ad.Tensor(0.0, requires_grad=True)
        opt = Adam(lr=0.05)
        for _ in range(500):
            w.zero_grad()
            with ad.Tape() as tape:
                diff = ad.sub(w, 3.0)
                tape.backward(ad.mul(diff, diff))
            opt.step({"w": w})
        assert abs(w.item() - 3.0) < 1e-3

    def test_missing_gradient_names_parameter(self):
        """Stepping with an unpopulated grad raises and names the tensor."""
        w = ad.Tensor(1.0, requires_grad=True)
        with pytest.raises(ConfigurationError) as exc:
            Adam().step({"theta.w": w})
        assert "theta.w" in str(exc.value)

    def test_moments_persist_across_steps(self):
        """The same constant gradient accelerates later steps (momentum)."""
        w = ad.Tensor(0.0, requires_grad=True)
        opt = Adam(lr=0.1)
        deltas = []
        for _ in range(3):
            w.grad = np.asarray(1.0)
            before = float(w.data)
            opt.step({"w": w})
            deltas.append(before - float(w.data))
        assert all(d > 0 for d in deltas)
        assert opt._t == 3

    def test_zero_grads_helper(self):
        """zero_grads fills every named parameter with a zero buffer."""
        params = {
            "a": ad.Tensor(np.ones(3), requires_grad=True),
            "b": ad.Tensor(np.ones((2, 2)), requires_grad=True),
        }
        zero_grads(params)
        for p in params.values():
            np.testing.assert_array_equal(p.grad, np.zeros_like(p.data))

    def test_invalid_hyperparameters_rejected(self):
        """Non-positive lr and out-of-range betas are configuration errors."""
        with pytest.raises(ConfigurationError):
            Adam(lr=0.0)
        with pytest.raises(ConfigurationError):
            Adam(beta1=1.0)
