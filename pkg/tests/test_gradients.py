import numpy as np
import pytest
import torch

from gradcheck import finite_difference_check
from toylosses import ToyLossSetup


@pytest.fixture(scope="module")
def setup():
    return ToyLossSetup(seed=5)


@pytest.mark.parametrize("loss_name", ["l_ce", "l_simclr", "l_mse", "l_mcl"])
def test_loss_gradients_match_finite_differences(setup, loss_name):
    loss_fn, params = setup.all_losses()[loss_name]
    result = finite_difference_check(
        loss_fn, params,
        rng=np.random.default_rng(hash(loss_name) % 2**32),
        fraction=1.0, max_coords=80,
    )
    assert result.ok_fraction >= 0.99, (
        f"{loss_name}: only {result.ok_fraction:.2%} of {result.n_checked} "
        f"coordinates within tolerance (worst {result.worst_rel_error:.2e})"
    )


def test_temperature_receives_gradient(setup):
    model = setup.bundle.model
    model.logit_scale.grad = None
    loss = setup.loss_ce()
    loss.backward()
    assert model.logit_scale.grad is not None
    assert float(model.logit_scale.grad.abs()) > 0


def test_losses_are_finite_and_positive(setup):
    with torch.no_grad():
        assert float(setup.loss_ce()) > 0
        assert float(setup.loss_simclr()) > 0
        assert float(setup.loss_mse()) >= 0
        assert np.isfinite(float(setup.loss_mcl()))
