import numpy as np
import pytest
import torch

from vlfas.config import ModelConfig
from vlfas.data.synthetic import make_synthetic_registry
from vlfas.models import DualEncoder, MlpHead, ProjectorH
from vlfas.prompts import PromptSet
from vlfas.tokenizer import BpeTokenizer


@pytest.fixture(scope="session")
def toy_cfg():
    return ModelConfig.toy()


@pytest.fixture(scope="session")
def toy_cfg64():
    return ModelConfig.toy(dtype="float64")


@pytest.fixture(scope="session")
def tokenizer():
    return BpeTokenizer()


@pytest.fixture
def toy_model(toy_cfg):
    torch.manual_seed(7)
    return DualEncoder(toy_cfg)


@pytest.fixture
def toy_head(toy_cfg):
    torch.manual_seed(8)
    return MlpHead(toy_cfg.vision_width, toy_cfg.head_hidden)


@pytest.fixture
def toy_projector(toy_cfg):
    torch.manual_seed(9)
    return ProjectorH(toy_cfg.embed_dim, toy_cfg.projector_dims)


@pytest.fixture(scope="session")
def prompt_set():
    return PromptSet.default()


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """Synthetic stand-ins for every domain any protocol needs, at toy scale."""
    root = tmp_path_factory.mktemp("domains")
    make_synthetic_registry(
        str(root),
        domains=("M", "C", "I", "O", "W", "S", "CelebA-Spoof"),
        n_per_class=40,
        image_size=32,
        seed=123,
    )
    return str(root)


@pytest.fixture(scope="session")
def synth_registry(synth_root):
    from vlfas.data.datasets import load_registry

    return load_registry(synth_root)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
