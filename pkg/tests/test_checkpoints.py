import numpy as np
import pytest
import torch

from vlfas.checkpoints import (
    Checkpoint,
    CheckpointError,
    expected_pretrained_shapes,
    load_checkpoint,
    load_pretrained,
    make_manifest,
    pretrained_key_map,
    save_checkpoint,
)
from vlfas.config import ModelConfig
from vlfas.models import DualEncoder


def _published_layout_state(model: DualEncoder) -> dict[str, torch.Tensor]:
    """Render a model's parameters under the published tensor names."""
    inverse = {ours: theirs for theirs, ours in pretrained_key_map(model.cfg).items()}
    return {inverse[name]: tensor.clone() for name, tensor in model.state_dict().items()}


def test_expected_vit_b16_layout():
    cfg = ModelConfig.vit_b16()
    shapes = expected_pretrained_shapes(cfg)
    # 12 tensors per block, 12 blocks per tower, plus tower heads and scale
    assert len(shapes) == 302
    assert shapes["visual.conv1.weight"] == (768, 3, 16, 16)
    assert shapes["visual.class_embedding"] == (768,)
    assert shapes["visual.positional_embedding"] == (197, 768)
    assert shapes["visual.proj"] == (768, 512)
    assert shapes["visual.transformer.resblocks.0.attn.in_proj_weight"] == (2304, 768)
    assert shapes["visual.transformer.resblocks.11.mlp.c_fc.weight"] == (3072, 768)
    assert shapes["token_embedding.weight"] == (49408, 512)
    assert shapes["positional_embedding"] == (77, 512)
    assert shapes["transformer.resblocks.0.attn.in_proj_weight"] == (1536, 512)
    assert shapes["transformer.resblocks.11.mlp.c_proj.weight"] == (512, 2048)
    assert shapes["text_projection"] == (512, 512)
    assert shapes["logit_scale"] == ()


def test_load_pretrained_round_trip(toy_cfg, tmp_path):
    torch.manual_seed(11)
    source = DualEncoder(toy_cfg)
    path = tmp_path / "pretrained.pt"
    torch.save(_published_layout_state(source), path)

    loaded = load_pretrained(str(path), toy_cfg)
    source.eval(), loaded.eval()
    images = torch.randn(2, 3, 32, 32)
    with torch.no_grad():
        _, emb_src = source.encode_images(images)
        _, emb_new = loaded.encode_images(images)
    assert torch.equal(emb_src, emb_new)


def test_load_pretrained_ignores_meta_keys(toy_cfg, tmp_path):
    torch.manual_seed(12)
    state = _published_layout_state(DualEncoder(toy_cfg))
    state["input_resolution"] = torch.tensor(32)
    state["context_length"] = torch.tensor(77)
    state["vocab_size"] = torch.tensor(514)
    path = tmp_path / "with_meta.pt"
    torch.save(state, path)
    load_pretrained(str(path), toy_cfg)


def test_load_pretrained_missing_and_extra_keys(toy_cfg, tmp_path):
    torch.manual_seed(13)
    state = _published_layout_state(DualEncoder(toy_cfg))
    del state["visual.proj"]
    state["visual.unknown_tensor"] = torch.zeros(3)
    path = tmp_path / "broken.pt"
    torch.save(state, path)
    with pytest.raises(CheckpointError) as err:
        load_pretrained(str(path), toy_cfg)
    assert "visual.proj" in str(err.value)
    assert "visual.unknown_tensor" in str(err.value)


def test_load_pretrained_shape_mismatch(toy_cfg, tmp_path):
    torch.manual_seed(14)
    state = _published_layout_state(DualEncoder(toy_cfg))
    state["text_projection"] = torch.zeros(8, 8)
    path = tmp_path / "badshape.pt"
    torch.save(state, path)
    with pytest.raises(CheckpointError, match="text_projection"):
        load_pretrained(str(path), toy_cfg)


def test_load_pretrained_truncated_file(tmp_path, toy_cfg):
    path = tmp_path / "truncated.pt"
    torch.save(_published_layout_state(DualEncoder(toy_cfg)), path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointError, match="truncated.pt"):
        load_pretrained(str(path), toy_cfg)


def test_load_pretrained_missing_file(toy_cfg, tmp_path):
    with pytest.raises(CheckpointError, match="not found"):
        load_pretrained(str(tmp_path / "nope.pt"), toy_cfg)


def test_finetuned_checkpoint_round_trip(toy_cfg, tmp_path):
    torch.manual_seed(15)
    model = DualEncoder(toy_cfg)
    manifest = make_manifest(
        strategy="IT", iteration=42, seed=5, config_hash="abc123",
        model_config=toy_cfg,
    )
    ckpt = Checkpoint(manifest=manifest, model_state=model.state_dict())
    path = tmp_path / "finetuned.pt"
    save_checkpoint(ckpt, str(path))

    restored = load_checkpoint(str(path))
    assert restored.strategy == "IT"
    assert restored.iteration == 42
    assert restored.manifest["seed"] == 5
    assert restored.manifest["config_hash"] == "abc123"
    assert restored.manifest["version"]

    rebuilt = restored.build_model()
    model.eval(), rebuilt.eval()
    images = torch.from_numpy(
        np.random.default_rng(1).normal(size=(2, 3, 32, 32)).astype(np.float32)
    )
    with torch.no_grad():
        _, a = model.encode_images(images)
        _, b = rebuilt.encode_images(images)
    assert torch.equal(a, b)


def test_finetuned_checkpoint_wrong_format(tmp_path):
    path = tmp_path / "junk.pt"
    torch.save({"something": 1}, path)
    with pytest.raises(CheckpointError, match="archive"):
        load_checkpoint(str(path))
