"""Reference forward passes and tensor dumps for inference parity tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

OUTPUT_NAMES = ("conv_final", "pooled", "logits")


def reference_forward(model: nn.Module, image: np.ndarray) -> dict[str, np.ndarray]:
    """Run torch on one [0, 1] HWC image, returning the named output tensors.

    Applies the same ImageNet normalization that the exporter bakes into
    the graph, so the graph consumer's plain [0, 1] input contract holds.
    """
    from .exporters import IMAGENET_MEAN, IMAGENET_STD

    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an HWC RGB image, got {image.shape}")
    x = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))[None]).float()
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    x = (x - mean) / std

    model.eval()
    with torch.no_grad():
        if hasattr(model, "layer4"):  # resnet-style
            feat = model.conv1(x)
            feat = model.bn1(feat)
            feat = model.relu(feat)
            feat = model.maxpool(feat)
            for stage in (model.layer1, model.layer2, model.layer3, model.layer4):
                feat = stage(feat)
            conv_final = feat
            pooled = torch.flatten(model.avgpool(feat), 1)
            logits = model.fc(pooled)
        else:  # vgg-style
            conv_final = model.features(x)
            pooled = conv_final.mean(dim=(2, 3))
            flat = torch.flatten(model.avgpool(conv_final), 1)
            logits = model.classifier(flat)
    return {
        "conv_final": conv_final[0].numpy().astype(np.float32),
        "pooled": pooled[0].numpy().astype(np.float32),
        "logits": logits[0].numpy().astype(np.float32),
    }


def emit_reference_outputs(model: nn.Module, images: dict[str, np.ndarray],
                           out_dir: str | Path, prefix: str) -> list[Path]:
    """Write one f32 ``.npy`` per (image, output); returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for image_name, image in images.items():
        outputs = reference_forward(model, image)
        for out_name in OUTPUT_NAMES:
            path = out_dir / f"{prefix}_{image_name}_{out_name}.npy"
            np.save(path, outputs[out_name])
            written.append(path)
    return written
