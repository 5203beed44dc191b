"""Network architectures: ResNet translator, patch discriminator, feature
projection heads, and the stride-8 scene-coordinate regressor.

Two named presets exist everywhere: "paper" mirrors the full-scale
configuration (9 residual blocks, ResNet18-style regression encoder) and
"toy" shrinks widths and depths for desk-scale runs; the loss math is
identical at both scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


def _conv_in_relu(cin: int, cout: int, kernel: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel, stride=stride, padding=kernel // 2,
                  padding_mode="reflect"),
        nn.InstanceNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1, padding_mode="reflect"),
            nn.InstanceNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=1, padding_mode="reflect"),
            nn.InstanceNorm2d(channels),
        )

    def forward(self, x):
        return x + self.body(x)


class MappingNetwork(nn.Module):
    """Image-to-image translator: downsampling encoder, residual blocks,
    upsampling decoder. Input and output are (B, 3, H, W) in [-1, 1]; H and W
    must be multiples of 4 so the two stride-2 stages invert exactly.

    encoder_features(x) exposes the five contrastive-feature depths: the
    RGB input, both downsampling convolutions, and the first and last
    residual blocks (receptive fields strictly increase along the list).
    """

    def __init__(self, base_width: int = 64, n_residual_blocks: int = 9,
                 global_residual: bool = False):
        super().__init__()
        w = base_width
        self.global_residual = global_residual
        self.stem = _conv_in_relu(3, w, 7, 1)
        self.down1 = _conv_in_relu(w, 2 * w, 3, 2)
        self.down2 = _conv_in_relu(2 * w, 4 * w, 3, 2)
        self.blocks = nn.ModuleList(ResidualBlock(4 * w)
                                    for _ in range(n_residual_blocks))
        final = nn.Conv2d(w, 3, 7, padding=3, padding_mode="reflect")
        if global_residual:
            # start exactly at the identity: tanh(0) = 0 everywhere
            nn.init.zeros_(final.weight)
            nn.init.zeros_(final.bias)
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            _conv_in_relu(4 * w, 2 * w, 3, 1),
            nn.Upsample(scale_factor=2, mode="nearest"),
            _conv_in_relu(2 * w, w, 3, 1),
            final,
            nn.Tanh(),
        )
        # channel count per encoder_features entry
        self.feature_channels = (3, 2 * w, 4 * w, 4 * w, 4 * w)

    @staticmethod
    def preset(name: str) -> "MappingNetwork":
        if name == "paper":
            return MappingNetwork(base_width=64, n_residual_blocks=9)
        if name == "toy":
            # the instance-normalized translator cannot hold absolute color
            # calibration at this scale, so the toy preset predicts a bounded
            # correction on top of its input instead of repainting it
            return MappingNetwork(base_width=16, n_residual_blocks=2,
                                  global_residual=True)
        raise ValueError(f"unknown preset {name!r}")

    def encoder_features(self, x) -> list[torch.Tensor]:
        feats = [x]
        h = self.stem(x)
        h = self.down1(h)
        feats.append(h)
        h = self.down2(h)
        feats.append(h)
        for i, block in enumerate(self.blocks):
            h = block(h)
            if i == 0:
                feats.append(h)
        feats.append(h)  # last residual block
        return feats

    def forward(self, x):
        h = self.down2(self.down1(self.stem(x)))
        for block in self.blocks:
            h = block(h)
        out = self.decoder(h)
        if self.global_residual:
            return (x + out).clamp(-1.0, 1.0)
        return out


class PatchDiscriminator(nn.Module):
    """Patch-level real/fake classifier emitting a probability map in (0, 1)."""

    def __init__(self, base_width: int = 64, n_layers: int = 3):
        super().__init__()
        w = base_width
        layers = [nn.Conv2d(3, w, 4, stride=2, padding=1),
                  nn.LeakyReLU(0.2, inplace=True)]
        cin = w
        for i in range(1, n_layers):
            cout = min(w * 2 ** i, 8 * w)
            layers += [nn.Conv2d(cin, cout, 4, stride=2, padding=1),
                       nn.InstanceNorm2d(cout),
                       nn.LeakyReLU(0.2, inplace=True)]
            cin = cout
        layers += [nn.Conv2d(cin, 1, 4, stride=1, padding=1), nn.Sigmoid()]
        self.body = nn.Sequential(*layers)

    @staticmethod
    def preset(name: str) -> "PatchDiscriminator":
        if name == "paper":
            return PatchDiscriminator(base_width=64, n_layers=3)
        if name == "toy":
            return PatchDiscriminator(base_width=16, n_layers=2)
        raise ValueError(f"unknown preset {name!r}")

    def forward(self, x):
        return self.body(x)


class FeatureProjector(nn.Module):
    """Two-layer MLP mapping sampled features to unit-norm 256-d embeddings."""

    def __init__(self, in_dim: int, out_dim: int = 256):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(in_dim, out_dim), nn.ReLU(inplace=True),
                                 nn.Linear(out_dim, out_dim))

    def forward(self, x):
        return F.normalize(self.net(x), dim=-1)


def make_projectors(generator: MappingNetwork, num_layers: int = 5,
                    out_dim: int = 256) -> nn.ModuleList:
    """One projection head per sampled encoder depth."""
    dims = generator.feature_channels[:num_layers]
    return nn.ModuleList(FeatureProjector(d, out_dim) for d in dims)


class _BasicBlock(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.skip = None
        if stride != 1 or cin != cout:
            self.skip = nn.Sequential(nn.Conv2d(cin, cout, 1, stride=stride,
                                                bias=False),
                                      nn.BatchNorm2d(cout))

    def forward(self, x):
        identity = x if self.skip is None else self.skip(x)
        h = F.relu(self.bn1(self.conv1(x)), inplace=True)
        h = self.bn2(self.conv2(h))
        return F.relu(h + identity, inplace=True)


class SCRNetwork(nn.Module):
    """Fully convolutional scene-coordinate regressor with output stride 8.

    The encoder is a residual stack whose first three stages stride by 2
    (later stages keep stride 1, mirroring a ResNet18 with its last two
    stride-2 convolutions flattened); the head is 3 convolutions emitting
    (X, Y, Z) meters. Input sides must be multiples of 8; output spatial
    size is exactly input / 8.
    """

    def __init__(self, widths: tuple[int, ...] = (64, 64, 128, 256, 256),
                 blocks_per_stage: int = 2, head_width: int = 128):
        super().__init__()
        # fixed affine applied to the raw head output; set from label
        # statistics before training so predictions start near the scene
        self.register_buffer("out_center", torch.zeros(3))
        self.register_buffer("out_scale", torch.ones(3))
        self.stem = nn.Sequential(
            nn.Conv2d(3, widths[0], 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(widths[0]),
            nn.ReLU(inplace=True),
        )
        stages = []
        cin = widths[0]
        for i, cout in enumerate(widths[1:]):
            stride = 2 if i < 2 else 1  # total stride 2 * 2 * 2 = 8
            stage = [_BasicBlock(cin, cout, stride)]
            stage += [_BasicBlock(cout, cout, 1)
                      for _ in range(blocks_per_stage - 1)]
            stages.append(nn.Sequential(*stage))
            cin = cout
        self.stages = nn.Sequential(*stages)
        self.head = nn.Sequential(
            nn.Conv2d(cin, head_width, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(head_width, head_width, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(head_width, 3, 1),
        )

    @staticmethod
    def preset(name: str) -> "SCRNetwork":
        if name == "paper":
            return SCRNetwork(widths=(64, 64, 128, 256, 512),
                              blocks_per_stage=2, head_width=256)
        if name == "toy":
            return SCRNetwork(widths=(32, 48, 64, 96), blocks_per_stage=1,
                              head_width=96)
        raise ValueError(f"unknown preset {name!r}")

    def set_output_transform(self, center, scale) -> None:
        """Anchor raw outputs to the scene: prediction = raw * scale + center."""
        self.out_center.copy_(torch.as_tensor(center, dtype=torch.float32))
        self.out_scale.copy_(torch.as_tensor(scale, dtype=torch.float32))

    def forward(self, x):
        if x.shape[-1] % 8 or x.shape[-2] % 8:
            raise ValueError("input sides must be multiples of 8")
        raw = self.head(self.stages(self.stem(x)))
        return raw * self.out_scale.view(1, 3, 1, 1) + self.out_center.view(1, 3, 1, 1)
