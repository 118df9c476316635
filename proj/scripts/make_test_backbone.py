"""Builds the small ONNX backbone used by the feature-extraction tests.

The network maps a 1x3x224x224 input to a 1x2048x7x7 feature map (100,352
values), matching the flattened output of a ResNet-50 with its pooling and
classification head removed. It is a 32x32 average pool followed by a 1x1
convolution whose weights follow a closed form, so tests can recompute the
expected activations without running the model.
"""
import sys

import torch


class TinyBackbone(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.pool = torch.nn.AvgPool2d(32)
        self.proj = torch.nn.Conv2d(3, 2048, 1)
        with torch.no_grad():
            for o in range(2048):
                for c in range(3):
                    self.proj.weight[o, c, 0, 0] = ((o * 3 + c) % 7 - 3) / 10.0
                self.proj.bias[o] = (o % 5 - 2) / 100.0

    def forward(self, x):
        return self.proj(self.pool(x))


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/data/tiny_backbone.onnx"
    model = TinyBackbone().eval()
    torch.onnx.export(model, torch.zeros(1, 3, 224, 224), out,
                      input_names=["input"], output_names=["features"],
                      opset_version=11, dynamo=False)
