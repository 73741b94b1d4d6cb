#!/usr/bin/env python3
# Copyright 2026 The DSTN Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Checks the C++ VGG-16 prefix against torchvision on the same image.

Exports seeded torchvision weights with tools/export_vgg16.py, then compares
`dstn embed` against torchvision features pooled at the same tap.
"""
import json
import pathlib
import subprocess
import sys
import tempfile

import numpy as np


def main():
    dstn, root = sys.argv[1], pathlib.Path(sys.argv[2])
    try:
        import torch
        import torchvision  # noqa: F401
        from PIL import Image
    except ImportError as e:
        print(f"SKIP: {e}")
        return 77

    sys.path.insert(0, str(root / "tools"))
    import export_vgg16

    rng = np.random.default_rng(5)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        # Smooth image so resampling conventions cannot matter; size = input size.
        yy, xx = np.mgrid[0:32, 0:32]
        img = np.stack([128 + 100 * np.sin(xx / 5.0 + c) * np.cos(yy / 7.0) for c in range(3)], -1)
        img = np.clip(img + rng.normal(0, 3, img.shape), 0, 255).astype(np.uint8)
        Image.fromarray(img).save(tmp / "probe.png")

        worst = 0.0
        for tap in ["relu1_2", "relu2_2", "relu3_1"]:
            archive = tmp / f"{tap}.dstn"
            export_vgg16.main(["--out", str(archive), "--tap", tap, "--random-init", "--seed", "3"])
            got = json.loads(subprocess.check_output(
                [dstn, "embed", "--image", str(tmp / "probe.png"), "--extractor", str(archive),
                 "--layer", tap, "--size", "32", "--log-level", "warn"]))["features"]

            torch.manual_seed(3)
            features = torchvision.models.vgg16(weights=None).features.eval()
            stop = export_vgg16.FEATURE_INDEX["conv" + tap[4:]] + 2  # through the relu
            x = torch.from_numpy(img).permute(2, 0, 1).float().div(255.0).unsqueeze(0)
            mean = torch.tensor(export_vgg16.MEAN).view(1, 3, 1, 1)
            std = torch.tensor(export_vgg16.STD).view(1, 3, 1, 1)
            with torch.no_grad():
                want = features[:stop]((x - mean) / std).mean(dim=(2, 3))[0].numpy()

            got = np.asarray(got, dtype=np.float64)
            if got.shape != want.shape:
                print(f"FAIL {tap}: shape {got.shape} vs {want.shape}")
                return 1
            err = np.max(np.abs(got - want)) / max(1e-6, np.max(np.abs(want)))
            worst = max(worst, err)
            print(f"{tap}: {got.size} channels, max relative error {err:.2e}")
        if worst > 1e-4:
            print("FAIL: feature mismatch")
            return 1
    print("PASS")
    return 0


if __name__ == "__main__":
    sys.exit(main())
