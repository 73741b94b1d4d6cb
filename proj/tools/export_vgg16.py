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
"""Exports torchvision VGG-16 convolution weights to a DSTN tensor archive.

The archive holds conv{block}_{index}.weight / .bias for every layer up to the
chosen relu tap, plus ImageNet normalization statistics in its metadata.

  export_vgg16.py --out vgg16_relu2_2.dstn                  # downloads weights
  export_vgg16.py --state-dict vgg16.pth --out vgg.dstn     # offline copy
  export_vgg16.py --random-init --seed 0 --out vgg.dstn     # parity tests only
"""
import argparse
import json
import os
import re
import struct
import sys
import tempfile
import zlib

import numpy as np

MAGIC = b"DSTNTARC"
VERSION = 1
MEAN = [0.485, 0.456, 0.406]
STD = [0.229, 0.224, 0.225]

# Index of each conv inside torchvision's vgg16().features.
FEATURE_INDEX = {
    "conv1_1": 0, "conv1_2": 2,
    "conv2_1": 5, "conv2_2": 7,
    "conv3_1": 10, "conv3_2": 12, "conv3_3": 14,
    "conv4_1": 17, "conv4_2": 19, "conv4_3": 21,
    "conv5_1": 24, "conv5_2": 26, "conv5_3": 28,
}


def convs_through(tap):
    m = re.fullmatch(r"relu(\d)_(\d)", tap)
    if not m:
        raise SystemExit(f"tap must look like relu2_2, got {tap!r}")
    block, index = int(m.group(1)), int(m.group(2))
    if f"conv{block}_{index}" not in FEATURE_INDEX:
        raise SystemExit(f"VGG-16 has no layer {tap}")
    names = []
    for b in range(1, block + 1):
        last = index if b == block else (2 if b <= 2 else 3)
        names += [f"conv{b}_{i}" for i in range(1, last + 1)]
    return names


def pack_str(s):
    data = s.encode()
    return struct.pack("<Q", len(data)) + data


def pack_tensor(a):
    a = np.ascontiguousarray(a, dtype="<f4")
    out = struct.pack("<I", a.ndim)
    out += b"".join(struct.pack("<q", d) for d in a.shape)
    return out + a.tobytes()


def write_archive(path, tensors, metadata):
    payload = pack_str(json.dumps(metadata, sort_keys=True))
    payload += struct.pack("<Q", len(tensors))
    for name in sorted(tensors):
        payload += pack_str(name) + pack_tensor(tensors[name])
    crc = f"{zlib.crc32(payload) & 0xFFFFFFFF:08x}".encode()
    blob = MAGIC + struct.pack("<IQ", VERSION, len(payload)) + crc + payload
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".export_")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_features(args):
    import torch
    import torchvision

    if args.random_init:
        torch.manual_seed(args.seed)
        model = torchvision.models.vgg16(weights=None)
    elif args.state_dict:
        model = torchvision.models.vgg16(weights=None)
        model.load_state_dict(torch.load(args.state_dict, map_location="cpu"))
    else:
        model = torchvision.models.vgg16(weights="IMAGENET1K_V1")
    return model.features.eval()


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", required=True)
    p.add_argument("--tap", default="relu2_2")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--state-dict", help="torchvision vgg16 state_dict (.pth)")
    src.add_argument("--random-init", action="store_true",
                     help="seeded random weights; for parity tests, not training")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    features = load_features(args)
    tensors = {}
    for name in convs_through(args.tap):
        conv = features[FEATURE_INDEX[name]]
        tensors[name + ".weight"] = conv.weight.detach().numpy()
        tensors[name + ".bias"] = conv.bias.detach().numpy()
    metadata = {
        "backbone": "vgg16",
        "tap": args.tap,
        "standin": bool(args.random_init),
        "source": "torchvision",
        "mean": MEAN,
        "std": STD,
    }
    write_archive(args.out, tensors, metadata)
    print(f"wrote {len(tensors)} tensors to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
