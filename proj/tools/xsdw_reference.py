# Copyright 2026 The spiralrt Authors
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

"""Independent numpy reader and forward pass for XSDW weight files.

Interprets the manifest layer list directly. Used to produce parity
fixtures for the C++ engine:

    python3 tools/xsdw_reference.py scale in.xsdw out.xsdw name=factor ...
    python3 tools/xsdw_reference.py expect tests/data/tiny.xsdw tests/data/tiny_expected.json
"""

import json
import struct
import sys
import zlib

import numpy as np


def read_xsdw(path, keep_manifest=False):
    blob = open(path, "rb").read()
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ValueError("checksum mismatch")
    if body[:4] != b"XSDW":
        raise ValueError("bad magic")
    version, count = struct.unpack_from("<II", body, 4)
    if version != 1:
        raise ValueError("version %d" % version)
    pos, tensors = 12, {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + n].decode("utf-8")
        pos += n
        ndim = body[pos]
        pos += 1
        dims = struct.unpack_from("<%dI" % ndim, body, pos)
        pos += 4 * ndim
        size = int(np.prod(dims)) if ndim else 1
        tensors[name] = np.frombuffer(body, "<f4", size, pos).reshape(dims).astype(np.float64)
        pos += 4 * size
    if pos != len(body):
        raise ValueError("trailing bytes")
    if keep_manifest:
        return tensors
    manifest = json.loads(bytes(tensors.pop("__manifest__").astype(np.uint8)).decode("utf-8"))
    return manifest, tensors


def write_xsdw(path, tensors):
    out = bytearray(b"XSDW") + struct.pack("<II", 1, len(tensors))
    for name, t in tensors.items():
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw + struct.pack("<B", t.ndim)
        out += struct.pack("<%dI" % t.ndim, *t.shape)
        out += t.astype("<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(out)


def conv2d(x, w, b, stride, pad):
    c, h, wd = x.shape
    o, i, k, _ = w.shape
    xp = np.zeros((c, h + 2 * pad, wd + 2 * pad))
    xp[:, pad:pad + h, pad:pad + wd] = x
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    y = np.zeros((o, oh, ow)) + b[:, None, None]
    for ky in range(k):
        for kx in range(k):
            patch = xp[:, ky:ky + stride * (oh - 1) + 1:stride, kx:kx + stride * (ow - 1) + 1:stride]
            y += np.einsum("oi,ihw->ohw", w[:, :, ky, kx], patch)
    return y


def softmax(x):
    e = np.exp(x - x.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def run(net, env, p):
    for layer in net["layers"]:
        t, name = layer["type"], layer["name"]
        a = [env[s] for s in layer["inputs"]]
        if t == "conv2d":
            y = conv2d(a[0], p[name + ".weight"], p[name + ".bias"], layer["stride"], layer["pad"])
        elif t == "batchnorm":
            g, be, mu, var = (p[name + s] for s in (".gamma", ".beta", ".mean", ".var"))
            y = (a[0] - mu[:, None, None]) / np.sqrt(var[:, None, None] + np.float32(layer["eps"]))
            y = y * g[:, None, None] + be[:, None, None]
        elif t == "leaky_relu":
            y = np.where(a[0] > 0, a[0], np.float32(layer["slope"]) * a[0])
        elif t == "maxpool2":
            c, h, w = a[0].shape
            y = a[0][:, :h // 2 * 2, :w // 2 * 2].reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))
        elif t == "upsample2":
            y = a[0].repeat(2, axis=1).repeat(2, axis=2)
        elif t == "concat":
            y = np.concatenate(a, axis=0)
        elif t == "softmax":
            y = softmax(a[0])
        elif t == "threshold":
            y = (a[0] > np.float32(layer["value"])).astype(np.float64)
        elif t == "global_avgpool":
            y = a[0].mean(axis=(1, 2))[:, None, None]
        elif t == "dense":
            y = (p[name + ".weight"] @ a[0].reshape(-1) + p[name + ".bias"])[:, None, None]
        elif t == "film":
            y = a[1] * a[0] + a[2]
        else:
            raise ValueError("unknown layer type " + t)
        env[name] = y
    return env[net["output"]]


def padded(x, m):
    c, h, w = x.shape
    out = np.zeros((c, -(-h // m) * m, -(-w // m) * m))
    out[:, :h, :w] = x
    return out


def infer(manifest, p, image):
    nets = {n["name"]: n for n in manifest["subnets"]}
    hyper = manifest["hyper"]
    h, w = image.shape
    x = image[None].astype(np.float64)
    factors = run(nets["anatomy"], {"interim": padded(x, 2 ** hyper["depth"])}, p)[:, :h, :w]
    probs = run(nets["segmentor"], {"anatomy.factors": factors}, p)
    z = run(nets["modality"], {"interim": x, "anatomy.factors": factors}, p)
    film = run(nets["decoder"], {"anatomy.factors": factors, "modality.mu": z}, p)
    m = 2 ** hyper["fusion_depth"]
    rec = run(nets["fusion"], {"decoder.out": padded(film, m), "interim": padded(x, m)}, p)[:, :h, :w]
    return factors, probs, z.reshape(-1), film, rec


def test_image(h, w):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    r = np.hypot(yy - 0.45 * h, xx - 0.55 * w) / (0.3 * min(h, w))
    return (np.where(r < 1.0, 1.0, 0.25) + 0.1 * np.sin(0.7 * xx) * np.cos(0.4 * yy)).astype(np.float32)


def scale(argv):
    tensors = read_xsdw(argv[0], keep_manifest=True)
    for spec in argv[2:]:
        name, factor = spec.split("=")
        tensors[name] = tensors[name] * float(factor)
    write_xsdw(argv[1], tensors)


def expect(argv):
    manifest, params = read_xsdw(argv[0])
    image = test_image(21, 19)
    factors, probs, z, film, rec = infer(manifest, params, image.astype(np.float64))
    out = {
        "height": 21,
        "width": 19,
        "image": image.reshape(-1).tolist(),
        "factors": factors.reshape(-1).tolist(),
        "probabilities": probs.reshape(-1).tolist(),
        "mask": probs.argmax(axis=0).reshape(-1).tolist(),
        "z": z.tolist(),
        "film_output": film.reshape(-1).tolist(),
        "reconstruction": rec.reshape(-1).tolist(),
    }
    with open(argv[1], "w") as f:
        json.dump(out, f)
        f.write("\n")


def main(argv):
    if len(argv) >= 4 and argv[1] == "scale":
        scale(argv[2:])
    elif len(argv) == 4 and argv[1] == "expect":
        expect(argv[2:])
    else:
        print(__doc__)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
