#!/usr/bin/env python3
# Copyright 2026 The CMKT-SE Authors
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
"""Writes 20 clean/degraded WAV pairs and their pystoi scores.

Usage: make_stoi_reference.py OUT_DIR            (regenerate fixtures)
       make_stoi_reference.py --score CLEAN DEG  (print one score)
"""
import json
import os
import sys

import numpy as np
from pystoi import stoi
from scipy.io import wavfile
from scipy.signal import lfilter

FS = 16000


def speech_like(rng, seconds):
    n = int(seconds * FS)
    t = np.arange(n) / FS
    out = np.zeros(n)
    n_seg = rng.integers(3, 9)
    bounds = np.linspace(0, n, n_seg + 1).astype(int)
    for j, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        f0 = rng.uniform(90, 260)
        formant = rng.uniform(400, 3000)
        seg = np.zeros(b - a)
        k = 1
        while k * f0 < 7000:
            amp = np.exp(-((k * f0 - formant) / 500.0) ** 2) + 0.08 / k
            seg += amp * np.sin(2 * np.pi * k * f0 * t[a:b] + rng.uniform(0, 2 * np.pi))
            k += 1
        env = 0.6 + 0.4 * np.sin(2 * np.pi * 4 * t[a:b] + rng.uniform(0, 2 * np.pi))
        if 0 < j < n_seg - 1 and rng.uniform() < 0.25:
            env *= 0.0  # a pause, exercised by silent-frame removal
        out[a:b] = seg * env
    return 0.5 * out / np.max(np.abs(out))


def quantize(x):
    return np.clip(np.round(x * 32768), -32768, 32767).astype(np.int16)


def degrade(rng, clean, kind):
    noise = rng.standard_normal(len(clean))
    if kind % 2:
        noise = lfilter([1.0], [1.0, -0.85], noise)
    snr = rng.uniform(-10, 15)
    gain = np.sqrt(np.mean(clean ** 2) / np.mean(noise ** 2)) * 10 ** (-snr / 20)
    deg = clean + gain * noise
    if kind % 4 == 2:
        deg = lfilter([0.5, 0.5], [1.0], deg)  # mild low-pass, an enhancement-like change
    return 0.9 * deg / max(1.0, np.max(np.abs(deg)) / 0.9)


def read(path):
    rate, data = wavfile.read(path)
    return rate, data.astype(np.float64) / 32768.0


def main():
    if len(sys.argv) == 4 and sys.argv[1] == "--score":
        rate, x = read(sys.argv[2])
        _, y = read(sys.argv[3])
        print(repr(float(stoi(x, y, rate))))
        return
    out_dir = sys.argv[1]
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(20260)
    scores = {}
    for i in range(20):
        clean = speech_like(rng, rng.uniform(1.0, 1.6))
        deg = degrade(rng, clean, i)
        names = (f"pair{i:02d}_clean.wav", f"pair{i:02d}_deg.wav")
        wavfile.write(os.path.join(out_dir, names[0]), FS, quantize(clean))
        wavfile.write(os.path.join(out_dir, names[1]), FS, quantize(deg))
        _, xq = read(os.path.join(out_dir, names[0]))
        _, yq = read(os.path.join(out_dir, names[1]))
        scores[f"pair{i:02d}"] = float(stoi(xq, yq, FS))
    with open(os.path.join(out_dir, "reference.json"), "w") as f:
        json.dump(scores, f, indent=1, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
