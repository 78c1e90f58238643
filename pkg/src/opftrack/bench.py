"""Throughput benchmark of the ensemble step on each kernel backend."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .op_update import Ensemble
from .particle_filter import DEFAULT_PARTICLES
from .pose_math import Pose6DoF

TARGET_FPS = 100.0


@dataclass(frozen=True)
class BenchResult:
    backend: str
    frames: int
    objects: int
    particles: int
    seconds: float

    @property
    def fps(self) -> float:
        return self.frames / self.seconds


def _measurements(k_objects: int, frames: int, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(frames):
        frame = {}
        for i in range(k_objects):
            # every fourth frame object 0 is hidden so the occlusion path is exercised too
            if i == 0 and k % 4 == 3:
                frame[i] = None
                continue
            t = np.array([0.1 * i, 0.002 * k, 0.0]) + 0.001 * rng.standard_normal(3)
            frame[i] = Pose6DoF.from_parts(t, 0.01 * rng.standard_normal(3))
        out.append(frame)
    return out


def run_benchmark(backend: str, frames: int = 200, objects: int = 4,
                  particles: int = DEFAULT_PARTICLES, warmup: int = 5, seed: int = 0) -> BenchResult:
    """Time ``frames`` OPF ensemble steps; the warm-up frames are excluded."""
    meas = _measurements(objects, frames + warmup, seed)
    with kernels.use_backend(backend):
        ens = Ensemble({i: meas[0][i] or Pose6DoF(0.1 * i, 0, 0, 0, 0, 0) for i in range(objects)},
                       kind="opf", n_particles=particles, seed=seed)
        for k in range(warmup):
            ens.step_frame(k, meas[k])
        t0 = time.perf_counter()
        for k in range(warmup, warmup + frames):
            ens.step_frame(k, meas[k])
        dt = time.perf_counter() - t0
    return BenchResult(backend, frames, objects, particles, dt)


def compare_backends(frames: int = 200, objects: int = 4,
                     particles: int = DEFAULT_PARTICLES) -> list[BenchResult]:
    return [run_benchmark(b, frames, objects, particles) for b in kernels.available_backends()]
