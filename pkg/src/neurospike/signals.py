"""Seeded piecewise-linear disturbance and measurement-noise signals.

Knot values are i.i.d. uniform on ``[-amplitude, amplitude)`` placed every
``grid_step`` seconds, with linear interpolation in between. The knot
stream comes from numpy's PCG64 seeded with ``SeedSequence(seed,
spawn_key=(stream,))``, so several independent signals can share one
seed; doubles use the generator's 53-bit mantissa mapping. Knots are
drawn lazily and cached, which keeps the stream independent of the
horizon.
"""
from __future__ import annotations

import csv
import math
import threading
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, PreconditionError

SIGNAL_TYPE = "piecewise_linear_uniform"
_CHUNK = 1024


class PiecewiseLinearSignal:
    def __init__(self, grid_step: float = 0.01, amplitude: float = 0.1, seed: int = 0, stream: int = 0):
        if not (grid_step > 0 and math.isfinite(grid_step)):
            raise ConfigurationError(f"grid_step must be positive, got {grid_step}")
        if not (amplitude >= 0 and math.isfinite(amplitude)):
            raise ConfigurationError(f"amplitude must be non-negative, got {amplitude}")
        if int(seed) != seed or not 0 <= seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.grid_step = float(grid_step)
        self.amplitude = float(amplitude)
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._rng = np.random.Generator(np.random.PCG64(ss))
        self._values = np.empty(0)
        self._lock = threading.Lock()

    def __repr__(self):
        return (f"PiecewiseLinearSignal(grid_step={self.grid_step}, amplitude={self.amplitude}, "
                f"seed={self.seed}, stream={self.stream})")

    def _ensure(self, n: int) -> None:
        if n <= len(self._values):
            return
        with self._lock:
            have = len(self._values)
            if n <= have:
                return
            need = -(-(n - have) // _CHUNK) * _CHUNK
            u = self._rng.random(need)
            new = self.amplitude * (2.0 * u - 1.0)
            self._values = np.concatenate([self._values, new])

    def knot(self, k: int) -> float:
        if k < 0:
            raise PreconditionError("knot index must be non-negative")
        self._ensure(k + 1)
        return float(self._values[k])

    def knots(self, n: int) -> np.ndarray:
        """First ``n`` knot values (read-only copy)."""
        self._ensure(n)
        out = self._values[:n].copy()
        out.setflags(write=False)
        return out

    def knots_until(self, t_end: float) -> np.ndarray:
        """Enough knots to sample anywhere on ``[0, t_end]``."""
        return self.knots(int(math.floor(t_end / self.grid_step)) + 3)

    def sample(self, t: float) -> float:
        if t < 0:
            raise PreconditionError(f"signal sampled at negative time {t}")
        g = self.grid_step
        r = t / g
        k = math.floor(r + 0.5)
        if k * g == t:
            return self.knot(k)
        k = math.floor(r)
        theta = (t - k * g) / g
        # Mirrored in the compiled kernel's sampler.
        if theta < 0.0:
            theta = 0.0
        elif theta > 1.0:
            theta = 1.0
        self._ensure(k + 2)
        v = self._values
        return (1.0 - theta) * v[k] + theta * v[k + 1]

    __call__ = sample

    def to_dict(self) -> dict:
        return {"type": SIGNAL_TYPE, "grid_step": self.grid_step, "amplitude": self.amplitude,
                "seed": self.seed, "stream": self.stream}

    @classmethod
    def from_dict(cls, d: dict, default_stream: int = 0) -> "PiecewiseLinearSignal":
        if d.get("type", SIGNAL_TYPE) != SIGNAL_TYPE:
            raise ConfigurationError(f"unsupported signal type {d.get('type')!r}")
        unknown = set(d) - {"type", "grid_step", "amplitude", "seed", "stream"}
        if unknown:
            raise ConfigurationError(f"unknown signal fields: {sorted(unknown)}")
        try:
            return cls(grid_step=float(d.get("grid_step", 0.01)), amplitude=float(d.get("amplitude", 0.1)),
                       seed=d.get("seed", 0), stream=int(d.get("stream", default_stream)))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad signal block: {exc}") from exc

    def export_csv(self, path, t_end: float) -> Path:
        """Write ``t,value`` rows at knot resolution over ``[0, t_end]``."""
        path = Path(path)
        n = int(math.floor(t_end / self.grid_step)) + 1
        vals = self.knots(n)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for k in range(n):
                w.writerow([format(k * self.grid_step, ".17g"), format(vals[k], ".17g")])
        return path
