"""Fast-fit versus exhaustive-oracle audit, and the fit-time scaling benchmark."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .codec import EncoderConfig, decompose
from .geometry import line_ids, orientations
from .pixel_grid import synth_ridge
from .psml import fit_patch_exhaustive, fit_patch_fast

KINDS = ("noise", "ridge", "mixed", "constant", "separable")


def random_patch(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "noise":
        return rng.integers(0, 256, (size, size))
    if kind == "constant":
        return np.full((size, size), int(rng.integers(0, 256)))
    if kind in ("ridge", "mixed"):
        img = synth_ridge(size, size, float(rng.uniform(2.5, 8.0)), float(rng.uniform(0, math.pi)),
                          float(rng.uniform(60, 255)), int(rng.integers(1 << 30)),
                          noise=20.0 if kind == "mixed" else 0.0)
        return img.samples.astype(np.int64)
    if kind == "separable":
        o = int(rng.integers(len(orientations(size, size))))
        ids, p = line_ids(size, size, o)
        bits = rng.integers(0, 2, p)
        lo, hi = sorted(rng.choice(256, 2, replace=False))
        return np.where(bits[ids], lo, hi).reshape(size, size)
    raise ValueError(f"unknown patch kind {kind!r}")


@dataclass
class AuditRow:
    kind: str
    trials: int
    mean_ratio: float
    max_ratio: float
    exact_fraction: float
    mean_iterations: float

    def format(self) -> str:
        return (f"{self.kind:<10} trials={self.trials} mean_ratio={self.mean_ratio:.6f} "
                f"max_ratio={self.max_ratio:.6f} exact={self.exact_fraction:.4f} "
                f"iterations_per_orientation={self.mean_iterations:.3f}")


def _ratio(fast: float, oracle: float) -> float:
    if math.isclose(fast, oracle, rel_tol=1e-12, abs_tol=1e-6):
        return 1.0
    return math.inf if oracle <= 0 else fast / oracle


def audit(size: int = 6, trials: int = 1000, seed: int = 0, kinds=KINDS) -> list[AuditRow]:
    """Compare :func:`fit_patch_fast` with the exhaustive oracle on random patches."""
    count = len(orientations(size, size))
    rng = np.random.default_rng(seed)
    rows = []
    for kind in kinds:
        ratios, exact, iters = [], 0, 0
        for _ in range(trials):
            x = random_patch(kind, size, rng)
            fast = fit_patch_fast(x)
            oracle = fit_patch_exhaustive(x)
            r = _ratio(fast.sse, oracle.sse)
            ratios.append(r)
            exact += r == 1.0
            iters += fast.iterations
        rows.append(AuditRow(kind, trials, float(np.mean(ratios)), float(np.max(ratios)),
                             exact / trials, iters / (trials * count)))
    return rows


@dataclass
class ScalingResult:
    sizes: list
    seconds: list
    exponent: float
    mean_iterations: list

    def format(self) -> str:
        pts = ", ".join(f"n={n}: {t:.3f}s" for n, t in zip(self.sizes, self.seconds))
        return f"fit time {pts}; log-log slope {self.exponent:.3f}"


def fit_time_scaling(sizes=(64, 128, 256), repeats: int = 1, seed: int = 0) -> ScalingResult:
    """Whole-image PSML fit time against side length, with the fitted power law."""
    seconds, mean_iters = [], []
    for n in sizes:
        img = synth_ridge(n, n, 8.0, 0.6, 200.0, seed, noise=10.0)
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            decompose(img, EncoderConfig(lam=0.0))
            best = min(best, time.perf_counter() - t0)
        seconds.append(best)
        patch = img.samples[:n // 8, :n // 8]
        res = fit_patch_fast(patch)
        mean_iters.append(res.iterations / len(orientations(*patch.shape)))
    slope = float(np.polyfit(np.log(sizes), np.log(seconds), 1)[0])
    return ScalingResult(list(sizes), seconds, slope, mean_iters)
