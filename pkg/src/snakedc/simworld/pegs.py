"""Seeded Poisson-disk peg placement (dart throwing on a background grid)."""

from __future__ import annotations

import math

import numpy as np

from snakedc.errors import GenerationError


def spawn_peg_array(seed: int, density: float, min_spacing: float, extent=(2.0, 3.0),
                    peg_radius: float = 0.04, origin=(0.0, 0.0), attempts_per_peg: int = 60):
    """Place ``round(density * area)`` pegs with pairwise distance >= ``min_spacing``.

    Candidates are drawn uniformly over the rectangle ``origin + [0, w] x [0, h]``
    and rejected when they violate the spacing. Identical arguments give
    bit-identical arrays.
    """
    if not min_spacing > 2 * peg_radius:
        raise ValueError(f"min_spacing {min_spacing} must exceed the peg diameter {2 * peg_radius}")
    width, height = map(float, extent)
    target = int(round(density * width * height))
    rng = np.random.default_rng(seed)

    cell = min_spacing / math.sqrt(2.0)
    nx = int(math.ceil(width / cell))
    ny = int(math.ceil(height / cell))
    grid = -np.ones((nx, ny), dtype=np.int64)
    points = np.empty((target, 2))
    placed = 0
    budget = attempts_per_peg * max(target, 1)
    spacing2 = min_spacing * min_spacing
    while placed < target:
        if budget <= 0:
            raise GenerationError(
                f"placed {placed} of {target} pegs at spacing {min_spacing}; density too high"
            )
        batch = rng.random((256, 2)) * (width, height)
        for x, y in batch:
            budget -= 1
            i = min(int(x / cell), nx - 1)
            j = min(int(y / cell), ny - 1)
            ok = True
            for a in range(max(i - 2, 0), min(i + 3, nx)):
                for b in range(max(j - 2, 0), min(j + 3, ny)):
                    k = grid[a, b]
                    if k >= 0:
                        dx = points[k, 0] - x
                        dy = points[k, 1] - y
                        if dx * dx + dy * dy < spacing2:
                            ok = False
                            break
                if not ok:
                    break
            if ok:
                grid[i, j] = placed
                points[placed] = (x, y)
                placed += 1
                if placed == target:
                    break
            if budget <= 0:
                break
    return points + np.asarray(origin, dtype=float)
