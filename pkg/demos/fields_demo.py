"""Sample Matern fields at several practical ranges and check the convention.

The kernel is parameterized by the distance at which correlation falls to
0.1, so doubling the range visibly smooths the surface. The empirical
correlation at that distance, pooled over many draws, should sit near 0.1.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from prefsim import GridSpec, MaternParams, sample_field

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

grid = GridSpec(48, 48)
ranges = [0.2, 0.5, 0.8]

fig, axes = plt.subplots(1, len(ranges), figsize=(4 * len(ranges), 3.6))
for ax, rng_level in zip(axes, ranges):
    params = MaternParams(range=rng_level, sigma=1.0, nu=1.0)
    realization = sample_field(grid, params, seed=7)
    img = realization.values.reshape(grid.ny, grid.nx)
    im = ax.imshow(img, origin="lower", extent=grid.domain, cmap="viridis")
    ax.set_title(f"range = {rng_level}")
    fig.colorbar(im, ax=ax, shrink=0.8)
fig.suptitle("one Matern field draw per practical range (same seed)")
fig.tight_layout()
fig.savefig(OUT / "fields_by_range.svg")
plt.close(fig)
print(f"wrote {OUT / 'fields_by_range.svg'}")

# empirical check of the practical-range convention: put node pairs at
# exactly one range apart and pool their correlation over 500 draws
grid_small = GridSpec(8, 8)
step = grid_small.dx
params = MaternParams(range=4 * step, sigma=1.0, nu=1.0)
draws = np.stack(
    [sample_field(grid_small, params, seed=100 + i).values for i in range(500)]
)
ix = np.arange(grid_small.n_nodes) % grid_small.nx
left = np.where(ix <= 3)[0]
corr = np.corrcoef(draws[:, left].ravel(), draws[:, left + 4].ravel())[0, 1]
print(f"correlation at one practical range: {corr:.3f} (target 0.1)")
print(f"pooled variance: {draws.var(ddof=1):.3f} (target 1.0)")
