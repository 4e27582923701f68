"""Growth-interaction curves: competition versus free logistic growth.

Usage: python3 demos/growth.py
"""
import numpy as np

from fmpp import GrowthInteraction, KQuery, Pattern, TestFunction, estimate_k, growth_interaction, rect

window = rect(0, 1, 0, 1)
rng = np.random.default_rng(7)
xy = rng.uniform(size=(80, 2))
grid = np.linspace(0, 20, 41)

for c in (0.0, 0.5):
    params = GrowthInteraction(lam=1.0, K=10.0, c=c, sigma_int=0.1, mu=0.05, dt=0.01)
    res = growth_interaction(xy, params, grid, seed=7, horizon=(0.0, 5.0))
    final = res.curves[:, -1]
    alive = final > 0
    p = Pattern(window, xy, grid, res.curves)
    k = estimate_k(p, KQuery((0.05, 0.1, 0.15), test=TestFunction.inner(), normalization="ground-normalized"))
    print(f"c={c}: {alive.sum()} alive at t=20, mean final size {final[alive].mean():.2f}, "
          f"normalized inner-product K {np.round(k.values, 2).tolist()}")
