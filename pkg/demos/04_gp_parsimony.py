# %% [markdown]
# # Parsimony pressure in GP
#
# Fitness is cross-entropy plus P_c times the node count. A heavy penalty
# keeps trees tiny but can stall them before they separate the classes.

# %%
import numpy as np

from nldtlab.core import accuracy, split
from nldtlab.datagen import SyntheticSpec, generate
from nldtlab.gp import GpConfig, evolve, gp_complexity, render_expression

ds = generate(SyntheticSpec("ds1", seed=0))
pair = split(ds, 0.7, seed=0)

# %%
for pc in (0.01, 0.005, 0.001):
    sizes, accs = [], []
    for seed in range(5):
        res = evolve(pair.train, GpConfig(parsimony=pc, population_size=200, generations=20, seed=seed))
        sizes.append(gp_complexity(res.best))
        accs.append(accuracy(res.best.predict(pair.test.features), pair.test.labels))
    print(f"P_c={pc:<6} internal nodes {np.mean(sizes):5.1f}   accuracy {100 * np.mean(accs):6.2f}%")

# %% [markdown]
# The last tree found with the smallest penalty:

# %%
print(render_expression(res.best, ["x1", "x2"]))
