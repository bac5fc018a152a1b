# %% [markdown]
# # Four classifiers on one dataset
#
# Generate a DS1-style set (two classes on either side of a tilted line),
# fit each method once and compare test accuracy with its complexity score.

# %%
import numpy as np

from nldtlab.core import accuracy, split
from nldtlab.datagen import SyntheticSpec, generate
from nldtlab.methods import REGISTRY

ds = generate(SyntheticSpec("ds1", seed=0))
pair = split(ds, 0.7, seed=0)
print(ds.n, "rows,", ds.class_counts(), "per class")

# %% [markdown]
# GP and NLDT get a smaller search budget than their defaults so the script
# finishes in under a minute.

# %%
budgets = {"gp": {"population_size": 200, "generations": 20}, "nldt": {"upper_gens": 15}}
for name, m in REGISTRY.items():
    model = m.fit(pair.train, budgets.get(name, {}), 0)
    acc = accuracy(m.predict(model, pair.test.features), pair.test.labels)
    print(f"{name:5s} test accuracy {100 * acc:6.2f}%   complexity {m.complexity(model):g}")

# %% [markdown]
# The NLDT rule is usually a single split over both features, while the SVM
# keeps a handful of support vectors and CART grows a staircase of axis cuts.

# %%
tree = REGISTRY["nldt"].fit(pair.train, budgets["nldt"], 0)
print(tree.render())
