# %% [markdown]
# # Inside a power-law split
#
# A split rule is `sum_i w_i * prod_j z_j^b_ij + theta1`, optionally wrapped
# as `|...| - theta2`, evaluated on features rescaled to [1, 2]. The upper
# level picks the exponent matrix B and the modulus flag; the lower level
# places weights and biases to minimise the weighted Gini of the two children.

# %%
import numpy as np

from nldtlab.datagen import SyntheticSpec, generate
from nldtlab.nldt import (NldtParams, PowerLawRule, lower_level_search, rule_complexity, split_impurity,
                          upper_level_search)
from nldtlab.core import FeatureTransform

ds = generate(SyntheticSpec("ds4", n_per_class=200, seed=1))  # class 1 sits inside a band
Z = FeatureTransform.fit(ds.features).apply(ds.features)
y = ds.labels

# %% [markdown]
# A band needs the modulus form: with `m = 0` no single linear-in-powers rule
# separates it, with `m = 1` one term per feature is enough.

# %%
B = np.array([[1, 0], [0, 1], [0, 0]])
for m in (0, 1):
    res = lower_level_search(B, m, Z, y, NldtParams(), np.random.default_rng(0))
    print(f"m={m}: F_L = {res.impurity:.4f}")

# %% [markdown]
# The full bilevel search finds the simplest feasible structure by itself.

# %%
res = upper_level_search(Z, y, NldtParams(seed=0), np.random.default_rng(0))
print("feasible:", res.feasible, " F_U:", rule_complexity(res.rule), " F_L:", round(res.impurity, 4))
print(res.rule.render(["x1", "x2"]))
assert abs(split_impurity(res.rule, Z, y) - res.impurity) < 1e-12
