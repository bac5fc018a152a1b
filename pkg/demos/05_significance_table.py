# %% [markdown]
# # Reading a benchmark table
#
# Each dataset contributes an accuracy row and a complexity row. The best
# entry of a row is bold; entries the rank-sum test cannot tell apart from
# it (p >= 0.05) are italic.

# %%
from nldtlab.bench import render_table, run_bench, wilcoxon_rank_sum

grid, _ = run_bench(["cart", "svm"], ["ds1", "ds3"], n_runs=8, base_seed=0)
print(render_table(grid, "markdown"))

# %%
a = grid["ds3"]["cart"].accuracies
b = grid["ds3"]["svm"].accuracies
w, p = wilcoxon_rank_sum(a, b)
print(f"rank sum of CART accuracies {w:g}, two-sided p = {p:.4f}")
