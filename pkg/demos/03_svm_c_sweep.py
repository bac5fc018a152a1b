# %% [markdown]
# # Support vectors versus C
#
# A larger penalty C shrinks the soft margin, so fewer training points end
# up as support vectors. This runs a short version of the sweep through the
# benchmark harness and prints the table it would write to disk.

# %%
from nldtlab.bench import render_table, run_sweep

grid, specs = run_sweep("svm", "C", [1.0, 10.0, 1000.0], ["ds1", "ds4"], n_runs=10, base_seed=0)
print(render_table(grid, "markdown", row_title="C", compare="column"))

# %% [markdown]
# Per-run rows are available too; the spread of the SV count at C=1000 is small.

# %%
cell = grid["C=1000"]["ds1"]
print(cell.complexities)
print("mean ± std:", cell.complexity)
