# %% [markdown]
# # A small sweep and its comparison table
#
# The full grid is 4 tau x 4 N x 4 strategies x 5 seeds, run with
# `advunlearn sweep`. This cut-down version keeps two seeds and two forget
# sizes. Each method is reported at its best tau by validation UAR, and stars
# come from a one-tailed z-test against random relabelling.

# %%
from advunlearn.experiment import render_report, resolve_config, run_sweep

cfg = resolve_config({"sweep": {"forget_counts": [10, 30], "seeds": [0, 1]}})
rows = run_sweep(cfg)
print(len(rows), "runs")
print(render_report(rows))
