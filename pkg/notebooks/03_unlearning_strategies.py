# %% [markdown]
# # Four ways to forget ten samples
#
# Forgetting is measured on the forget set against its true labels, so low is
# good there. Utility is the validation UAR, so high is good there.

# %%
from advunlearn.experiment import pretrain, resolve_config, run_unlearning

cfg = resolve_config()
model, train, val, name = pretrain(cfg)

for strategy in ("remain_involved", "random_label", "adv", "adv_ela"):
    _, report, evals = run_unlearning(model, cfg, train, val, name, strategy=strategy, forget_count=10)
    print(f"{strategy:16s} forget UAR {evals['forget']['uar']:.3f}   "
          f"val UAR {evals[name]['uar']:.3f} (was {evals[name + '_pre']['uar']:.3f})")

# %% [markdown]
# The report keeps per-epoch loss components. For `adv_ela` the anchor term
# tracks how far the model has drifted from its pre-unlearning parameters.

# %%
_, report, _ = run_unlearning(model, cfg, train, val, name, strategy="adv_ela")
for row in report.epochs[::3]:
    print({k: round(v, 4) if isinstance(v, float) else v for k, v in row.items()})

# %% [markdown]
# The anchor weight trades forgetting against utility.

# %%
for lam in (0.0, 0.3, 1.0, 3.0, 10.0):
    _, _, ev = run_unlearning(model, cfg, train, val, name, strategy="adv_ela",
                              weights={"ewc": lam})
    print(f"ewc={lam:5}: forget {ev['forget']['uar']:.3f}  val {ev[name]['uar']:.3f}")
