# %% [markdown]
# # Targeted PGD surrogates
#
# Each forget-set sample gets `M` replicas. Every replica starts from uniform
# noise inside the l-inf ball of radius tau, then takes signed steps that
# lower the loss toward a random wrong target. Larger tau buys more hits.

# %%
import numpy as np

from advunlearn import AttackConfig, generate_adversarial_set
from advunlearn.data import select_forget
from advunlearn.experiment import derive_seeds, pretrain, resolve_config
from advunlearn.metrics import evaluate

cfg = resolve_config()
model, train, val, name = pretrain(cfg)
print("pretrained val UAR:", evaluate(model, val, name).uar)
forget, _ = select_forget(train, 20, derive_seeds(0)["forget"])

# %%
for tau in (0.1, 0.3, 0.5, 0.7):
    adv = generate_adversarial_set(model, forget, AttackConfig(tau=tau))
    hit = np.mean(model.predict(adv.X) == adv.targets)
    radius = np.abs(adv.X - forget.X[adv.source_index]).max()
    print(f"tau={tau}: {len(adv)} samples, hit rate {hit:.2f}, max radius {radius:.3f}")

# %% [markdown]
# Sign steps can saturate. If a coordinate's gradient sign never flips, every
# replica ends on the same face of the ball whatever its start. At small tau
# some same-target replicas therefore coincide exactly.

# %%
adv = generate_adversarial_set(model, forget, AttackConfig(tau=0.1))
keys = {(int(s), int(t), a.tobytes()) for s, t, a in zip(adv.source_index, adv.targets, adv.X)}
print("distinct replicas at tau=0.1:", len(keys), "of", len(adv))
