# %% [markdown]
# # The classifier and its gradients
#
# A tanh MLP with a softmax head. Everything downstream relies on two
# gradients: with respect to the parameters (training, Fisher) and with
# respect to the input (adversarial search). Both are checked here against
# central differences.

# %%
import numpy as np

from advunlearn import Classifier
from advunlearn.model import grad_input, grad_params

rng = np.random.default_rng(0)
model = Classifier.initialize(6, hidden=(8, 8), class_count=4, rng=rng)
X = rng.normal(size=(5, 6))
y = rng.integers(0, 4, 5)
print("layers", model.layer_sizes, "params", model.n_params)
print("loss", model.loss(X, y))

# %%
def central_diff(f, theta, h=1e-5):
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


probe = model.copy()


def loss_at(theta):
    probe.set_params(theta)
    return probe.loss(X, y)


g = grad_params(model, X, y)
num = central_diff(loss_at, model.get_params())
print("parameter gradient, max abs diff:", np.abs(g - num).max())

gx = grad_input(model, X[0], int(y[0]))
numx = central_diff(lambda v: model.loss(v[None], y[:1]), X[0])
print("input gradient, max abs diff:", np.abs(gx - numx).max())

# %% [markdown]
# The Fisher diagonal is the mean of squared per-sample gradients. It is
# not the square of the mean gradient.

# %%
F = model.squared_grad_mean(X, y)
print("Fisher >= mean-gradient^2 everywhere:", bool(np.all(F >= g**2 - 1e-15)))
