"""Forget-set-only machine unlearning with adversarial surrogates and EWC."""

from .attacks import AttackConfig, AdversarialSet, generate_adversarial_set, pgd_attack
from .data import LabeledDataset, SplitSpec, SynthSpec, load_csv, save_csv, select_forget, split_by_group, synth_generate
from .metrics import EvalReport, evaluate, one_tailed_z_test, uar
from .model import Adam, Classifier, cross_entropy, forward
from .unlearning import LossWeights, UnlearnConfig, unlearn

__version__ = "0.1.0"
