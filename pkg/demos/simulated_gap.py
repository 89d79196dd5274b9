"""
Confounded training data and the entire-versus-confounded test gap
==================================================================

Draws the latent-factor simulation, filters the training side so the label
is perfectly predictable from the sign of the confounder, and compares a
plain logistic regression with one trained on ONION-normalized features.
A smaller run of the bundled ``figure1`` experiment follows.

Runs in about a minute on one core.
"""

import numpy as np

from onionkit import cli
from onionkit.confound import assign_groups
from onionkit.data_core import apply_preprocessor, fit_preprocessor
from onionkit.evaluation import auc, cell_counts, confounded_test_subset, run_experiment
from onionkit.models import TrainConfig, logreg_fit, predict_logits
from onionkit.onion import onion_fit, onion_transform
from onionkit.simulate import SimConfig, confounding_predicate, simulate_confounded

cfg = SimConfig(n=3000, seed=1)
world, train, test = simulate_confounded(cfg)
print("mixing weights alpha", np.round(world.alpha, 3))
print("train", train.n, "test", test.n)

y1_train = train.covariates.confounders[0]
print("training label == (Y1 < 0) for every sample:",
      bool(np.all((y1_train < 0) == (train.y == 1))))

# %%
# Fit both models on standardized features
state = fit_preprocessor(train.X)
Xtr, Xte = apply_preprocessor(state, train.X), apply_preprocessor(state, test.X)
tc = TrainConfig(iterations=3000)

plain = logreg_fit(Xtr, train.y, tc)
basis, _ = onion_fit(Xtr - Xtr.mean(axis=0), [y1_train])
onion = logreg_fit(onion_transform(Xtr, basis), train.y, tc)

# %%
# Score on the whole test set and on a test subset confounded like training
groups_test = assign_groups(test.covariates.confounders[0], 0.0)
groups_train = assign_groups(y1_train, 0.0)
subset = confounded_test_subset(groups_test, test.y, cell_counts(groups_train, train.y))

for name, params, Xeval in [("logreg", plain, Xte),
                            ("logreg+ONION", onion, onion_transform(Xte, basis))]:
    s = predict_logits(params, Xeval)
    print(f"{name:14s} entire {auc(s, test.y):.3f}  confounded {auc(s[subset], test.y[subset]):.3f}")

print("test samples violating the training filter:",
      int(np.sum(~confounding_predicate(test.covariates.confounders[0], test.y))))

# %%
# The bundled experiment, cut down to two trials and short training
exp = cli.load_experiment_config("figure1")
exp.pop("sweep")
exp.update(trials=2)
exp["data"]["sim"]["n"] = 1000
exp["train"]["iterations"] = 1500
report = run_experiment(exp)
print()
print(report.summary_table())
