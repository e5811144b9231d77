"""
Simulate, featurize, train and evaluate in memory
=================================================

A compact version of the command-line pipeline: a small corpus, a 70:30
stratified split, SMOTE on the training part, a short Latin-hypercube
search scored by cross-validation, then a test-set report.
"""

import numpy as np

from netclass.dataset import LabeledDataset, SplitSpec, smote, stratified_split
from netclass.evaluation import evaluate, search_hyperparams
from netclass.features import FEATURE_NAMES, feature_vector
from netclass.gbt import Hyperparams, train
from netclass.generators import ModelClass, SimulationManifest, simulate_corpus

manifest = SimulationManifest(
    grids={
        ModelClass.ER: {"p": [0.1, 0.3, 0.5, 0.7]},
        ModelClass.SW: {"l": [2, 4, 6], "p_rewire": [0.1, 0.3]},
        ModelClass.SF: {"m": [1, 3, 5], "alpha": [1, 2]},
        ModelClass.SP: {"r": [0.2, 0.35, 0.5]},
        ModelClass.SBM: {"p_within": [0.6, 0.9], "p_between": [0.1, 0.3]},
    },
    n_min=50, n_max=100, replicates=5, seed=1)

corpus = simulate_corpus(manifest)
X = np.array([feature_vector(s.graph).as_array() for s in corpus])
y = np.array([int(s.model) for s in corpus])
data = LabeledDataset(X, y, [s.graph_id for s in corpus], FEATURE_NAMES)
print(f"{len(data)} graphs, class counts {data.class_counts()}")

train_part, test_part = stratified_split(data, SplitSpec(seed=3))

# four candidate configurations, each scored by 3-fold CV on the training part
ranked = search_hyperparams(train_part, budget=4, seed=4, k=3, base=Hyperparams(seed=5))
for hp, cv in ranked:
    s = cv.summary()
    print(f"trees={hp.trees:3d} depth={hp.tree_depth} lr={hp.learning_rate:.3f} mtry={hp.mtry:2d}"
          f"  cv accuracy {s['accuracy_mean']:.3f}")

best = ranked[0][0]
model = train(smote(train_part, seed=6), best)
report = evaluate(model, test_part)

names = [c.name for c in ModelClass]
print(f"\ntest accuracy {report.accuracy:.3f}, macro AUC {report.auc:.3f}")
print("confusion (rows predicted, columns truth)")
print("       " + "".join(f"{n:>6}" for n in names))
for name, row in zip(names, report.confusion):
    print(f"{name:>6} " + "".join(f"{v:>6d}" for v in row))
