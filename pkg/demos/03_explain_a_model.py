"""
Reading a trained model: SHAP, partial dependence and H-statistics
===================================================================

Train a quick model on a small corpus, then ask which features drive each
class, how one feature moves the spatial-class margin, and how much of the
model is interaction rather than main effects.
"""

import numpy as np

from netclass.dataset import LabeledDataset
from netclass.explain import h_statistics, partial_dependence, shap_global_summary, waterfall
from netclass.features import FEATURE_NAMES, feature_vector
from netclass.gbt import Hyperparams, train
from netclass.generators import ModelClass, SimulationManifest, simulate_corpus

manifest = SimulationManifest(
    grids={
        ModelClass.ER: {"p": [0.1, 0.3, 0.5]},
        ModelClass.SW: {"l": [2, 4], "p_rewire": [0.1, 0.3]},
        ModelClass.SF: {"m": [2, 4], "alpha": [1]},
        ModelClass.SP: {"r": [0.2, 0.4]},
        ModelClass.SBM: {"p_within": [0.7, 0.9], "p_between": [0.1]},
    },
    n_min=50, n_max=90, replicates=6, seed=2)
corpus = simulate_corpus(manifest)
X = np.array([feature_vector(s.graph).as_array() for s in corpus])
data = LabeledDataset(X, [int(s.model) for s in corpus], [s.graph_id for s in corpus], FEATURE_NAMES)
model = train(data, Hyperparams(trees=80, tree_depth=3, learning_rate=0.2, seed=1))

# global importance: mean |SHAP| per feature, per class (log-odds units)
summary = shap_global_summary(model, X)
for c, code in enumerate(summary.classes):
    top = ", ".join(f"{name} {v:.2f}" for name, v in summary.ranking(c)[:3])
    print(f"{ModelClass(code).name:>3}: {top}")

# one graph, one class: the waterfall lists contributions by size
sp_row = next(i for i, s in enumerate(corpus) if s.model is ModelClass.SP)
print("\nwhy graph", corpus[sp_row].graph_id, "looks spatial:")
for name, value, phi in waterfall(model, X[sp_row])[int(ModelClass.SP)][:5]:
    print(f"  {name:<26} = {value:8.3f}  phi {phi:+.3f}")

# partial dependence of the spatial margin on transitivity
t = FEATURE_NAMES.index("transitivity")
pd = partial_dependence(model, int(ModelClass.SP), [t], X, grid_size=8)
print("\ntransitivity -> centred spatial margin")
for (value,), effect in pd.records():
    print(f"  {value:6.3f}  {effect:+.3f}")

# how much of the spatial margin is interaction? The pairwise ratio divides by
# the joint effect of the pair, so it is only meaningful for features that
# matter; restrict it to the class's top SHAP features.
sp = summary.classes.index(int(ModelClass.SP))
top = [FEATURE_NAMES.index(name) for name, _ in summary.ranking(sp)[:4]]
rep = h_statistics(model, int(ModelClass.SP), X, max_order=2, sample_size=120, seed=0,
                   pairwise_features=top)
print(f"\nH2 total {rep.h2_total:.3f}")
for (i, j), h in sorted(rep.h2_pairwise.items(), key=lambda kv: -np.nan_to_num(kv[1])):
    print(f"  {FEATURE_NAMES[i]} x {FEATURE_NAMES[j]}: {h:.3f}")
