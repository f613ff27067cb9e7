"""
Training the three classifiers on phantom pairs
===============================================

Each subject contributes a sharp and a blurred image; the split keeps both
images of a subject on the same side.
"""

# %% features for 16 phantom pairs
import numpy as np

from fundusqa.cli import cluster_pca, train_and_evaluate
from fundusqa.config import Config
from fundusqa.dataset import FeatureTable
from fundusqa.features import cluster_columns, extract_features, feature_columns
from fundusqa.synthetic import phantom_pairs

cols = feature_columns()
rows, ids, subjects, labels = [], [], [], []
for i, (sharp, blurred, sigma) in enumerate(phantom_pairs(16, 128, seed=1)):
    for label, img in ((1, sharp), (0, blurred)):
        f = extract_features(img)
        rows.append([f[c] for c in cols])
        ids.append(f"p{i:02d}_{'good' if label else 'bad'}")
        subjects.append(f"p{i:02d}")
        labels.append(label)
table = FeatureTable(ids, subjects, labels, cols, np.array(rows), [""] * len(ids))

# %% 2-component PCA per feature cluster
for cluster in ("statistical", "gradient", "wavelet"):
    pca, proj = cluster_pca(table.matrix(cluster_columns(cluster)))
    y = np.array(labels)
    gap = abs(proj[y == 1, 0].mean() - proj[y == 0, 0].mean())
    print(f"{cluster:12s} explained={np.round(pca.explained_variance_ratio, 3)}  PC1 class gap={gap:.2f}")

# %% train and evaluate each classifier
config = Config(seed=0, forest_trees=50)
for kind in ("logreg_cv", "random_forest", "svm_sigmoid"):
    model, report = train_and_evaluate(table, kind, config)
    print(report.to_table())
