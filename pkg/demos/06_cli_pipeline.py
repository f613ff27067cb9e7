"""
The command line pipeline end to end
====================================

extract -> pca -> train -> score -> dump-debug, driven through ``main`` so
the script runs anywhere; the same arguments work with the ``fundusqa``
console command.
"""

# %% write a small labelled dataset to disk
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from fundusqa.cli import main
from fundusqa.synthetic import phantom_pairs

work = Path(tempfile.mkdtemp(prefix="fundusqa-demo-"))
lines = ["path,subject,label"]
for i, (sharp, blurred, _) in enumerate(phantom_pairs(8, 96, seed=4)):
    for q, img in (("good", sharp), ("bad", blurred)):
        Image.fromarray(np.round(img * 255).astype(np.uint8)).save(work / f"s{i}_{q}.png")
        lines.append(f"s{i}_{q}.png,s{i},{q}")
(work / "manifest.csv").write_text("\n".join(lines) + "\n")
(work / "run.conf").write_text("seed = 1\nforest_trees = 50\n")

# %% extract features
print("extract exit", main(["extract", str(work / "manifest.csv"), "-o", str(work / "features.csv")]))
print(open(work / "features.csv").read().splitlines()[1][:120], "...")

# %% PCA of the statistical cluster
main(["pca", str(work / "features.csv"), "--cluster", "statistical", "-o", str(work / "pca_stat.csv")])
print(open(work / "pca_stat.csv").read().splitlines()[:4])

# %% train a forest and read its report
main(["train", str(work / "features.csv"), "--kind", "random_forest", "--config", str(work / "run.conf"), "-o", str(work / "rf.json")])

# %% score: exit code 0 when every image is acceptable, 2 when any is blurry
print("score sharp  ->", main(["score", str(work / "rf.json"), str(work / "s0_good.png"), "-o", str(work / "a.csv")]))
print("score blurry ->", main(["score", str(work / "rf.json"), str(work / "s0_bad.png"), "-o", str(work / "b.csv")]))

# %% intermediate maps as 16-bit PNGs
main(["dump-debug", str(work / "s0_good.png"), "-o", str(work / "debug")])
print(sorted(p.name for p in (work / "debug").iterdir()))
print("outputs in", work)
