"""Run the whole protocol on a synthetic collection, then train and predict.

Run:  python3 demos/classify_fixtures.py [out_dir]

Uses 3 trials per fraction so it finishes in a few seconds; the CLI
``run-all`` verb runs the full 20.
"""

import json
import sys
import tempfile
from pathlib import Path

from lesionlab.config import load_config
from lesionlab.dataset import make_fixtures
from lesionlab.evaluation import class_table, summary_table
from lesionlab.pipeline import predict_image, run_all, train_bundle, collect_samples, process_manifest

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="lesionlab_"))
manifest = make_fixtures(out / "fixtures", seed=0)
print(f"{len(manifest.entries)} images:", manifest.counts())

config = load_config(None, ["trials.count=3"])
run_all(manifest, config, out / "run")
report = json.loads((out / "run" / "report.json").read_text())
print()
print(summary_table(report))
print()
print(class_table(report))

# a deployable model trained on every region; new images get the SVM label
bundle = train_bundle(collect_samples(process_manifest(manifest, config)), manifest.classes, config)
fresh = make_fixtures(out / "fresh", seed=99, per_class=1)
print()
for entry in fresh.entries:
    for row in predict_image(bundle, entry.path, config):
        print(f"{entry.image_id:28s} region {row['region_id']}: {row['label']:22s} fused {{{row['fused']}}}")
