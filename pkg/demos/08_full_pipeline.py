"""
End to end: the four-scenario report
====================================

A reduced configuration so the demo finishes in a minute or two. The same
stages run from the command line with ``python -m hybriddefense all``.
"""

import tempfile
from pathlib import Path

from hybriddefense.config import config_from_dict, serialize_config
from hybriddefense.pipeline import format_results, run_stage

cfg = config_from_dict({
    "data": {"synthetic": {"samples_per_class": 300}},
    "cnn": {"epochs": 3},
    "nnmf": {"iters": 100},
    "denoiser": {"epochs": 10},
    "attack": {"n_iters": 30},
})
out = Path(tempfile.mkdtemp())
(out / "config.json").write_text(serialize_config(cfg))

# prepare -> train-cnn -> fit-nnmf -> train-classifier -> train-denoiser -> attack -> evaluate
report = run_stage("all", cfg, out)
print(format_results(report))

for path in sorted(out.iterdir()):
    print(f"{path.name:>16} {path.stat().st_size:>9} bytes")
