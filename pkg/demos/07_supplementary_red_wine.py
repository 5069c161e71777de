"""SUPPLEMENTARY: MAE against GAR on the red-wine quality file.

This is not one of the benchmark datasets.  The benchmark uses the white
wine file; this script only shows the harness on a real UCI table.  The
original file is semicolon separated; some copies use commas, so the
delimiter is read off the header.  Pass the path to ``winequality-red.csv`` (plain or .gz).
"""

import gzip
import sys
import tempfile
from pathlib import Path

from gar.experiment import ExperimentConfig, run_experiment

if len(sys.argv) < 2:
    sys.exit("usage: 07_supplementary_red_wine.py path/to/winequality-red.csv[.gz]")
src = Path(sys.argv[1])
if src.suffix == ".gz":
    tmp = Path(tempfile.mkdtemp()) / "winequality-red.csv"
    tmp.write_bytes(gzip.decompress(src.read_bytes()))
    src = tmp
delimiter = ";" if ";" in src.read_text(encoding="utf-8").splitlines()[0] else ","

cfg = ExperimentConfig.from_dict(
    {
        "dataset": "csv",
        "data_path": str(src),
        "delimiter": delimiter,
        "targets": ["quality"],
        "standardize": True,
        "epochs": 40,
        "lr_decay_epochs": [20, 30],
        "lrs": [1e-1, 1e-2],
        "weight_decays": [1e-4],
        "alphas": [1.0],
        "methods": ["mae", "gar"],
        "folds": [0, 1],
    }
)
rep = run_experiment(cfg)
for metric in ("mae", "pearson", "spearman"):
    print(f"{metric:>8}: MAE {rep.summary('mae', metric).mean:.4f}  GAR {rep.summary('gar', metric).mean:.4f}")
