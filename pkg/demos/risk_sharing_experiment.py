"""A full experiment through the runner: config text in, result files out.

The command line tool and the library share one code path: a flat key-value
config resolves against a training profile, the runner draws data, trains
the ensemble, and writes report.json, loss_history.csv and
allocation_curve.csv.  Running the same config twice writes identical bytes.
"""

import json
import tempfile
from pathlib import Path

from infconv.cli import main, parse_experiment, render_experiment, run_experiment

CONFIG = """\
# two entropic agents sharing a uniform position; tiny settings so the
# demo finishes in seconds (the desk profile defaults are made for accuracy)
name = demo-entropic
distribution = uniform(-1.0,1.0)
rho1 = entropic(beta=2.0)
rho2 = entropic(beta=3.0)
seed = 3
n_samples = 2000
batch_size = 200
epochs = 20
learning_rate = 0.001
ensemble_size = 2
hidden_widths = 16,16
activation = relu
"""

# ---------------------------------------------------------------------------
# The config resolves to a full experiment; unset keys take profile defaults.
# ---------------------------------------------------------------------------
spec = parse_experiment(CONFIG)
print("resolved configuration:")
print(render_experiment(spec))

# ---------------------------------------------------------------------------
# Library path: run in process and look at the report object.
# ---------------------------------------------------------------------------
report, history = run_experiment(spec)
print(f"members' final loss    {report.final_loss_mean:.6f} +- {report.final_loss_std:.2e}")
print(f"ensemble loss (eval)   {report.ensemble_eval_loss:.6f}")
print(f"population optimum     {report.analytic_infimum:.6f}")
print(f"relative error         {report.relative_error:.4%}")

# ---------------------------------------------------------------------------
# Command line path: identical machinery, files on disk, exit code 0.
# ---------------------------------------------------------------------------
with tempfile.TemporaryDirectory() as tmp:
    cfg_path = Path(tmp) / "demo.cfg"
    cfg_path.write_text(CONFIG, encoding="utf-8")
    out_dir = Path(tmp) / "results"

    code = main(["run", str(cfg_path), "--out", str(out_dir)])
    assert code == 0

    payload = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    print(f"\nreport.json relative_error = {payload['relative_error']}")
    curve_lines = (out_dir / "allocation_curve.csv").read_text().splitlines()
    print(f"allocation_curve.csv: {curve_lines[0]}")
    print(f"                      {curve_lines[200]}   <- near x = 0")
    history_lines = (out_dir / "loss_history.csv").read_text().splitlines()
    print(f"loss_history.csv: first epoch {history_lines[1]}")
    print(f"                  last epoch  {history_lines[-1]}")
