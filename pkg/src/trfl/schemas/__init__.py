"""JSON schemas for the command-line outputs."""
import json
from importlib import resources

NAMES = ("fig3_results", "gen_data", "metrics_row", "param_count", "rf_report", "sensitivity",
         "train_results")


def load_schema(name):
    """Parsed schema ``name`` (one of :data:`NAMES`)."""
    if name not in NAMES:
        raise KeyError(f"no schema {name!r}; available: {NAMES}")
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())
