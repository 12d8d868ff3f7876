"""Search-ad ROAS estimation with search bias correction."""

import json

from . import _core
from ._core import Error, EstimationError, InputError, assign_segment, is_d_separated, method_names, satisfies_backdoor

__version__ = _core.__version__

__all__ = [
    "Error",
    "EstimationError",
    "InputError",
    "assign_segment",
    "classify",
    "compare",
    "default_config",
    "estimate",
    "estimate_full_mmm",
    "fit_gam",
    "is_d_separated",
    "method_names",
    "replicate_study",
    "satisfies_backdoor",
    "simulate",
]


def default_config():
    return json.loads(_core.default_config())


def simulate(config=None, **overrides):
    """Simulate a panel. Returns (panel_csv, truth dict)."""
    cfg = dict(config or {})
    cfg.update(overrides)
    panel_csv, truth = _core.simulate(json.dumps(cfg))
    return panel_csv, json.loads(truth)


def estimate(panel_csv, method="sbc", **options):
    return json.loads(_core.estimate(panel_csv, method, **options))


def estimate_full_mmm(panel_csv, x2, k=10):
    return json.loads(_core.estimate_full_mmm(panel_csv, list(x2), k))


def compare(panel_csv, reference=None, reference_se=0.0, index_to_reference=False, per_year=False, methods=()):
    return json.loads(
        _core.compare(panel_csv, reference, reference_se, index_to_reference, per_year, list(methods))
    )


def replicate_study(config=None, reps=100, methods=("naive", "demand_adjusted", "sbc"), threads=1, x2_controls=False):
    return json.loads(_core.replicate_study(json.dumps(config or {}), reps, list(methods), threads, x2_controls))


def classify(log_path, taxonomy_path, category_min=0.5, target_min=0.5, competitor_min=0.5):
    """Classification CSV text for a query log."""
    return _core.classify(str(log_path), str(taxonomy_path), category_min, target_min, competitor_min)


def fit_gam(data, response, linear=(), smooths=(), k=10):
    cols = {name: [float(v) for v in values] for name, values in data.items()}
    return json.loads(_core.fit_gam(cols, response, list(linear), list(smooths), k))
