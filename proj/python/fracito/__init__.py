"""Python front end to the fracito C++ core."""

import json

from ._fracito import (
    NumericalError,
    __version__,
    covariance,
    functional_ids,
    indicator_inner_product,
    list_experiments,
    run_json,
    sample_paths,
    to_csv,
    wis_sum,
)


def run(experiment, **config):
    """Run one experiment and return the report as a dict."""
    config["experiment"] = experiment
    return json.loads(run_json(json.dumps(config)))


__all__ = [
    "NumericalError",
    "__version__",
    "covariance",
    "functional_ids",
    "indicator_inner_product",
    "list_experiments",
    "run",
    "run_json",
    "sample_paths",
    "to_csv",
    "wis_sum",
]
