"""Directed information, transfer entropy and Granger-causality graph
inference for multivariate time series."""

from .core import (
    MeasureValue,
    NodePartition,
    SequenceDistribution,
    TimeSeriesPanel,
    load_panel,
    make_partition,
    symbolize,
    write_panel,
)
from .discrete import (
    DiscreteMarkovModel,
    enumerate_joint,
    fit_plugin,
    marginal,
    sample_panel,
    sample_panels,
    with_stationary_initial,
)
from .measures import (
    ConditioningMode,
    InfoDecomposition,
    RateEstimate,
    causal_mutual_information,
    decompose,
    delayed_directed_information,
    delta_instantaneous,
    directed_information,
    entropy,
    instantaneous_exchange,
    kl_directed_information,
    lautum_transfer_rate,
    mutual_information,
    rate,
    schreiber_transfer_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "ConditioningMode",
    "DiscreteMarkovModel",
    "InfoDecomposition",
    "MeasureValue",
    "NodePartition",
    "RateEstimate",
    "SequenceDistribution",
    "TimeSeriesPanel",
    "causal_mutual_information",
    "decompose",
    "delayed_directed_information",
    "delta_instantaneous",
    "directed_information",
    "entropy",
    "enumerate_joint",
    "fit_plugin",
    "instantaneous_exchange",
    "kl_directed_information",
    "lautum_transfer_rate",
    "load_panel",
    "make_partition",
    "marginal",
    "mutual_information",
    "rate",
    "sample_panel",
    "sample_panels",
    "schreiber_transfer_entropy",
    "symbolize",
    "with_stationary_initial",
    "write_panel",
]
