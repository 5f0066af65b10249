"""Model metrics and their finite-difference operator realisations."""
from .metrics import (ChartError as MetricChartError, FlatTorus, HyperbolicSpace, ModelMetric,
                      SymbolicMetric, hyperbolic_symbolic, make_metric, product_collar)
from .discrete import Chart, ChartError, DiscreteField, DiscreteOperator, Discretization, metric_tables
