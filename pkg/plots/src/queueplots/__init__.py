"""Figure rendering for queue-control experiment outputs."""

from .figures import (
    DPI,
    FigureSpec,
    SchemaError,
    Series,
    load_series,
    plot_learning_curves,
    plot_regret,
)

__version__ = "0.1.0"
