# Type hints
from typing import TYPE_CHECKING
from typing import Any

# Pandas for table management
import pandas as pd

if TYPE_CHECKING:
    PdSeriesAny = pd.Series[Any]  # type: ignore[misc]
else:
    PdSeriesAny = pd.Series


def format_integer(number: PdSeriesAny) -> PdSeriesAny:
    """Format a pandas Series of counts as integer strings.

    Args:
        number: A pandas Series containing numeric values.

    Returns:
        A pandas Series of strings, with NaNs replaced by empty strings.
    """
    return (
        number.fillna(-1)  # Replace NaN values with a placeholder
        .round()
        .astype(int)
        .astype(str)
        .replace("-1", "")  # Replace placeholder with empty strings
    )


def format_percent(fraction: PdSeriesAny, decimals: int = 2) -> PdSeriesAny:
    """Convert a pandas Series of fractions to percentages, formatted as strings.

    Args:
        fraction: A pandas Series containing fractional values (e.g., 0.25 for 25%).
        decimals: Number of decimal places to show. Default is 2.

    Returns:
        A pandas Series with the percentage values formatted with a fixed number
        of decimals and empty strings for NaNs and infinities.
    """
    return (
        fraction.multiply(100)  # Convert fractions to percentages
        .round(decimals)
        .map(lambda value: "" if pd.isna(value) or abs(value) == float("inf") else f"{value:.{decimals}f}")
    )


def format_decimal(value: float | None, decimals: int = 2) -> str:
    """Format a single statistic, empty when it is undefined."""
    if value is None:
        return ""
    return f"{value:.{decimals}f}"
