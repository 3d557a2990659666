"""Figure generation for result CSVs of the quantized-RSMA harness."""

from .figures import FIGURE_KINDS, NoDataError, SchemaError, dominance_note, load_rows, plot

__version__ = "0.1.0"
