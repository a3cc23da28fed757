"""Error types for the band plotter."""


class SchemaError(ValueError):
    """The input CSV does not conform to the stats schema.

    ``column`` names the offending column.
    """

    def __init__(self, message: str, column: str):
        super().__init__(f"{message} (column {column!r})")
        self.column = column


class OptionError(ValueError):
    """A figure option references data the CSV does not contain."""
