"""Domain exceptions. Every error carries a machine-parsable category string
used verbatim by the CLI (one line on stderr) and the HTTP layer (JSON body).
"""


class CellhealError(Exception):
    category = "error"


class ConfigError(CellhealError):
    category = "config-error"


class TooFewSamples(CellhealError):
    category = "fit-error"


class DegenerateX(CellhealError):
    category = "fit-error"


class ZeroMaxCoupling(CellhealError):
    category = "healing-error"


class ZeroRow(CellhealError):
    category = "healing-error"


class EmptyFeasible(CellhealError):
    category = "sweep-error"
