"""Read-only plotting frontend for lowmach output files.

Consumes the rate report, rates.csv and energy.csv artifacts through
their documented file formats; never recomputes physics: every plotted
number appears verbatim in an input file.
"""

__version__ = "0.1.0"


class MissingQuantity(Exception):
    """Requested quantity is absent from (or too sparse in) the inputs."""
