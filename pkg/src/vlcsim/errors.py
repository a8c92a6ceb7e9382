"""Exception types shared across the simulator."""


class SingularChannelError(ValueError):
    """Channel frequency response vanishes on a data carrier; the bin cannot be equalized."""


class CyclicPrefixError(ValueError):
    """Cyclic prefix shorter than the channel memory; inter-symbol interference would leak."""


class UndefinedChromaticityError(ValueError):
    """Spectrum carries no power, so chromaticity coordinates are undefined."""


class NoMeaningfulCctError(ValueError):
    """Chromaticity lies too far from the Planckian locus for a correlated color temperature."""
