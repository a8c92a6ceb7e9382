"""Link-level simulator for filterless multi-color LED visible-light communication.

Submodules: ``spectral`` (transform kernels and the quartered orthogonal
family), ``modems`` (DCO-OFDM, DC-biased quartered transform, intensity
color keying), ``channel`` (CP framing, AWGN, Lambertian room model),
``photometry`` (LED spectra, flux, chromaticity, CCT, CRI), ``experiments``
(BER sweeps, PAPR statistics, room maps, illumination report), ``config``
and ``cli`` (TOML-driven front end).
"""

__version__ = "0.1.0"
