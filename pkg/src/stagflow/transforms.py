"""Pluggable real FFT backend.

The spectral pressure solver only needs a d-dimensional real-to-complex
forward transform and its inverse; any backend satisfying the round-trip
identity can be swapped in here.  scipy's pocketfft is preferred because
it preserves single precision.
"""

try:
    from scipy.fft import irfftn, rfftn  # noqa: F401
except ImportError:  # pragma: no cover
    from numpy.fft import irfftn, rfftn  # noqa: F401
