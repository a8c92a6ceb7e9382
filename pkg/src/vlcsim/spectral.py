"""Transform kernels and the quartered orthogonal transform family.

Conventions: the forward DFT is unnormalized, X_k = sum_n x_n exp(-j2*pi*k*n/N);
the inverse carries the 1/N factor.  Circulant channel matrices are built from
an impulse response h so that C @ x is the cyclic convolution of x with h, and
every column of the real trigonometric eigenbasis diagonalizes C^T C with
eigenvalue |H(k)|^2, H(k) being the DFT of the zero-padded taps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ASSIGNMENT_POLICIES = ("round_robin", "blocked")


def dft(x: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT of a length-N sequence."""
    x = np.asarray(x)
    if x.shape[-1] == 0:
        raise ValueError("dft requires a nonempty input")
    return np.fft.fft(x, axis=-1)


def idft(x: np.ndarray) -> np.ndarray:
    """Inverse DFT with the 1/N factor; idft(dft(x)) == x."""
    x = np.asarray(x)
    if x.shape[-1] == 0:
        raise ValueError("idft requires a nonempty input")
    return np.fft.ifft(x, axis=-1)


def hermitian_extend(s: np.ndarray, n: int | None = None) -> np.ndarray:
    """Place N/2-1 complex symbols on a Hermitian-symmetric length-N spectrum.

    Bin 0 and bin N/2 are zeroed, bins 1..N/2-1 carry the symbols and the upper
    half mirrors their conjugates, so the inverse DFT is real.
    """
    s = np.asarray(s, dtype=complex)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    if n is None:
        n = 2 * (s.shape[-1] + 1)
    if s.shape[-1] != n // 2 - 1:
        raise ValueError(f"expected {n // 2 - 1} symbols for frame size {n}, got {s.shape[-1]}")
    x = np.zeros((s.shape[0], n), dtype=complex)
    x[:, 1:n // 2] = s
    x[:, n // 2 + 1:] = np.conj(s[:, ::-1])
    return x[0] if single else x


def _padded_response(h: np.ndarray, n: int) -> np.ndarray:
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.size < 1 or not np.any(h):
        raise ValueError("channel impulse response needs at least one nonzero tap")
    if h.size > n:
        raise ValueError(f"channel has {h.size} taps but frame size is {n}")
    return np.fft.fft(h, n=n)


def channel_frequency_response(h: np.ndarray, n: int) -> np.ndarray:
    """H(k) = sum_t h_t exp(-j2*pi*k*t/N), the DFT of the zero-padded taps."""
    return _padded_response(h, n)


def circulant_apply(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the circulant channel matrix C: cyclic convolution of x with h."""
    x = np.asarray(x, dtype=float)
    hk = _padded_response(h, x.shape[-1])
    return np.fft.ifft(hk * np.fft.fft(x, axis=-1), axis=-1).real


def circulant_matched_apply(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Apply C^T, the matched (time-reversed) circulant of the same taps."""
    y = np.asarray(y, dtype=float)
    hk = _padded_response(h, y.shape[-1])
    return np.fft.ifft(np.conj(hk) * np.fft.fft(y, axis=-1), axis=-1).real


def trig_eigenbasis(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal real cosine/sine basis whose columns diagonalize C^T C.

    Returns (B, freqs) where B is N x N with columns ordered by frequency
    (cosine before sine at equal k) and freqs[j] is the frequency index of
    column j.  Column k=0 is sqrt(1/N)*1, column k=N/2 is sqrt(1/N)*(-1)^n,
    interior pairs are sqrt(2/N)*cos/sin(2*pi*k*n/N).
    """
    if n < 4 or n % 4:
        raise ValueError(f"frame size must be a positive multiple of 4, got {n}")
    t = np.arange(n)
    cols = [np.full(n, np.sqrt(1.0 / n))]
    freqs = [0]
    for k in range(1, n // 2):
        w = 2.0 * np.pi * k * t / n
        cols.append(np.sqrt(2.0 / n) * np.cos(w))
        cols.append(np.sqrt(2.0 / n) * np.sin(w))
        freqs.extend((k, k))
    cols.append(np.sqrt(1.0 / n) * (-1.0) ** t)
    freqs.append(n // 2)
    return np.column_stack(cols), np.asarray(freqs)


@dataclass(frozen=True)
class TransformFamily:
    """Four orthogonal N x N/4 blocks partitioning the trig eigenbasis.

    ``matrices[v]`` holds block v and ``freq_assignment[v][j]`` the frequency
    index of its j-th column, so that for any circulant channel C the block
    Gram matrices H_v^T C^T C H_v are diagonal with entries |H(k)|^2.
    """

    n: int
    matrices: tuple[np.ndarray, ...]
    freq_assignment: tuple[np.ndarray, ...]

    def stream_gains(self, h: np.ndarray) -> np.ndarray:
        """diag(Lambda_v) for all four streams: |H(k)|^2 at each assigned k, shape (4, N/4)."""
        hk = channel_frequency_response(h, self.n)
        power = np.abs(hk) ** 2
        return np.stack([power[f] for f in self.freq_assignment])

    def synthesize(self, symbols: np.ndarray) -> np.ndarray:
        """Map per-stream symbol blocks (..., 4, N/4) to time frames (..., 4, N)."""
        symbols = np.asarray(symbols, dtype=float)
        return np.stack(
            [symbols[..., v, :] @ self.matrices[v].T for v in range(4)], axis=-2
        )

    def analyze(self, frame: np.ndarray) -> np.ndarray:
        """Project time frames (..., N) onto all four blocks, giving (..., 4, N/4)."""
        frame = np.asarray(frame, dtype=float)
        return np.stack([frame @ self.matrices[v] for v in range(4)], axis=-2)


def build_qct_family(n: int, assignment_policy: str = "round_robin") -> TransformFamily:
    """Partition the trig eigenbasis into four disjoint N/4-column transform blocks.

    ``round_robin`` deals the frequency-sorted columns cyclically across the
    four streams; ``blocked`` gives each stream a contiguous run of columns.
    """
    basis, freqs = trig_eigenbasis(n)
    idx = np.arange(n)
    if assignment_policy == "round_robin":
        groups = [idx[v::4] for v in range(4)]
    elif assignment_policy == "blocked":
        groups = [idx[v * (n // 4):(v + 1) * (n // 4)] for v in range(4)]
    else:
        raise ValueError(
            f"unknown assignment policy {assignment_policy!r}; choose from {ASSIGNMENT_POLICIES}"
        )
    return TransformFamily(
        n=n,
        matrices=tuple(basis[:, g] for g in groups),
        freq_assignment=tuple(freqs[g] for g in groups),
    )


def papr_db(x: np.ndarray) -> float:
    """Peak-to-average power ratio 10*log10(max x^2 / mean x^2) of a real frame."""
    x = np.asarray(x, dtype=float).reshape(-1)
    p = x * x
    mean = p.mean()
    if x.size == 0 or mean == 0.0:
        raise ValueError("PAPR is undefined for an all-zero frame")
    return float(10.0 * np.log10(p.max() / mean))
