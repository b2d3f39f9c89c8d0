"""Independent reference implementations used as test oracles.

Everything here is written straight-line from the defining formulas and
deliberately shares no code with the package: the DFT is a direct
summation, the filterbank and DCT are explicit loops.  Slow on purpose.
"""

import numpy as np


def direct_dft_power(frame):
    """One-sided |DFT|^2 of a Hann-windowed frame by direct summation."""
    x = np.asarray(frame, dtype=np.float64)
    n = len(x)
    w = np.array([0.5 - 0.5 * np.cos(2.0 * np.pi * i / n) for i in range(n)])
    xw = x * w
    out = np.empty(n // 2 + 1)
    for k in range(n // 2 + 1):
        angle = -2.0 * np.pi * k * np.arange(n) / n
        re = float(np.sum(xw * np.cos(angle)))
        im = float(np.sum(xw * np.sin(angle)))
        out[k] = re * re + im * im
    return out


def reference_mel_filterbank(n_mel, frame_size, sample_rate, fmin, fmax):
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_points = np.linspace(to_mel(fmin), to_mel(fmax), n_mel + 2)
    hz_points = to_hz(mel_points)
    bins = np.floor((frame_size + 1) * hz_points / sample_rate).astype(int)
    n_bins = frame_size // 2 + 1
    bank = np.zeros((n_mel, n_bins))
    for m in range(1, n_mel + 1):
        lo, center, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo + 1, center + 1):
            bank[m - 1, k] = (k - lo) / (center - lo)
        for k in range(center + 1, hi):
            bank[m - 1, k] = (hi - k) / (hi - center)
    return bank


def reference_mfcc(samples, sample_rate=16000, frame_size=512, hop=160,
                   n_mel=20, n_mfcc=13, fmin=0.0, fmax=8000.0, log_floor=1e-10):
    """Clip-level MFCC vector (frame mean), straight-line float64."""
    x = np.asarray(samples, dtype=np.float64)
    n_frames = (len(x) - frame_size) // hop + 1
    bank = reference_mel_filterbank(n_mel, frame_size, sample_rate, fmin, fmax)

    per_frame = []
    for f in range(n_frames):
        frame = x[f * hop:f * hop + frame_size]
        power = direct_dft_power(frame)
        energies = np.zeros(n_mel)
        for m in range(n_mel):
            energies[m] = float(np.sum(bank[m] * power))
        logs = np.log(np.maximum(energies, log_floor))
        coeffs = np.zeros(n_mfcc)
        for k in range(n_mfcc):
            acc = 0.0
            for j in range(n_mel):
                acc += logs[j] * np.cos(np.pi * k * (2 * j + 1) / (2 * n_mel))
            scale = np.sqrt(1.0 / n_mel) if k == 0 else np.sqrt(2.0 / n_mel)
            coeffs[k] = scale * acc
        per_frame.append(coeffs)
    return np.mean(per_frame, axis=0)


def finite_difference_gradients(loss_fn, arrays, h=1e-3):
    """Central-difference gradient of loss_fn() w.r.t. every array element.

    Mutates each array in place around the evaluation point and restores
    it; arrays must be float64 for the step size to make sense.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = loss_fn()
            flat[i] = orig - h
            minus = loss_fn()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2.0 * h)
        grads.append(g)
    return grads
