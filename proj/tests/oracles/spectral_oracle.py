"""Reference spectra for the twisted operators on the square torus of area 2 pi.

Builds the matrices of the (0,1)-form Laplacian directly in numpy (independent of
the C++ code) and prints its lowest eigenvalues, plus the dbar symbol of a plane wave.
Sections are stored as s[j, k] with x = j/N, y = k/N; the y-shift multiplier is
exp(-2 pi i delta x) and the connection is 2 pi i delta y dx.
"""
import numpy as np


def dx(s, d):
    n = s.shape[0]
    m = np.fft.fftfreq(n, 1.0 / n)
    y = np.arange(n) / n
    return np.fft.ifft(2j * np.pi * m[:, None] * np.fft.fft(s, axis=0), axis=0) + 2j * np.pi * d * y[None, :] * s


def dy(s, d):
    n = s.shape[0]
    m = np.fft.fftfreq(n, 1.0 / n)
    x = np.arange(n) / n
    theta = -2 * np.pi * d * x
    phase = np.exp(1j * theta[:, None] * (np.arange(n) / n)[None, :])
    q = np.fft.fft(s / phase, axis=1)
    return np.fft.ifft(1j * (2 * np.pi * m[None, :] + theta[:, None]) * q, axis=1) * phase


def form_laplacian(s, d):
    return -(dx(dx(s, d), d) + dy(dy(s, d), d)) / (4 * np.pi) + 0.5 * d * s


def lowest(n, d, count=6):
    a = np.zeros((n * n, n * n), complex)
    for i in range(n * n):
        e = np.zeros(n * n, complex)
        e[i] = 1
        a[:, i] = form_laplacian(e.reshape(n, n), d).ravel()
    return np.sort(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T))))[:count]


if __name__ == "__main__":
    n = 16
    for d in (-2, 0, 1):
        print("delta", d, "lowest", np.round(lowest(n, d), 10))
    x = np.arange(32) / 32
    f = np.exp(2j * np.pi * (x[:, None] + x[None, :]))
    ratio = ((dx(f, 0) + 1j * dy(f, 0)) / (2 * np.sqrt(np.pi)) / f).mean()
    print("dbar e^{2 pi i (x+y)} / e^{2 pi i (x+y)} =", ratio, "vs sqrt(pi)(-1+i) =", np.sqrt(np.pi) * (-1 + 1j))
