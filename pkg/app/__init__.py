"""fcflow: Fourier-continuation Euler solver on overlapping patches."""
