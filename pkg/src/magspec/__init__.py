"""Semiclassical eigenvalue asymptotics of the magnetic Neumann Laplacian.

Modules
-------
model1d    half-line de Gennes model and its universal constants
geometry   boundary curves, curvature profile, boundary-coordinate metric
effective  closed-form expansions, gap, variational bound, oscillator levels
solver2d   boundary-strip and disc eigensolvers
harness    h-sweeps, fits, trial states, reports
cli        command line entry point
"""

__version__ = "0.1.0"
