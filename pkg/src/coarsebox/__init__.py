"""coarsebox: desk-scale box spaces, coarse maps between finite quotients,
Gromov-Hausdorff and Prokhorov diagnostics, and measured-coupling evidence."""

__version__ = "0.1.0"
