"""Band gaps and localised defect modes of one-dimensional periodic media.

The solvers work with the state ``(u, u')`` of ``u'' + (omega r(x))^2 u = 0``
and 2x2 transfer matrices.  See the submodules:

``medium``     media, presets and JSON description files
``transfer``   segment and cell transfer matrices, gap eigenpairs
``spectrum``   dispersion scans, band edges and gaps
``defect``     defect matrices, mode frequencies and profiles
``hfh``        homogenised envelopes about band edges
``design``     dislocation sweeps and inverse (rainbow) design
"""

__version__ = "0.1.0"
