"""Survivability simulator for elastic optical networks.

Models optical node switch fabrics at component level (wavelength-selective
switches, splitters, variable optical splitters, combiners, crossbars and
transceivers), three protection modes (dedicated, shared, pre-configured
shared backup), and the blocking/spectrum consequences of fabric limits.
"""

__version__ = "0.1.0"
