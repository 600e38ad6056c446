"""Automated healing of poorly performing cells in a soft-reuse downlink
network: snapshot simulation, KPI curve learning, and constrained tuning of
the centre-band power factor, exposed as an HTTP service with a CLI client.
"""

__version__ = "0.1.0"
