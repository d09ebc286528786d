"""warmlink: desk-scale simulator of a radiatively cooled microwave quantum link.

Subpackages map onto the physical stack: ``circuit`` models the cable and
coupler impedance network, ``dynamics`` the truncated open-system master
equation, ``protocols`` the time-domain experiments, ``tomography`` the state
and process reconstruction, ``analysis`` the thermodynamic utilities and
fitting, ``cli`` the reproducible experiment runner.
"""

__version__ = "0.1.0"

from . import analysis, circuit, dynamics, engine, protocols, tomography  # noqa: F401
