"""Physical parameters and discrete-mode definitions of the aerial cable system."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

from .errors import ConfigurationError


class Mode(enum.IntEnum):
    """Discrete state of the hybrid system: free cable tip or slung payload."""

    FREE = 0
    SLUNG = 1


@dataclass(frozen=True)
class CableParams:
    """Physical and geometric constants of the cable, UAV, and payload.

    Defaults are the desk-scale values used throughout the experiments
    (SI units everywhere).
    """

    L: float = 1.0            # rest length [m]
    N: int = 100              # interior division count (N+1 nodes)
    rho_c: float = 1.27e3     # cable density [kg/m^3]
    A: float = 7.85e-5        # cross-section area [m^2]
    E_mod: float = 1e5        # Young modulus [Pa]
    b_c: float = 1.29e-2      # cable drag coefficient [kg/m^2]
    m_b: float = 0.3          # UAV mass [kg]
    m_p: float = 0.1          # payload mass [kg]
    b_p: float = 1.29e-2      # payload drag coefficient [kg/m]
    g0: float = 9.81          # gravity [m/s^2]

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "N":
                if not (isinstance(v, int) and v >= 2):
                    raise ConfigurationError(f"N must be an integer >= 2, got {v!r}")
            elif f.name == "g0":
                if v < 0.0:
                    raise ConfigurationError("g0 must be non-negative")
            elif not v > 0.0:
                raise ConfigurationError(f"{f.name} must be strictly positive, got {v!r}")

    @property
    def h_s(self) -> float:
        """Fine grid step L/N [m]."""
        return self.L / self.N

    @property
    def rho_lin(self) -> float:
        """Linear mass density rho_c * A [kg/m]."""
        return self.rho_c * self.A

    @property
    def EA(self) -> float:
        """Axial stiffness E * A [N]."""
        return self.E_mod * self.A

    def replace(self, **kw) -> "CableParams":
        from dataclasses import replace

        return replace(self, **kw)
