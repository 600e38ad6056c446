"""Network geometry, radio configuration and propagation.

Single source of truth for an experiment's physical constants. Everything
here is a pure value type or a pure function; instances can be shared
freely across threads.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

# LTE constants: 5 MHz system bandwidth carved into 24 PRBs of 180 kHz.
PRB_BANDWIDTH_HZ = 180e3
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class EnbConfig:
    """One base station. `alpha` scales the centre-band transmit power;
    the protected subband always transmits at full `max_power_dbm` per PRB.
    """

    id: int
    position: tuple  # (x, y) metres
    max_power_dbm: float = 30.0  # per PRB
    alpha: float = 0.5
    total_prbs: int = 24
    prbs_per_subband: int = 8
    protected_subband: int = 0  # 0..2, reuse-3 colouring set by the grid builder

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.total_prbs != 3 * self.prbs_per_subband:
            raise ConfigError(
                f"total_prbs ({self.total_prbs}) must equal 3 x prbs_per_subband "
                f"({self.prbs_per_subband})"
            )
        if not 0 <= self.protected_subband <= 2:
            raise ConfigError(f"protected_subband must be 0..2, got {self.protected_subband}")


@dataclass(frozen=True)
class NetworkLayout:
    enbs: tuple  # tuple of EnbConfig
    inter_site_distance: float
    cell_radius: float

    def __post_init__(self):
        if len(self.enbs) < 7:
            raise ConfigError(f"need at least 7 eNBs (centre plus first tier), got {len(self.enbs)}")
        pos = {e.position for e in self.enbs}
        if len(pos) != len(self.enbs):
            raise ConfigError("eNB positions must be pairwise distinct")

    @property
    def n_enbs(self):
        return len(self.enbs)

    def positions(self):
        return np.array([e.position for e in self.enbs], dtype=float)

    def alphas(self):
        return np.array([e.alpha for e in self.enbs], dtype=float)

    def with_alphas(self, alphas):
        """New layout with per-eNB alpha values (array or mapping id -> alpha)."""
        if isinstance(alphas, dict):
            enbs = tuple(
                replace(e, alpha=float(alphas.get(e.id, e.alpha))) for e in self.enbs
            )
        else:
            enbs = tuple(replace(e, alpha=float(a)) for e, a in zip(self.enbs, alphas))
        return replace(self, enbs=enbs)

    def neighbours_within(self, enb_id, radius):
        centre = np.array(self.enbs[enb_id].position)
        out = []
        for e in self.enbs:
            if e.id == enb_id:
                continue
            if math.dist(e.position, centre) <= radius:
                out.append(e.id)
        return out

    def first_tier(self, enb_id):
        return self.neighbours_within(enb_id, 1.1 * self.inter_site_distance)

    def second_tier(self, enb_id):
        tier1 = set(self.first_tier(enb_id))
        within2 = self.neighbours_within(enb_id, 2.1 * self.inter_site_distance)
        return [j for j in within2 if j not in tier1]


@dataclass(frozen=True)
class PropagationParams:
    """Log-distance pathloss PL(d) = intercept + coeff * log10(d metres).

    The defaults reproduce the urban-macro curve 128.1 + 37.6*log10(d/1 km):
    128.1 - 37.6*3 = 15.3 dB at the 1 m reference.
    """

    pathloss_intercept_db: float = 15.3
    pathloss_per_decade_db: float = 37.6
    shadowing_stddev_db: float = 8.0
    noise_dbm_per_prb: float = -121.45  # thermal noise over one 180 kHz PRB

    def __post_init__(self):
        if self.shadowing_stddev_db < 0:
            raise ConfigError("shadowing_stddev_db must be >= 0")
        if self.pathloss_per_decade_db < 0:
            raise ConfigError("pathloss must be monotone non-decreasing in distance")

    @property
    def noise_mw(self):
        return 10.0 ** (self.noise_dbm_per_prb / 10.0)


@dataclass(frozen=True)
class TrafficParams:
    arrival_rate: float = 1.0  # Poisson calls/second/cell
    file_size_kbits: float = 6300.0
    min_prbs_per_user: int = 1
    max_prbs_per_user: int = 4
    # optional per-eNB arrival-rate multipliers (hotspots); keys are eNB ids
    rate_multipliers: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.min_prbs_per_user <= self.max_prbs_per_user:
            raise ConfigError("need 1 <= min_prbs_per_user <= max_prbs_per_user")
        if self.arrival_rate < 0:
            raise ConfigError("arrival_rate must be >= 0")

    @property
    def file_bits(self):
        return self.file_size_kbits * 1e3

    def rate_for(self, enb_id):
        return self.arrival_rate * float(self.rate_multipliers.get(enb_id, 1.0))


def hex_ring_count(rings):
    return 1 + 3 * rings * (rings + 1)


def build_hex_grid(rings, inter_site_distance, defaults=None, cell_radius=None):
    """Hexagonal lattice of 1 + 3*r*(r+1) eNBs; centre eNB has id 0.

    Subbands are reuse-3 coloured so adjacent cells never protect the same
    subband. `defaults` is an EnbConfig template supplying power/alpha/PRBs.
    """
    if rings < 1:
        raise ConfigError(f"rings must be >= 1, got {rings}")
    if defaults is None:
        defaults = EnbConfig(id=0, position=(0.0, 0.0))
    isd = float(inter_site_distance)
    a1 = (isd, 0.0)
    a2 = (isd * 0.5, isd * math.sqrt(3.0) / 2.0)
    coords = [(0, 0)]
    for r in range(1, rings + 1):
        ring = []
        for i in range(-r, r + 1):
            for j in range(-r, r + 1):
                if max(abs(i), abs(j), abs(i + j)) == r:
                    ring.append((i, j))
        ring.sort(key=lambda ij: math.atan2(ij[0] * a1[1] + ij[1] * a2[1],
                                            ij[0] * a1[0] + ij[1] * a2[0]) % (2 * math.pi))
        coords.extend(ring)
    enbs = []
    for idx, (i, j) in enumerate(coords):
        pos = (i * a1[0] + j * a2[0], i * a1[1] + j * a2[1])
        colour = (i - j) % 3
        enbs.append(replace(defaults, id=idx, position=pos, protected_subband=colour))
    radius = cell_radius if cell_radius is not None else isd / math.sqrt(3.0)
    return NetworkLayout(enbs=tuple(enbs), inter_site_distance=isd, cell_radius=radius)


def pathloss_db(distance, params):
    """Pathloss in dB at `distance` metres, clamped below MIN_DISTANCE_M."""
    d = max(float(distance), MIN_DISTANCE_M)
    return params.pathloss_intercept_db + params.pathloss_per_decade_db * math.log10(d)


def received_power_dbm(tx_power_dbm, distance, shadowing_db, params):
    return tx_power_dbm - pathloss_db(distance, params) + shadowing_db
