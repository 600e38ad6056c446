"""Discrete-time downlink snapshot simulator.

One-second steps: Poisson call arrivals, strongest-pilot cell selection with
signal/capacity admission, soft-reuse PRB allocation (worst pilot quality
gets the protected band first), per-PRB SINR and stepped-Shannon rates,
file-transfer bookkeeping, and running estimation of the inter-cell
interference coupling matrix.

Everything is driven by one seeded generator in a fixed order, so a given
(config, seed) pair reproduces bit-identical trajectories. State carries
over between steps: ongoing transfers persist, positions and shadowing are
frozen at arrival (no mobility).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import PRB_BANDWIDTH_HZ, received_power_dbm

RSRP_ADMISSION_DBM = -104.0

# stepped truncated-Shannon link table: efficiency 0.75*log2(1+sinr) capped
# at 4.8 bit/s/Hz, rounded to 15 equal steps, zero below the outage floor
LINK_EFFICIENCY_CAP = 4.8
LINK_BANDWIDTH_FACTOR = 0.75
LINK_STEPS = 15
LINK_OUTAGE_FLOOR_DB = -6.5


def quality_metric(pilot_powers_mw, serving, noise_mw):
    """Pilot quality: serving pilot over the sum of all other pilots plus
    noise, linear scale."""
    total = float(np.sum(pilot_powers_mw))
    own = float(pilot_powers_mw[serving])
    return own / (total - own + noise_mw)


def admit(rsrp_dbm, free_prbs):
    """True iff the pilot is strictly above -104 dBm and a PRB is free."""
    return rsrp_dbm > RSRP_ADMISSION_DBM and free_prbs >= 1


def throughput(sinr_db, n_prbs):
    """Bits/second over n_prbs PRBs at a common SINR."""
    return n_prbs * _prb_rate(sinr_db)


def _prb_rate(sinr_db):
    if sinr_db < LINK_OUTAGE_FLOOR_DB:
        return 0.0
    eff = LINK_BANDWIDTH_FACTOR * math.log2(1.0 + 10.0 ** (sinr_db / 10.0))
    eff = min(eff, LINK_EFFICIENCY_CAP)
    step = LINK_EFFICIENCY_CAP / LINK_STEPS
    return PRB_BANDWIDTH_HZ * round(eff / step) * step


@dataclass
class UserSession:
    id: int
    serving_enb: int
    position: tuple
    remaining_bits: float
    quality: float  # pilot quality ratio, fixed at arrival (no mobility)
    arrival_time: int
    rx_mw_full: np.ndarray  # full-power received signal per eNB, milliwatts
    allocated_prbs: list = field(default_factory=list)  # flat PRB indices


@dataclass
class EnbCounters:
    arrivals: int = 0
    blocks: int = 0
    completions: int = 0


@dataclass
class SimState:
    time: int = 0
    next_session_id: int = 0
    active: list = field(default_factory=list)  # UserSession
    counters: dict = field(default_factory=dict)  # eNB id -> EnbCounters
    completion_log: list = field(default_factory=list)  # (time, enb, transfer_s)
    interference_mw_s: np.ndarray = None  # running sum, shape (n, n)
    interference_seconds: int = 0
    rng: np.random.Generator = None

    def counters_for(self, enb_id):
        return self.counters.setdefault(enb_id, EnbCounters())

    def sessions_at(self, enb_id):
        return [s for s in self.active if s.serving_enb == enb_id]

    def reset_window(self, n_enbs):
        """Forget pre-warmup KPI history; does not touch the rng."""
        self.counters = {}
        self.completion_log = []
        self.interference_mw_s = np.zeros((n_enbs, n_enbs))
        self.interference_seconds = 0


def new_state(layout, seed):
    n = layout.n_enbs
    return SimState(
        interference_mw_s=np.zeros((n, n)),
        rng=np.random.default_rng(seed),
    )


@dataclass(frozen=True)
class KpiReport:
    """Per-eNB KPIs over one accumulation window. Missing values (no
    arrivals / no completions) are None, not zero."""

    arrivals: dict
    blocks: dict
    completions: dict
    bcr_pct: dict  # eNB id -> float | None
    ftt_s: dict  # eNB id -> float | None

    def mean_bcr(self):
        vals = [v for v in self.bcr_pct.values() if v is not None]
        return float(np.mean(vals)) if vals else None

    def mean_ftt(self):
        vals = [v for v in self.ftt_s.values() if v is not None]
        return float(np.mean(vals)) if vals else None


@dataclass(frozen=True)
class InterferenceMatrix:
    """Time-averaged downlink coupling: element (c, j) is the average total
    power received by cell c's users from cell j's occupied PRBs, in
    milliwatts. Diagonal unused."""

    ids: tuple
    values: np.ndarray

    def at(self, c, j):
        return float(self.values[self.ids.index(c), self.ids.index(j)])

    def row(self, c, cols):
        return {j: self.at(c, j) for j in cols}


def estimate_interference_matrix(state, ids):
    """Average the accumulated coupling sums over the elapsed window."""
    if state.interference_seconds <= 0:
        raise ValueError("interference accumulation window is empty")
    values = state.interference_mw_s / float(state.interference_seconds)
    np.fill_diagonal(values, 0.0)
    return InterferenceMatrix(ids=tuple(ids), values=values)


def _draw_position(rng, layout, enb):
    # uniform over the spawning cell's bounded Voronoi region: rejection
    # sample from the cell-radius disk until the spawner is the nearest eNB
    positions = layout.positions()
    centre = np.asarray(enb.position)
    for _ in range(1000):
        r = layout.cell_radius * math.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        p = centre + np.array([r * math.cos(phi), r * math.sin(phi)])
        d2 = ((positions - p) ** 2).sum(axis=1)
        if int(np.argmin(d2)) == enb.id:
            return (float(p[0]), float(p[1]))
    return (float(centre[0]), float(centre[1]))


def _rx_mw_full(position, layout, prop, rng):
    # full-power per-PRB received signal from every eNB, shadowing drawn
    # once per (user, eNB) and frozen for the session's lifetime
    shadow = rng.normal(0.0, prop.shadowing_stddev_db, size=layout.n_enbs)
    rx = np.empty(layout.n_enbs)
    for e in layout.enbs:
        d = math.dist(position, e.position)
        rx[e.id] = received_power_dbm(e.max_power_dbm, d, shadow[e.id], prop)
    return 10.0 ** (rx / 10.0)


def allocate_prbs(sessions, enb, traffic):
    """PRB allocation for one eNB and one step.

    Counts: every session gets the guaranteed minimum (granted worst pilot
    quality first while capacity lasts); leftovers top sessions up to the
    maximum in arrival order. PRBs: worst-quality sessions draw from the
    protected subband first, then the centre subbands. Returns
    {session id: [flat PRB index, ...]}; sessions may come out empty-handed
    and simply stall this step.
    """
    by_quality = sorted(sessions, key=lambda s: (s.quality, s.arrival_time, s.id))
    remaining = enb.total_prbs
    counts = {}
    for s in by_quality:
        grant = traffic.min_prbs_per_user if remaining >= traffic.min_prbs_per_user else 0
        counts[s.id] = grant
        remaining -= grant
    for s in sorted(sessions, key=lambda s: (s.arrival_time, s.id)):
        if counts[s.id] == 0 or remaining == 0:
            continue
        extra = min(traffic.max_prbs_per_user - counts[s.id], remaining)
        counts[s.id] += extra
        remaining -= extra

    per = enb.prbs_per_subband
    protected = list(range(enb.protected_subband * per, (enb.protected_subband + 1) * per))
    centre = [i for i in range(enb.total_prbs) if i not in protected]
    pool = protected + centre
    alloc = {}
    idx = 0
    for s in by_quality:
        alloc[s.id] = pool[idx:idx + counts[s.id]]
        idx += counts[s.id]
    return alloc


def _tx_scale(enb, flat_prb):
    # protected subband transmits at full power, centre subbands at alpha*P
    subband = flat_prb // enb.prbs_per_subband
    return 1.0 if subband == enb.protected_subband else enb.alpha


def sinr_per_prb(session, flat_prb, layout, occupied, noise_mw):
    """SINR (dB) of one allocated PRB. `occupied[j]` is the set of flat PRB
    indices eNB j transmits on this step; only co-channel occupants
    interfere, at their band's power scaling."""
    s = session.serving_enb
    signal = session.rx_mw_full[s] * _tx_scale(layout.enbs[s], flat_prb)
    interference = 0.0
    for e in layout.enbs:
        if e.id == s or flat_prb not in occupied[e.id]:
            continue
        interference += session.rx_mw_full[e.id] * _tx_scale(e, flat_prb)
    return 10.0 * math.log10(signal / (interference + noise_mw))


def step(state, layout, prop, traffic):
    """Advance the snapshot by one second (in place; returns the state).

    Arrivals -> admission -> PRB reallocation -> per-PRB SINR and service ->
    completions -> coupling accumulation. Per-eNB alpha values are read from
    the layout, so callers retune by swapping the layout between steps.
    """
    rng = state.rng
    noise_mw = prop.noise_mw

    # arrivals, spawned per cell in id order, served by the strongest pilot
    for enb in layout.enbs:
        for _ in range(rng.poisson(traffic.rate_for(enb.id))):
            position = _draw_position(rng, layout, enb)
            rx_full = _rx_mw_full(position, layout, prop, rng)
            serving = int(np.argmax(rx_full))
            rsrp_dbm = 10.0 * math.log10(rx_full[serving])
            counters = state.counters_for(serving)
            counters.arrivals += 1
            free = layout.enbs[serving].total_prbs - len(state.sessions_at(serving))
            if not admit(rsrp_dbm, free):
                counters.blocks += 1
                continue
            state.active.append(UserSession(
                id=state.next_session_id,
                serving_enb=serving,
                position=position,
                remaining_bits=traffic.file_bits,
                quality=quality_metric(rx_full, serving, noise_mw),
                arrival_time=state.time,
                rx_mw_full=rx_full,
            ))
            state.next_session_id += 1

    # reallocate PRBs per eNB
    occupied = [set() for _ in layout.enbs]
    for enb in layout.enbs:
        sessions = state.sessions_at(enb.id)
        alloc = allocate_prbs(sessions, enb, traffic)
        for s in sessions:
            s.allocated_prbs = alloc[s.id]
            occupied[enb.id].update(alloc[s.id])

    # serve: per-PRB SINR -> stepped rate -> drain the file
    finished = []
    for s in state.active:
        rate = 0.0
        for prb in s.allocated_prbs:
            rate += _prb_rate(sinr_per_prb(s, prb, layout, occupied, noise_mw))
        s.remaining_bits -= rate  # one second of service
        if s.remaining_bits <= 0.0:
            finished.append(s)

    # coupling accumulation: received power at each active user from every
    # other eNB's occupied PRBs (same pathloss on every PRB, so occupied
    # counts per band suffice)
    n_protected = np.empty(layout.n_enbs)
    n_centre = np.empty(layout.n_enbs)
    alphas = layout.alphas()
    for e in layout.enbs:
        per = e.prbs_per_subband
        lo, hi = e.protected_subband * per, (e.protected_subband + 1) * per
        npro = sum(1 for p in occupied[e.id] if lo <= p < hi)
        n_protected[e.id] = npro
        n_centre[e.id] = len(occupied[e.id]) - npro
    emitted = n_protected + alphas * n_centre  # per-eNB occupied-power factor
    for s in state.active:
        contrib = s.rx_mw_full * emitted
        contrib[s.serving_enb] = 0.0
        state.interference_mw_s[s.serving_enb] += contrib
    state.interference_seconds += 1

    # completions leave; transfer time spans arrival to the end of this step
    state.time += 1
    for s in finished:
        state.counters_for(s.serving_enb).completions += 1
        state.completion_log.append((state.time, s.serving_enb, state.time - s.arrival_time))
        state.active.remove(s)
    return state


def kpi_report(state, ids):
    arrivals, blocks, completions, bcr, ftt = {}, {}, {}, {}, {}
    transfer = {i: [] for i in ids}
    for _, enb, seconds in state.completion_log:
        transfer[enb].append(seconds)
    for i in ids:
        c = state.counters_for(i)
        arrivals[i], blocks[i], completions[i] = c.arrivals, c.blocks, c.completions
        bcr[i] = 100.0 * c.blocks / c.arrivals if c.arrivals > 0 else None
        ftt[i] = float(np.mean(transfer[i])) if transfer[i] else None
    return KpiReport(arrivals, blocks, completions, bcr, ftt)


def run_episode(layout, prop, traffic, duration=2500, warmup=500, seed=0):
    """Run one seeded episode; KPIs and the coupling matrix are averaged
    over [warmup, duration). Returns (KpiReport, InterferenceMatrix)."""
    if not warmup < duration:
        raise ValueError("warmup must be shorter than duration")
    state = new_state(layout, seed)
    for _ in range(warmup):
        step(state, layout, prop, traffic)
    state.reset_window(layout.n_enbs)
    for _ in range(duration - warmup):
        step(state, layout, prop, traffic)
    ids = [e.id for e in layout.enbs]
    return kpi_report(state, ids), estimate_interference_matrix(state, ids)
