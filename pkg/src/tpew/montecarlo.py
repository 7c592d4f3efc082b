"""Monte Carlo trajectory oracle.

Each trajectory carries pure states only: the environment branch of every
damping channel, Alice's outcome and Bob's weak-measurement click are
sampled one after another by inverse-CDF over the exact branch
probabilities of the current state.  Nothing here uses density matrices or
partial traces, so agreement with :mod:`tpew.protocols` is a genuine
cross-check.

Random numbers come from a counter-based SplitMix64 stream: draw ``j`` of
trajectory ``t`` is output number ``t * DRAWS_PER_TRAJECTORY + j`` of a
SplitMix64 generator seeded with ``seed``.  Any implementation of SplitMix64
reproduces the same stream, and chunks can be evaluated in any order.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channels import CORRECTIONS, adc, lift, wm_operator
from .protocols import StrengthWarning, canonical, run
from .states import Ket, bell_basis, bell_state, eta_basis, w_state

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
DRAWS_PER_TRAJECTORY = 8
DEFAULT_CHUNK = 1 << 16


def splitmix64(seed: int, counters) -> np.ndarray:
    """SplitMix64 outputs number ``counters`` (0-based) for a generator seeded with ``seed``."""
    c = np.asarray(counters, dtype=np.uint64)
    z = np.uint64(seed & MASK64) + (c + np.uint64(1)) * np.uint64(GOLDEN_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, counters) -> np.ndarray:
    """Doubles in [0, 1) from the top 53 bits of each SplitMix64 output."""
    return (splitmix64(seed, counters) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class TrajectoryConfig:
    protocol: str
    r: float
    q: float = 0.0
    n_trajectories: int = 100_000
    seed: int = 0
    alpha: Optional[complex] = None
    beta: Optional[complex] = None
    measure: str = "amplitude"
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be at least 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if (self.alpha is None) != (self.beta is None):
            raise ValueError("give both alpha and beta, or neither for random inputs")
        if self.measure not in ("amplitude", "population"):
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if not 0.0 <= self.r <= 1.0 or not 0.0 <= self.q <= 1.0:
            raise ValueError("r and q must lie in [0, 1]")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    standard_error: float
    n_accepted: int
    n_total: int

    def within(self, target: float, n_se: float = 5.0, floor: float = 1e-12) -> bool:
        return abs(self.mean - target) <= n_se * self.standard_error + floor


@dataclass(frozen=True, eq=False)
class _Model:
    env_probs: np.ndarray  # (K,)
    accept: Optional[int]  # index of the kept environment branch, None without a check
    bob_maps: np.ndarray  # (K, 4, 2, 2): input ket -> Bob's unnormalized ket
    corrections: np.ndarray  # (4, 2, 2)


_SETUPS = {
    "tp-ew-w": (w_state, [2], "e0", eta_basis, "sqrt"),
    "tp-ew-bell": (bell_state, [1], "e0", bell_basis, "sqrt"),
    "ctp-w": (w_state, [0, 1, 2], "e0_e0_e0", eta_basis, None),
    "ctp-bell": (bell_state, [0, 1], "e0_e0", bell_basis, "linear"),
    "original-w": (w_state, [2], None, eta_basis, None),
    "original-bell": (bell_state, [1], None, bell_basis, None),
    "original-cw": (w_state, [0, 1, 2], None, eta_basis, None),
    "original-cb": (bell_state, [0, 1], None, bell_basis, None),
}

PROTOCOLS = tuple(_SETUPS)


def _build_model(protocol: str, r: float, q: float) -> _Model:
    try:
        make_shared, targets, accept, make_basis, variant = _SETUPS[protocol]
    except KeyError:
        raise ValueError(f"no trajectory model for protocol {protocol!r}") from None
    shared: Ket = make_shared()
    n_s = shared.n_qubits
    channel = lift(adc(r), targets, n_s)
    basis = make_basis()

    probs, maps = [], []
    for k in channel.operators:
        phi = k @ shared.amplitudes
        p = float(np.vdot(phi, phi).real)
        probs.append(p)
        phi_hat = phi / math.sqrt(p) if p > 0 else phi
        per_outcome = np.zeros((4, 2, 2), dtype=complex)
        for c in range(2):
            e_c = np.zeros(2, dtype=complex)
            e_c[c] = 1.0
            # rows: input qubit + Alice's shared qubits, columns: Bob's qubit
            total = np.kron(e_c, phi_hat).reshape(-1, 2)
            for i, b in enumerate(basis):
                per_outcome[i, :, c] = b.amplitudes.conj() @ total
        maps.append(per_outcome)

    if variant is None:
        corrections = np.array(CORRECTIONS)
    else:
        corrections = np.array([wm_operator(q, i, variant).operator for i in (1, 2, 3, 4)])
    accept_idx = None if accept is None else channel.labels.index(accept)
    return _Model(np.array(probs), accept_idx, np.array(maps), corrections)


def _inverse_cdf(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sample row-wise categorical indices; rows of ``weights`` need not be normalized."""
    cdf = np.cumsum(weights, axis=-1)
    target = u * cdf[..., -1]
    idx = (cdf <= target[..., None]).sum(axis=-1)
    return np.minimum(idx, weights.shape[-1] - 1)


_QUANTITIES = (
    ["eam_probability", "conditional_success", "unconditional_success", "average_fidelity"]
    + [f"p_{i}" for i in (1, 2, 3, 4)]
    + [f"fidelity_{i}" for i in (1, 2, 3, 4)]
)


def _moments(values: np.ndarray, mask: np.ndarray) -> tuple[int, float, float]:
    v = values[mask]
    n = int(v.size)
    if n == 0:
        return 0, 0.0, 0.0
    mean = float(v.mean())
    m2 = float(np.sum((v - mean) ** 2))
    return n, mean, m2


def _run_chunk(args) -> tuple[dict, dict]:
    config, model, start, stop = args
    m = stop - start
    counters = (np.arange(start, stop, dtype=np.uint64)[:, None] * np.uint64(DRAWS_PER_TRAJECTORY)
                + np.arange(DRAWS_PER_TRAJECTORY, dtype=np.uint64)[None, :])
    u = uniforms(config.seed, counters)

    if config.alpha is None:
        if config.measure == "amplitude":
            mag_a = u[:, 0]
            mag_b = np.sqrt(np.clip(1.0 - mag_a**2, 0.0, None))
        else:
            mag_a = np.sqrt(u[:, 0])
            mag_b = np.sqrt(1.0 - u[:, 0])
        psi = np.stack(
            [mag_a * np.exp(2j * np.pi * u[:, 1]), mag_b * np.exp(2j * np.pi * u[:, 2])], axis=1
        )
    else:
        a, b = complex(config.alpha), complex(config.beta)
        norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        psi = np.broadcast_to(np.array([a, b]) / norm, (m, 2))

    env = _inverse_cdf(np.broadcast_to(model.env_probs, (m, model.env_probs.size)), u[:, 3])
    accepted = np.ones(m, dtype=bool) if model.accept is None else env == model.accept

    bob_all = np.einsum("mkab,mb->mka", model.bob_maps[env], psi)  # (m, 4, 2)
    outcome_w = np.sum(np.abs(bob_all) ** 2, axis=-1)
    outcome = _inverse_cdf(outcome_w, u[:, 4])
    bob = bob_all[np.arange(m), outcome]
    after = np.einsum("mab,mb->ma", model.corrections[outcome], bob)
    norm_before = np.sum(np.abs(bob) ** 2, axis=-1)
    norm_after = np.sum(np.abs(after) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        click_p = np.where(norm_before > 0, norm_after / norm_before, 0.0)
        fid = np.abs(np.sum(psi.conj() * after, axis=-1)) ** 2 / norm_after
    fid = np.where(norm_after > 0, fid, np.nan)
    click = u[:, 5] < click_p

    everyone = np.ones(m, dtype=bool)
    good = accepted & np.isfinite(fid)
    stats = {
        "eam_probability": _moments(accepted.astype(float), everyone),
        "conditional_success": _moments(click.astype(float), accepted),
        "unconditional_success": _moments((accepted & click).astype(float), everyone),
        "average_fidelity": _moments(fid, good),
    }
    hits = {}
    for i in (1, 2, 3, 4):
        is_i = outcome == i - 1
        stats[f"p_{i}"] = _moments(is_i.astype(float), accepted)
        stats[f"fidelity_{i}"] = _moments(fid, good & is_i & click)
    for name in ("eam_probability", "conditional_success", "unconditional_success"):
        hits[name] = int(np.count_nonzero({
            "eam_probability": accepted,
            "conditional_success": accepted & click,
            "unconditional_success": accepted & click,
        }[name]))
    for i in (1, 2, 3, 4):
        hits[f"p_{i}"] = int(np.count_nonzero(accepted & (outcome == i - 1)))
    return stats, hits


def _merge(parts: list[tuple[int, float, float]]) -> tuple[int, float, float]:
    """Chan et al. pairwise combination, applied in chunk order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        if n == 0:
            n, mean, m2 = nb, mb, m2b
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def run_trajectories(config: TrajectoryConfig, workers: int = 1) -> dict[str, McEstimate]:
    """Sample ``config.n_trajectories`` trajectories and estimate every protocol quantity.

    ``n_total`` of each estimate is the number of trajectories it averages
    over (all of them, or only those passing the environment check);
    ``n_accepted`` counts the successes for probability-type quantities and
    equals ``n_total`` for fidelity averages.
    """
    protocol = canonical(config.protocol)
    model = _build_model(protocol, config.r, config.q)
    n = config.n_trajectories
    bounds = [(s, min(s + config.chunk_size, n)) for s in range(0, n, config.chunk_size)]
    tasks = [(config, model, s, e) for s, e in bounds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, tasks))
    else:
        results = [_run_chunk(t) for t in tasks]

    out = {}
    for name in _QUANTITIES:
        cnt, mean, m2 = _merge([res[0][name] for res in results])
        if cnt == 0:
            mean, se = math.nan, math.nan
        elif cnt == 1:
            se = 0.0
        else:
            se = math.sqrt(max(m2, 0.0) / (cnt - 1) / cnt)
        if name.startswith("fidelity") or name == "average_fidelity":
            accepted = cnt
        else:
            accepted = sum(res[1][name] for res in results)
        out[name] = McEstimate(mean, se, accepted, cnt)
    return out


def phase_independence_probe(
    protocol: str,
    r: float,
    q: float = 0.0,
    n_phases: int = 100,
    *,
    x: float = 0.3,
    seed: int = 0,
) -> float:
    """Largest change of any branch fidelity or probability when the input amplitudes get random phases."""
    def quantities(alpha, beta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StrengthWarning)
            rep = run(protocol, alpha, beta, r, q)
        if rep.degenerate:
            return np.array([])
        vals = [rep.mean_fidelity_for_input]
        for b in rep.branches:
            vals += [b.conditional_probability, b.wm_success, b.fidelity if b.defined else 0.0]
        return np.array(vals)

    a0, b0 = math.sqrt(x), math.sqrt(1.0 - x)
    ref = quantities(a0, b0)
    u = uniforms(seed, np.arange(2 * n_phases, dtype=np.uint64)).reshape(n_phases, 2)
    worst = 0.0
    for pa, pb in 2 * np.pi * u:
        vals = quantities(a0 * np.exp(1j * pa), b0 * np.exp(1j * pb))
        if vals.size:
            worst = max(worst, float(np.max(np.abs(vals - ref))))
    return worst
