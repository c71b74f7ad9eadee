"""Coyote Optimization Algorithm (COA) over a caller-supplied objective.

Candidate solutions ("coyotes") are grouped into packs. Each iteration every
coyote proposes a step pulled toward the pack's best member (the alpha) and
the pack's per-dimension median (the cultural tendency); the step is kept only
if it strictly improves fitness. Each pack additionally breeds one pup per
iteration by crossover of two random parents (replacing the pack's worst
coyote when the pup is strictly better), and occasionally two packs swap a
random member. Minimization is canonical; maximize by negating the objective.

Within one iteration all proposals of a pack are generated from the pack's
state at the start of the iteration, so fitness evaluations could run
concurrently; acceptance and alpha selection are applied in fixed coyote
order, keeping results bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Objective = Callable[[np.ndarray], float]

# chance per iteration that two packs swap one coyote, from the pack size
# (original COA sets it to 0.005 * Nc^2)
_EXCHANGE_RATE = 0.005


@dataclass
class CoaConfig:
    n_packs: int
    n_coyotes_per_pack: int
    dimension: int
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    max_iterations: int
    rng_seed: int = 0

    def __post_init__(self):
        self.lower_bounds = np.asarray(self.lower_bounds, dtype=float)
        self.upper_bounds = np.asarray(self.upper_bounds, dtype=float)
        if self.n_packs < 1:
            raise ValueError("n_packs must be >= 1")
        if self.n_coyotes_per_pack < 3:
            # cr1, cr2 and the updated coyote must be able to differ
            raise ValueError("n_coyotes_per_pack must be >= 3")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        shape = (self.dimension,)
        if self.lower_bounds.shape != shape or self.upper_bounds.shape != shape:
            raise ValueError("bounds must be vectors of length `dimension`")
        if np.any(self.lower_bounds > self.upper_bounds):
            raise ValueError("lower_bounds must not exceed upper_bounds")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class Coyote:
    """One candidate solution: decision vector and its evaluated fitness."""

    social_condition: np.ndarray
    fitness: float


@dataclass
class Pack:
    """A pack of coyotes stored as arrays; alpha_index marks the pack minimum."""

    soc: np.ndarray  # (n_coyotes, dimension)
    fitness: np.ndarray  # (n_coyotes,)
    alpha_index: int = 0

    @property
    def n_coyotes(self) -> int:
        return self.soc.shape[0]

    def coyote(self, c: int) -> Coyote:
        return Coyote(self.soc[c].copy(), float(self.fitness[c]))

    def select_alpha(self) -> int:
        # np.argmin returns the first minimum, so ties go to the lowest index
        self.alpha_index = int(np.argmin(self.fitness))
        return self.alpha_index


@dataclass
class CoaResult:
    best_solution: np.ndarray
    best_fitness: float
    iterations_run: int
    fitness_history: list[float] = field(default_factory=list)


def initialize_population(
    config: CoaConfig,
    objective: Objective,
    rng: Optional[np.random.Generator] = None,
    initial: Optional[Sequence[np.ndarray]] = None,
) -> list[Pack]:
    """Draw the starting population uniformly inside the bounds and evaluate it.

    `initial` optionally injects known starting vectors (clamped to the
    bounds); they overwrite the first coyotes of the first pack before
    evaluation, letting callers warm-start the search.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    lb, ub = config.lower_bounds, config.upper_bounds
    packs = []
    for _ in range(config.n_packs):
        r = rng.random((config.n_coyotes_per_pack, config.dimension))
        packs.append(Pack(soc=lb + r * (ub - lb), fitness=np.empty(config.n_coyotes_per_pack)))
    if initial:
        if len(initial) > config.n_coyotes_per_pack:
            raise ValueError("more initial guesses than coyotes in a pack")
        for i, guess in enumerate(initial):
            packs[0].soc[i] = np.clip(np.asarray(guess, dtype=float), lb, ub)
    for pack in packs:
        for c in range(pack.n_coyotes):
            pack.fitness[c] = objective(pack.soc[c])
        pack.select_alpha()
    return packs


def cultural_tendency(pack: Pack) -> np.ndarray:
    """Per-dimension median of the pack's social conditions."""
    return np.median(pack.soc, axis=0)


def _skip(drawn: np.ndarray, excluded: np.ndarray) -> np.ndarray:
    # map a draw from a shrunk range onto the full range minus `excluded`
    return drawn + (drawn >= excluded)


def update_coyote(
    pack: Pack,
    c: int,
    rng: np.random.Generator,
    config: CoaConfig,
    objective: Objective,
    alpha: Optional[np.ndarray] = None,
    tendency: Optional[np.ndarray] = None,
) -> Coyote:
    """Propose a new social condition for coyote `c` of `pack`.

    Picks two random pack mates cr1, cr2 (distinct from c and from each
    other), steps from c's current condition by r1 * (alpha - soc_cr1)
    + r2 * (tendency - soc_cr2) with per-dimension weights r1, r2 ~ U[0, 1],
    clamps to the bounds and evaluates. The pack itself is not modified.
    """
    nc = pack.n_coyotes
    if alpha is None:
        alpha = pack.soc[pack.alpha_index]
    if tendency is None:
        tendency = cultural_tendency(pack)
    cr1 = int(_skip(rng.integers(0, nc - 1), c))
    lo, hi = min(c, cr1), max(c, cr1)
    cr2 = int(_skip(_skip(rng.integers(0, nc - 2), lo), hi))
    r1, r2 = rng.random((2, config.dimension))
    new_soc = pack.soc[c] + r1 * (alpha - pack.soc[cr1]) + r2 * (tendency - pack.soc[cr2])
    np.clip(new_soc, config.lower_bounds, config.upper_bounds, out=new_soc)
    return Coyote(new_soc, float(objective(new_soc)))


def greedy_accept(current: Coyote, candidate: Coyote) -> Coyote:
    """Keep the candidate only on strict fitness improvement (minimization)."""
    return candidate if candidate.fitness < current.fitness else current


def run(
    config: CoaConfig,
    objective: Objective,
    stop: Optional[Callable[[float], bool]] = None,
    initial: Optional[Sequence[np.ndarray]] = None,
) -> CoaResult:
    """Run the optimization loop and return the global best across packs.

    `stop`, if given, is called with the best-so-far fitness before each
    iteration and ends the run early when it returns True. `initial` seeds
    the starting population (see initialize_population). The returned
    fitness_history holds the best-so-far value after initialization and
    after each completed iteration, and is always non-increasing.
    """
    rng = np.random.default_rng(config.rng_seed)
    packs = initialize_population(config, objective, rng, initial)
    np_, nc, dim = config.n_packs, config.n_coyotes_per_pack, config.dimension
    lb, ub = config.lower_bounds, config.upper_bounds
    soc = np.stack([p.soc for p in packs])  # (np_, nc, dim)
    fit = np.stack([p.fitness for p in packs])  # (np_, nc)

    best_soc, best_fit = _global_best(soc, fit)
    history = [best_fit]

    p_scatter = 1.0 / dim
    p_parent = (1.0 - p_scatter) / 2.0
    p_exchange = min(1.0, _EXCHANGE_RATE * nc * nc)
    cidx = np.arange(nc)
    pidx = np.arange(np_)

    iterations = 0
    for _ in range(config.max_iterations):
        if stop is not None and stop(best_fit):
            break

        # alpha and tendency per pack, frozen for this iteration; the ranked
        # middle is the same median cultural_tendency computes, minus the
        # np.median dispatch cost in this hot loop
        alpha = soc[pidx, np.argmin(fit, axis=1)]  # (np_, dim)
        ranked = np.sort(soc, axis=1)
        mid = nc // 2
        if nc % 2 == 1:
            tendency = ranked[:, mid]
        else:
            tendency = (ranked[:, mid - 1] + ranked[:, mid]) / 2.0

        # mates cr1 != c and cr2 not in {c, cr1}, per coyote
        cr1 = _skip(rng.integers(0, nc - 1, size=(np_, nc)), cidx)
        lo = np.minimum(cidx, cr1)
        hi = np.maximum(cidx, cr1)
        cr2 = _skip(_skip(rng.integers(0, nc - 2, size=(np_, nc)), lo), hi)
        r = rng.random((2, np_, nc, dim))
        mate1 = soc[pidx[:, None], cr1]
        mate2 = soc[pidx[:, None], cr2]
        cand = soc + r[0] * (alpha[:, None, :] - mate1) + r[1] * (tendency[:, None, :] - mate2)
        np.clip(cand, lb, ub, out=cand)
        for p in range(np_):
            for c in range(nc):
                new_fit = objective(cand[p, c])
                if new_fit < fit[p, c]:
                    soc[p, c] = cand[p, c]
                    fit[p, c] = new_fit

        # one pup per pack: crossover of two distinct parents with one
        # dimension guaranteed from each, remaining dimensions scattered
        # uniformly with probability 1/dim; replaces the pack's worst coyote
        # when strictly better
        par1 = rng.integers(0, nc, size=np_)
        par2 = _skip(rng.integers(0, nc - 1, size=np_), par1)
        d1 = rng.integers(0, dim, size=np_)
        pattern = rng.random((np_, dim))
        noise = lb + rng.random((np_, dim)) * (ub - lb)
        g1 = soc[pidx, par1]
        g2 = soc[pidx, par2]
        pup = np.where(pattern < p_parent, g1,
                       np.where(pattern >= p_parent + p_scatter, g2, noise))
        pup[pidx, d1] = g1[pidx, d1]
        if dim > 1:
            d2 = _skip(rng.integers(0, dim - 1, size=np_), d1)
            pup[pidx, d2] = g2[pidx, d2]
        worst = np.argmax(fit, axis=1)
        for p in range(np_):
            pup_fit = objective(pup[p])
            if pup_fit < fit[p, worst[p]]:
                soc[p, worst[p]] = pup[p]
                fit[p, worst[p]] = pup_fit

        # occasional pack exchange: two packs swap one random coyote each
        if np_ > 1 and rng.random() < p_exchange:
            pa = int(rng.integers(np_))
            pb = int(_skip(rng.integers(np_ - 1), pa))
            ca, cb = rng.integers(0, nc, size=2)
            tmp_soc, tmp_fit = soc[pa, ca].copy(), fit[pa, ca]
            soc[pa, ca], fit[pa, ca] = soc[pb, cb], fit[pb, cb]
            soc[pb, cb], fit[pb, cb] = tmp_soc, tmp_fit

        iterations += 1
        it_soc, it_fit = _global_best(soc, fit)
        if it_fit < best_fit:
            best_soc, best_fit = it_soc, it_fit
        history.append(best_fit)

    return CoaResult(
        best_solution=best_soc,
        best_fitness=best_fit,
        iterations_run=iterations,
        fitness_history=history,
    )


def _global_best(soc: np.ndarray, fit: np.ndarray) -> tuple[np.ndarray, float]:
    # first flat minimum, so ties resolve to the lowest pack then coyote index
    flat = int(np.argmin(fit))
    p, c = divmod(flat, fit.shape[1])
    return soc[p, c].copy(), float(fit[p, c])
