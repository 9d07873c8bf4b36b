"""Random-measure samplers: stick breaking and normalized gamma jumps.

Two independent constructions target the same random probability measure:

* sequential stick breaking with Be(1, alpha) sticks and i.i.d. marks from
  the base measure, truncated when the leftover mass drops below a
  configured epsilon (the leftover is assigned to one final fresh mark so
  every sample is an exact probability measure);
* a decreasing-jump representation, where unit-rate Poisson arrivals are
  pushed through the inverse of alpha * E1 to produce the jump sizes of a
  gamma random measure, which normalization turns into the target.

Both exist at two granularities: object-level samplers returning
:class:`~dpm.measures.DiscreteMeasure` values, and chunk kernels returning
numpy arrays of many samples at once for the verification campaigns.  All
randomness flows through :class:`RngStream`, a named substream of a root
seed, so campaigns are reproducible and independent of worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import BaseModel, DiscreteMeasure, GroundPoint
from .specialfn import exp_integral_e1, inverse_e1

DEFAULT_STICK_EPS = 1e-12
DEFAULT_JUMP_EPS = 1e-8


class TruncationError(RuntimeError):
    """A stick-breaking loop hit its stick cap before reaching the target tail."""

    def __init__(self, tail_mass: float, max_sticks: int):
        super().__init__(
            f"tail mass {tail_mass:.3e} still above target after {max_sticks} sticks"
        )
        self.tail_mass = tail_mass
        self.max_sticks = max_sticks


class RngStream:
    """Generator bound to (seed, stream_id), a named substream of a root seed.

    Distinct stream ids give statistically independent generators for the
    same seed, which is how sharded campaigns stay reproducible no matter
    how shards are scheduled across workers.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._gen = np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        )

    @property
    def gen(self) -> np.random.Generator:
        return self._gen

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class StickConfig:
    """Truncation policy for stick breaking.

    ``max_sticks`` must be generous enough that the *expected* leftover
    mass at the cap, (alpha/(alpha+1))^max_sticks, is already below
    ``trunc_eps``; hitting the cap is then a tail event reported through
    :class:`TruncationError` rather than a silent bias.
    """

    alpha: float
    trunc_eps: float = DEFAULT_STICK_EPS
    max_sticks: int = 0

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.trunc_eps < 1.0:
            raise ValueError(f"trunc_eps must lie in (0, 1), got {self.trunc_eps}")
        if self.max_sticks < 1:
            raise ValueError("max_sticks must be at least 1")
        if self.max_sticks * math.log(self.alpha / (self.alpha + 1.0)) > math.log(self.trunc_eps):
            raise ValueError(
                f"max_sticks={self.max_sticks} cannot reach tail {self.trunc_eps} "
                f"even in expectation at alpha={self.alpha}"
            )

    @staticmethod
    def for_alpha(alpha: float, trunc_eps: float = DEFAULT_STICK_EPS) -> "StickConfig":
        """A cap with a factor-four margin over the expected stick count."""
        needed = math.ceil(math.log(trunc_eps) / math.log(alpha / (alpha + 1.0)))
        return StickConfig(alpha=alpha, trunc_eps=trunc_eps, max_sticks=max(64, 4 * needed))


@dataclass(frozen=True)
class JumpSet:
    """Decreasing jump sizes of a truncated gamma random measure.

    Jumps below ``trunc_eps`` are dropped, except that the largest jump is
    always retained so the normalized measure exists even in the rare event
    that every jump falls below the threshold.
    """

    jumps: tuple[float, ...]
    alpha: float
    trunc_eps: float

    def __post_init__(self) -> None:
        for x, y in zip(self.jumps, self.jumps[1:]):
            if not x > y:
                raise ValueError("jumps must be strictly decreasing")
        if self.jumps and not self.jumps[0] > 0.0:
            raise ValueError("jumps must be positive")
        if any(j < self.trunc_eps * (1.0 - 1e-9) for j in self.jumps[1:]):
            raise ValueError("a retained jump lies below the truncation threshold")

    @property
    def total(self) -> float:
        return float(sum(self.jumps))

    def normalized(self) -> np.ndarray:
        """Jump sizes divided by their sum: a descending probability vector."""
        if not self.jumps:
            raise ValueError("cannot normalize an empty jump set")
        arr = np.array(self.jumps)
        return arr / arr.sum()


def expected_jump_count(alpha: float, trunc_eps: float) -> float:
    """Mean number of jumps of size >= trunc_eps: alpha * E1(trunc_eps)."""
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return alpha * exp_integral_e1(trunc_eps)


# ---------------------------------------------------------------------------
# scalar draws


def sample_gamma(shape: float, rng: RngStream, size=None):
    """Gamma(shape, 1) draws."""
    if not shape > 0.0:
        raise ValueError(f"gamma shape must be positive, got {shape}")
    out = rng.gen.gamma(shape, size=size)
    return float(out) if size is None else out


def sample_beta(a: float, b: float, rng: RngStream, size=None):
    """Beta(a, b) draws."""
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"beta parameters must be positive, got ({a}, {b})")
    out = rng.gen.beta(a, b, size=size)
    return float(out) if size is None else out


def sample_dirichlet(alphas, rng: RngStream) -> np.ndarray:
    """One Dirichlet(alphas) draw via normalized independent gammas."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or len(alphas) < 2:
        raise ValueError("need at least two Dirichlet parameters")
    if np.any(alphas <= 0.0):
        raise ValueError("Dirichlet parameters must be positive")
    for _ in range(100):
        g = rng.gen.gamma(alphas)
        s = g.sum()
        if s > 0.0:
            return g / s
    raise ArithmeticError("gamma draws underflowed to zero repeatedly")


def sample_base_point(model: BaseModel, rng: RngStream) -> GroundPoint:
    """One draw from the normalized base measure."""
    return _draw_base_point(model, rng.gen)


def _draw_base_point(model: BaseModel, gen: np.random.Generator) -> GroundPoint:
    r = gen.random()
    acc = 0.0
    for i, p in enumerate(model.atom_probs):
        acc += p
        if r < acc:
            return GroundPoint(atom=i)
    if model.diffuse_weight > 0.0:
        return GroundPoint(cont=float(gen.random()))
    # Rounding pushed r past the accumulated total; the last positive atom
    # absorbs the sliver.
    last = max(i for i, p in enumerate(model.atom_probs) if p > 0.0)
    return GroundPoint(atom=last)


# ---------------------------------------------------------------------------
# object-level constructions


def sample_stick_breaking(
    model: BaseModel,
    rng: RngStream,
    config: StickConfig | None = None,
) -> DiscreteMeasure:
    """One truncated stick-breaking sample as an exact probability measure.

    Sticks are Be(1, alpha), marks are i.i.d. base draws, and once the
    leftover mass reaches ``config.trunc_eps`` it is assigned to one fresh
    mark, closing the measure at total mass exactly one.
    """
    cfg = config if config is not None else StickConfig.for_alpha(model.alpha)
    if cfg.alpha != model.alpha:
        raise ValueError(f"config alpha {cfg.alpha} does not match model alpha {model.alpha}")
    gen = rng.gen
    pairs: list[tuple[GroundPoint, float]] = []
    tail = 1.0
    for _ in range(cfg.max_sticks):
        w = gen.beta(1.0, cfg.alpha)
        pairs.append((_draw_base_point(model, gen), tail * w))
        tail *= 1.0 - w
        if tail <= cfg.trunc_eps:
            pairs.append((_draw_base_point(model, gen), tail))
            return DiscreteMeasure.from_pairs(pairs)
    raise TruncationError(tail, cfg.max_sticks)


def sample_poisson_gamma(
    alpha: float,
    rng: RngStream,
    trunc_eps: float = DEFAULT_JUMP_EPS,
) -> JumpSet:
    """Decreasing jumps of a gamma random measure with total mass alpha.

    Unit-rate Poisson arrivals G_1 < G_2 < ... are mapped through the
    inverse of E1 at G_k / alpha; the map is decreasing, so the jumps come
    out sorted.  Arrivals beyond alpha * E1(trunc_eps) would invert below
    the threshold and are not generated, except that the first jump is
    always kept.
    """
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not 0.0 < trunc_eps <= 0.1:
        raise ValueError(f"trunc_eps must lie in (0, 0.1], got {trunc_eps}")
    gen = rng.gen
    limit = alpha * exp_integral_e1(trunc_eps)
    first = gen.exponential()
    if first <= limit:
        # Draw the remaining inter-arrival times in batches sized to cover
        # the expected count plus slack, so almost every draw finishes in
        # one pass and the E1 inversion runs vectorized over all arrivals.
        batch = max(32, int(limit - first + 6.0 * math.sqrt(limit + 1.0)) + 1)
        pos = first
        pieces = []
        while True:
            cum = pos + np.cumsum(gen.exponential(size=batch))
            inside = int(np.searchsorted(cum, limit, side="right"))
            pieces.append(cum[:inside])
            if inside < batch:
                break
            pos = float(cum[-1])
        arrivals = np.concatenate([np.array([first]), *pieces])
    else:
        arrivals = np.array([first])
    jumps = np.atleast_1d(inverse_e1(arrivals / alpha))
    return JumpSet(
        jumps=tuple(float(j) for j in jumps), alpha=alpha, trunc_eps=trunc_eps
    )


def sample_poisson_dirichlet(
    alpha: float,
    rng: RngStream,
    trunc_eps: float = DEFAULT_JUMP_EPS,
) -> np.ndarray:
    """Descending normalized jump sizes: one draw of the ranked-weight law."""
    return sample_poisson_gamma(alpha, rng, trunc_eps).normalized()


def sample_jump_measure(
    model: BaseModel,
    rng: RngStream,
    trunc_eps: float = DEFAULT_JUMP_EPS,
) -> DiscreteMeasure:
    """One normalized-jump draw with i.i.d. base marks, as a measure.

    Same law as :func:`sample_stick_breaking` up to truncation error, by a
    different construction: ranked normalized jumps of a gamma random
    measure, each carrying an independent base draw.
    """
    weights = sample_poisson_dirichlet(model.alpha, rng, trunc_eps)
    gen = rng.gen
    pairs = [(_draw_base_point(model, gen), float(w)) for w in weights]
    return DiscreteMeasure.from_pairs(pairs)


def size_biased_pick(zeta: DiscreteMeasure, rng: RngStream) -> tuple[int, GroundPoint, float]:
    """Pick atom i of a probability measure with probability its weight.

    Returns (index, point, weight).
    """
    if zeta.is_zero:
        raise ValueError("cannot size-bias the zero measure")
    if not zeta.is_probability():
        raise ValueError(f"size-biased pick expects a probability measure, total={zeta.total!r}")
    r = rng.gen.random() * zeta.total
    acc = 0.0
    for i, (point, w) in enumerate(zeta.atoms):
        acc += w
        if r < acc:
            return i, point, w
    i = len(zeta.atoms) - 1
    point, w = zeta.atoms[i]
    return i, point, w


def drop_index(x, i: int) -> tuple[float, ...]:
    """The sequence with its i-th entry removed (1-based index)."""
    if not 1 <= i <= len(x):
        raise ValueError(f"index {i} out of range for length {len(x)}")
    return tuple(x[: i - 1]) + tuple(x[i:])


def renormalize_drop(x, i: int) -> tuple[float, ...]:
    """Drop entry i (1-based) and rescale the rest by 1/(1 - x_i).

    When x_i equals one, the convention a/0 := 0 applies and the all-zero
    sequence is returned.
    """
    dropped = drop_index(x, i)
    xi = float(x[i - 1])
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"entry {xi} outside [0, 1]")
    if xi == 1.0:
        return (0.0,) * len(dropped)
    scale = 1.0 / (1.0 - xi)
    return tuple(float(v) * scale for v in dropped)


# ---------------------------------------------------------------------------
# vectorized chunk kernels


def _cumulative_probs(block_probs) -> np.ndarray:
    p = np.asarray(block_probs, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("block probabilities must be a nonempty vector")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("block probabilities must be nonnegative and sum to one")
    return np.cumsum(p)


def _categorical(gen: np.random.Generator, cum: np.ndarray, size) -> np.ndarray:
    idx = np.searchsorted(cum, gen.random(size), side="right")
    return np.minimum(idx, len(cum) - 1)


def stick_projection_chunk(
    alpha: float,
    block_probs,
    m: int,
    gen: np.random.Generator,
    trunc_eps: float = DEFAULT_STICK_EPS,
    max_sticks: int | None = None,
) -> np.ndarray:
    """Block projections of m stick-breaking samples, shape (m, n_blocks).

    Runs one global stick loop: every row keeps receiving sticks until the
    largest leftover in the chunk is below ``trunc_eps`` (extra sticks on
    finished rows only sharpen their truncation).  The final leftover goes
    to a fresh mark per row, so each row sums to one exactly up to
    rounding.
    """
    cum = _cumulative_probs(block_probs)
    cap = (
        max_sticks
        if max_sticks is not None
        else StickConfig.for_alpha(alpha, trunc_eps).max_sticks
    )
    proj = np.zeros((m, len(cum)))
    tail = np.ones(m)
    rows = np.arange(m)
    for _ in range(cap):
        w = gen.beta(1.0, alpha, size=m)
        blk = _categorical(gen, cum, m)
        proj[rows, blk] += tail * w
        tail *= 1.0 - w
        if tail.max() <= trunc_eps:
            blk = _categorical(gen, cum, m)
            proj[rows, blk] += tail
            return proj
    raise TruncationError(float(tail.max()), cap)


def stick_ensemble_chunk(
    alpha: float,
    block_probs,
    m: int,
    gen: np.random.Generator,
    trunc_eps: float = DEFAULT_STICK_EPS,
    max_sticks: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Full stick weights and mark blocks of m samples.

    Returns (weights, blocks), both shaped (m, n_sticks); weight columns
    are in stick order and each row sums to one up to rounding (the last
    column is the closing leftover).  Needed by campaigns that pick and
    remove individual sticks rather than just projecting.
    """
    cum = _cumulative_probs(block_probs)
    cap = (
        max_sticks
        if max_sticks is not None
        else StickConfig.for_alpha(alpha, trunc_eps).max_sticks
    )
    cols_w: list[np.ndarray] = []
    cols_b: list[np.ndarray] = []
    tail = np.ones(m)
    for _ in range(cap):
        w = gen.beta(1.0, alpha, size=m)
        blk = _categorical(gen, cum, m)
        cols_w.append(tail * w)
        cols_b.append(blk)
        tail = tail * (1.0 - w)
        if tail.max() <= trunc_eps:
            cols_w.append(tail)
            cols_b.append(_categorical(gen, cum, m))
            return np.column_stack(cols_w), np.column_stack(cols_b)
    raise TruncationError(float(tail.max()), cap)


def gamma_projection_chunk(
    alpha: float,
    block_probs,
    m: int,
    gen: np.random.Generator,
    trunc_eps: float = DEFAULT_JUMP_EPS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized block projections of m jump-construction samples.

    Returns (proj, totals, largest): the normalized projections of shape
    (m, n_blocks), the unnormalized total masses (whose law is
    Gamma(alpha, 1) up to truncation), and the largest normalized weight
    per row.  Jumps and marks are independent, so ``totals`` should be
    uncorrelated with every column of ``proj``.
    """
    cum = _cumulative_probs(block_probs)
    limit = alpha * exp_integral_e1(trunc_eps)
    k0 = int(limit + 8.0 * math.sqrt(limit) + 16.0)
    arr = gen.exponential(size=(m, k0)).cumsum(axis=1)
    while arr[:, -1].min() <= limit:
        extra = arr[:, -1:] + gen.exponential(size=(m, 16)).cumsum(axis=1)
        arr = np.concatenate([arr, extra], axis=1)
    keep = arr <= limit
    keep[:, 0] = True  # the largest jump is always retained
    jumps = np.zeros_like(arr)
    jumps[keep] = inverse_e1(arr[keep] / alpha)
    blk = _categorical(gen, cum, arr.shape)
    proj = np.empty((m, len(cum)))
    for j in range(len(cum)):
        proj[:, j] = (jumps * (blk == j)).sum(axis=1)
    totals = jumps.sum(axis=1)
    proj /= totals[:, None]
    largest = jumps[:, 0] / totals
    return proj, totals, largest
