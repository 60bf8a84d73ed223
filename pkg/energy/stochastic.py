"""
Exogenous information process for the single-node storage problem:
seasonal demand, renewable production and the two price chains
(with optional price spikes). All samplers take an explicit numpy
Generator so that trajectories are reproducible per seed.
"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace

from .exceptions import DomainError

logger = logging.getLogger(__name__)

JUMP_PROBABILITY = 0.031


def _round_half_away(value):
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def _clamp(value, low, high):
    return min(max(value, low), high)


@dataclass(frozen=True)
class DiscretizedGaussian:
    """
    Pseudonormal increment: a Gaussian draw rounded to the nearest
    integer and clamped to the symmetric support {-radius, ..., radius}.
    """

    sigma: float
    radius: int

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError(f"sigma must be nonnegative, got {self.sigma}")
        if self.radius < 0:
            raise DomainError(f"support radius must be nonnegative, got {self.radius}")

    @property
    def support(self):
        return tuple(range(-self.radius, self.radius + 1))

    def sample(self, rng):
        return sample_discretized_gaussian(self, rng)


@dataclass(frozen=True)
class DiscreteUniform:
    """Uniform increment over {-radius, ..., radius}."""

    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise DomainError(f"support radius must be nonnegative, got {self.radius}")

    @property
    def support(self):
        return tuple(range(-self.radius, self.radius + 1))

    def sample(self, rng):
        return int(rng.integers(-self.radius, self.radius + 1))


def sample_discretized_gaussian(dist, rng):
    if dist.sigma == 0:
        return 0
    value = _round_half_away(rng.normal(0.0, dist.sigma))
    return _clamp(value, -dist.radius, dist.radius)


class PriceVariant(enum.Enum):
    MARKOV_CHAIN = "mc"
    MARKOV_CHAIN_WITH_JUMPS = "mc+jump"


@dataclass(frozen=True)
class PriceProcessKind:
    variant: PriceVariant = PriceVariant.MARKOV_CHAIN_WITH_JUMPS
    jump_prob: float = JUMP_PROBABILITY
    jump_dist: DiscretizedGaussian = field(
        default_factory=lambda: DiscretizedGaussian(sigma=50.0, radius=40)
    )

    def __post_init__(self):
        if not 0.0 <= self.jump_prob <= 1.0:
            raise DomainError(f"jump probability must lie in [0, 1], got {self.jump_prob}")

    @property
    def has_jumps(self):
        return self.variant is PriceVariant.MARKOV_CHAIN_WITH_JUMPS


@dataclass(frozen=True)
class ExogenousState:
    """One period's realization (E, D, C, P)."""

    energy: int
    demand: int
    buy_price: int
    sell_price: int

    def as_tuple(self):
        return (self.energy, self.demand, self.buy_price, self.sell_price)


@dataclass(frozen=True)
class ProcessConfig:
    d_min: int = 1
    d_max: int = 15
    e_min: int = 1
    e_max: int = 7
    c_min: int = 3
    c_max: int = 13
    p_min: int = 2
    p_max: int = 12
    demand_noise: DiscretizedGaussian = field(
        default_factory=lambda: DiscretizedGaussian(sigma=2.0, radius=2)
    )
    energy_noise: object = field(
        default_factory=lambda: DiscretizedGaussian(sigma=3.0, radius=5)
    )
    price_noise: DiscretizedGaussian = field(
        default_factory=lambda: DiscretizedGaussian(sigma=2.5, radius=8)
    )
    price_kind: PriceProcessKind = field(default_factory=PriceProcessKind)
    horizon: int = 10

    def __post_init__(self):
        for name, low, high in (
            ("demand", self.d_min, self.d_max),
            ("energy", self.e_min, self.e_max),
            ("buy price", self.c_min, self.c_max),
            ("sell price", self.p_min, self.p_max),
        ):
            if low > high:
                raise DomainError(f"{name} bounds are inverted: [{low}, {high}]")
        if self.d_min < 0 or self.e_min < 0:
            raise DomainError("demand and energy lower bounds must be nonnegative")
        if self.c_min < self.p_min or self.c_max < self.p_max:
            raise DomainError("buy price bounds must dominate sell price bounds")
        if self.horizon < 1:
            raise DomainError(f"horizon must be positive, got {self.horizon}")

    @property
    def buy_bounds(self):
        return (self.c_min, self.c_max)

    @property
    def sell_bounds(self):
        return (self.p_min, self.p_max)

    def contains(self, w):
        return (
            self.e_min <= w.energy <= self.e_max
            and self.d_min <= w.demand <= self.d_max
            and self.c_min <= w.buy_price <= self.c_max
            and self.p_min <= w.sell_price <= self.p_max
            and w.sell_price <= w.buy_price
        )

    def without_noise(self):
        """Same bounds and horizon with every increment forced to zero."""
        return replace(
            self,
            demand_noise=DiscretizedGaussian(0.0, self.demand_noise.radius),
            energy_noise=DiscretizedGaussian(0.0, self.energy_noise.radius),
            price_noise=DiscretizedGaussian(0.0, self.price_noise.radius),
            price_kind=replace(
                self.price_kind,
                jump_dist=DiscretizedGaussian(0.0, self.price_kind.jump_dist.radius),
            ),
        )


def seasonal_demand(t, horizon):
    # round() keeps exact integers such as 3 - 4 sin(pi) from flooring to 2
    return math.floor(round(3 - 4 * math.sin(2 * math.pi * t / horizon), 9))


def next_demand(t, cfg, rng):
    if not 1 <= t <= cfg.horizon:
        raise DomainError(f"time index {t} outside 1..{cfg.horizon}")
    raw = seasonal_demand(t, cfg.horizon) + cfg.demand_noise.sample(rng)
    return _clamp(raw, cfg.d_min, cfg.d_max)


def next_energy(energy_prev, cfg, rng):
    return _clamp(energy_prev + cfg.energy_noise.sample(rng), cfg.e_min, cfg.e_max)


def price_step(price_prev, bounds, kind, noise, rng):
    """Advance one price chain; returns (price, jump fired)."""
    increment = noise.sample(rng)
    fired = False
    if kind.has_jumps:
        fired = bool(rng.random() <= kind.jump_prob)
        if fired:
            increment += kind.jump_dist.sample(rng)
    low, high = bounds
    return _clamp(price_prev + increment, low, high), fired


def next_price(price_prev, bounds, kind, noise, rng):
    price, _ = price_step(price_prev, bounds, kind, noise, rng)
    return price


def sample_trajectory(cfg, rng, jump_log=None):
    """
    Sample W_1..W_T. E_1, C_1 and P_1 are uniform on their ranges and
    D_1 follows the seasonal formula. The sell price is capped at the
    buy price every period and the chains evolve from the capped values.
    When jump_log is a list, one flag per price step is appended to it.
    """
    energy = int(rng.integers(cfg.e_min, cfg.e_max + 1))
    buy = int(rng.integers(cfg.c_min, cfg.c_max + 1))
    sell = min(int(rng.integers(cfg.p_min, cfg.p_max + 1)), buy)
    demand = next_demand(1, cfg, rng)
    states = [ExogenousState(energy, demand, buy, sell)]

    for t in range(2, cfg.horizon + 1):
        energy = next_energy(energy, cfg, rng)
        demand = next_demand(t, cfg, rng)
        buy, buy_jump = price_step(buy, cfg.buy_bounds, cfg.price_kind, cfg.price_noise, rng)
        sell, sell_jump = price_step(sell, cfg.sell_bounds, cfg.price_kind, cfg.price_noise, rng)
        sell = min(sell, buy)
        if jump_log is not None:
            jump_log.extend((buy_jump, sell_jump))
        states.append(ExogenousState(energy, demand, buy, sell))

    return tuple(states)
