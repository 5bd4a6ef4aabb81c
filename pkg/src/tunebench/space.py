"""Search spaces: parameter definitions, validation, sampling, encoding.

A configuration is a plain dict mapping parameter names to values. Ordinal
parameters hold numeric values from a strictly increasing tuple, categorical
parameters hold string labels, permutation parameters hold a tuple that is a
permutation of range(size).
"""

from __future__ import annotations

import itertools
import math
import random
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, Mapping

import numpy as np

from .constraints import RESERVED_WORDS, Constraint

__all__ = [
    "ParameterDef",
    "SearchSpace",
    "ValidationResult",
    "ConfigDomainError",
    "MalformedSpaceError",
    "SamplingBudgetError",
    "SpaceTooLargeError",
    "ENUMERATION_LIMIT",
]

Configuration = dict

ENUMERATION_LIMIT = 1_000_000

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")

KINDS = ("ordinal", "categorical", "permutation")


class MalformedSpaceError(ValueError):
    """A parameter or space definition breaks an invariant."""


class ConfigDomainError(ValueError):
    """A configuration does not belong to the space's domain."""


class SamplingBudgetError(RuntimeError):
    """Rejection sampling exhausted its draw budget."""


class SpaceTooLargeError(RuntimeError):
    """Enumeration was requested past the configured limit."""


@dataclass(frozen=True)
class ParameterDef:
    """One tunable parameter.

    ordinal: ``values`` is a strictly increasing tuple of numbers.
    categorical: ``values`` is a tuple of distinct string labels.
    permutation: ``size`` elements, values are permutations of range(size).
    """

    name: str
    kind: str
    values: tuple = ()
    size: int = 0

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise MalformedSpaceError(f"bad parameter name: {self.name!r}")
        if self.name in RESERVED_WORDS:
            raise MalformedSpaceError(f"reserved parameter name: {self.name!r}")
        if self.kind not in KINDS:
            raise MalformedSpaceError(
                f"unknown parameter kind {self.kind!r} for {self.name!r}"
            )
        object.__setattr__(self, "values", tuple(self.values))
        if self.kind == "ordinal":
            vals = self.values
            if not vals:
                raise MalformedSpaceError(f"{self.name!r}: empty ordinal domain")
            if any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in vals):
                raise MalformedSpaceError(f"{self.name!r}: ordinal values must be numbers")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise MalformedSpaceError(
                    f"{self.name!r}: ordinal values must be strictly increasing"
                )
        elif self.kind == "categorical":
            vals = self.values
            if not vals:
                raise MalformedSpaceError(f"{self.name!r}: empty categorical domain")
            if any(not isinstance(v, str) for v in vals):
                raise MalformedSpaceError(f"{self.name!r}: categorical values must be strings")
            if len(set(vals)) != len(vals):
                raise MalformedSpaceError(f"{self.name!r}: duplicate categorical labels")
        else:
            if self.values:
                raise MalformedSpaceError(
                    f"{self.name!r}: permutation parameters take size, not values"
                )
            if self.size < 1:
                raise MalformedSpaceError(f"{self.name!r}: permutation size must be >= 1")

    def domain_size(self) -> int:
        if self.kind == "permutation":
            return math.factorial(self.size)
        return len(self.values)

    def domain(self) -> Iterator:
        """Canonical domain order: declared order, permutations lexicographic."""
        if self.kind == "permutation":
            return iter(itertools.permutations(range(self.size)))
        return iter(self.values)

    def contains(self, value) -> bool:
        if self.kind == "permutation":
            if not isinstance(value, (tuple, list)) or len(value) != self.size:
                return False
            return sorted(value) == list(range(self.size))
        if self.kind == "ordinal" and isinstance(value, bool):
            return False
        return value in self.values

    def canonical(self, value):
        """Normalize a domain value (list permutations become tuples)."""
        if self.kind == "permutation" and isinstance(value, list):
            return tuple(value)
        return value

    def rank(self, value) -> int:
        """Index of an ordinal or categorical value in its domain."""
        return self.values.index(value)

    def encoded_width(self) -> int:
        if self.kind == "categorical":
            return len(self.values)
        if self.kind == "permutation":
            return self.size
        return 1


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    violated: tuple[str, ...] = ()


@dataclass(frozen=True)
class SearchSpace:
    """An ordered set of parameters plus known constraints.

    Known constraints are checkable from the configuration alone; anything
    that needs execution (scratch overflow, oversubscription) is a hidden
    constraint and lives with the kernel runner, not here.
    """

    parameters: tuple[ParameterDef, ...]
    known_constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "known_constraints", tuple(self.known_constraints))
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise MalformedSpaceError(f"duplicate parameter names: {names}")
        known = set(names)
        for c in self.known_constraints:
            missing = c.referenced - known
            if missing:
                raise MalformedSpaceError(
                    f"constraint {c.text!r} references unknown parameters: {sorted(missing)}"
                )

    @cached_property
    def by_name(self) -> dict[str, ParameterDef]:
        return {p.name: p for p in self.parameters}

    @cached_property
    def cardinality(self) -> int:
        n = 1
        for p in self.parameters:
            n *= p.domain_size()
        return n

    @cached_property
    def encoded_width(self) -> int:
        return sum(p.encoded_width() for p in self.parameters)

    @cached_property
    def encoded_blocks(self) -> tuple[tuple[str, int, int], ...]:
        """(name, start, stop) slices of each parameter in the encoding."""
        blocks = []
        at = 0
        for p in self.parameters:
            w = p.encoded_width()
            blocks.append((p.name, at, at + w))
            at += w
        return tuple(blocks)

    def canonical(self, config: Mapping[str, Any]) -> Configuration:
        """Domain-check and normalize a configuration (lists become tuples)."""
        extra = set(config) - set(self.by_name)
        if extra:
            raise ConfigDomainError(f"unknown parameters: {sorted(extra)}")
        out: Configuration = {}
        for p in self.parameters:
            if p.name not in config:
                raise ConfigDomainError(f"missing parameter: {p.name!r}")
            v = p.canonical(config[p.name])
            if not p.contains(v):
                raise ConfigDomainError(
                    f"value {v!r} is outside the domain of {p.name!r}"
                )
            out[p.name] = v
        return out

    def validate(self, config: Mapping[str, Any]) -> ValidationResult:
        """Check known constraints. Raises ConfigDomainError on malformed input."""
        cfg = self.canonical(config)
        violated = tuple(c.text for c in self.known_constraints if not c(cfg))
        return ValidationResult(valid=not violated, violated=violated)

    def is_valid(self, config: Mapping[str, Any]) -> bool:
        return self.validate(config).valid

    def _draw(self, rng: random.Random) -> Configuration:
        cfg: Configuration = {}
        for p in self.parameters:
            if p.kind == "permutation":
                cfg[p.name] = tuple(rng.sample(range(p.size), p.size))
            else:
                cfg[p.name] = p.values[rng.randrange(len(p.values))]
        return cfg

    def sample_valid(
        self, count: int, seed: int, *, max_draws: int | None = None
    ) -> list[Configuration]:
        """Draw valid configurations: uniform over the domain, rejection on
        the known constraints. Deterministic for a given seed."""
        rng = random.Random(seed)
        budget = max_draws if max_draws is not None else 10_000 * max(count, 1)
        out: list[Configuration] = []
        draws = 0
        while len(out) < count:
            if draws >= budget:
                raise SamplingBudgetError(
                    f"drew {draws} configurations, found only {len(out)}/{count} valid"
                )
            cfg = self._draw(rng)
            draws += 1
            if all(c(cfg) for c in self.known_constraints):
                out.append(cfg)
        return out

    def enumerate_valid(
        self, limit: int = ENUMERATION_LIMIT
    ) -> tuple[list[Configuration], float]:
        """All valid configurations in canonical order, plus the valid ratio."""
        card = self.cardinality
        if card > limit:
            raise SpaceTooLargeError(
                f"cardinality {card} exceeds enumeration limit {limit}"
            )
        names = [p.name for p in self.parameters]
        valid: list[Configuration] = []
        for combo in itertools.product(*(p.domain() for p in self.parameters)):
            cfg = dict(zip(names, combo))
            if all(c(cfg) for c in self.known_constraints):
                valid.append(cfg)
        return valid, len(valid) / card

    def encode(self, config: Mapping[str, Any]) -> np.ndarray:
        """Fixed-width numeric embedding in [0, 1].

        ordinal: rank / (k - 1); categorical: one-hot; permutation: the
        position of each element 0..n-1, divided by (n - 1).
        """
        cfg = self.canonical(config)
        out = np.zeros(self.encoded_width, dtype=np.float64)
        at = 0
        for p in self.parameters:
            v = cfg[p.name]
            if p.kind == "ordinal":
                k = len(p.values)
                out[at] = 0.0 if k == 1 else p.rank(v) / (k - 1)
                at += 1
            elif p.kind == "categorical":
                out[at + p.rank(v)] = 1.0
                at += len(p.values)
            else:
                n = p.size
                inv = [0] * n
                for pos, elem in enumerate(v):
                    inv[elem] = pos
                denom = float(n - 1) if n > 1 else 1.0
                for e in range(n):
                    out[at + e] = inv[e] / denom
                at += n
        return out

    def distance(self, a: Mapping[str, Any], b: Mapping[str, Any]) -> float:
        """Mean per-parameter distance in [0, 1].

        ordinal: rank gap over (k - 1); categorical: 0/1 mismatch;
        permutation: normalized Kendall tau.
        """
        if not self.parameters:
            return 0.0
        ca, cb = self.canonical(a), self.canonical(b)
        total = 0.0
        for p in self.parameters:
            va, vb = ca[p.name], cb[p.name]
            if p.kind == "ordinal":
                k = len(p.values)
                if k > 1:
                    total += abs(p.rank(va) - p.rank(vb)) / (k - 1)
            elif p.kind == "categorical":
                total += 0.0 if va == vb else 1.0
            else:
                total += _kendall(va, vb)
        return total / len(self.parameters)

    def encode_matrix(self, configs: Iterable[Mapping[str, Any]]) -> np.ndarray:
        """Stack encode() over many configurations, shape (n, encoded_width)."""
        rows = [self.encode(c) for c in configs]
        if not rows:
            return np.zeros((0, self.encoded_width), dtype=np.float64)
        return np.stack(rows)

    def integer_codes(self, configs: Iterable[Mapping[str, Any]]) -> np.ndarray:
        """One integer per parameter per configuration: the value's index in
        the parameter's canonical domain order. Shape (n, len(parameters))."""
        configs = list(configs)
        out = np.zeros((len(configs), len(self.parameters)), dtype=np.int64)
        for i, cfg in enumerate(configs):
            c = self.canonical(cfg)
            for j, p in enumerate(self.parameters):
                v = c[p.name]
                out[i, j] = _perm_rank(v) if p.kind == "permutation" else p.rank(v)
        return out

    @cached_property
    def _distance_specs(self):
        # scale for ordinals, pairwise Kendall table for permutations
        specs = []
        for p in self.parameters:
            if p.kind == "ordinal":
                k = len(p.values)
                specs.append(("ordinal", 1.0 / (k - 1) if k > 1 else 0.0, None))
            elif p.kind == "categorical":
                specs.append(("categorical", 0.0, None))
            else:
                if p.size > 6:
                    raise SpaceTooLargeError(
                        f"{p.name!r}: pairwise distance table for permutations "
                        f"of size {p.size} is too large"
                    )
                perms = list(itertools.permutations(range(p.size)))
                table = np.zeros((len(perms), len(perms)))
                for a in range(len(perms)):
                    for b in range(a + 1, len(perms)):
                        table[a, b] = table[b, a] = _kendall(perms[a], perms[b])
                specs.append(("permutation", 0.0, table))
        return specs

    def cross_distances(self, codes_a: np.ndarray, codes_b: np.ndarray) -> np.ndarray:
        """Pairwise distance() values from integer_codes() matrices,
        shape (len(a), len(b)). Matches the scalar method exactly."""
        na, nb = codes_a.shape[0], codes_b.shape[0]
        total = np.zeros((na, nb))
        if not self.parameters:
            return total
        for j, (kind, scale, table) in enumerate(self._distance_specs):
            ca = codes_a[:, j]
            cb = codes_b[:, j]
            if kind == "ordinal":
                total += np.abs(ca[:, None] - cb[None, :]) * scale
            elif kind == "categorical":
                total += (ca[:, None] != cb[None, :]).astype(np.float64)
            else:
                total += table[ca[:, None], cb[None, :]]
        return total / len(self.parameters)


def _perm_rank(perm) -> int:
    """Lexicographic rank of a permutation of range(n)."""
    n = len(perm)
    rank = 0
    seen = [False] * n
    for pos, elem in enumerate(perm):
        smaller = sum(1 for e in range(elem) if not seen[e])
        rank += smaller * math.factorial(n - pos - 1)
        seen[elem] = True
    return rank


def _kendall(a: tuple, b: tuple) -> float:
    """Discordant pair count over C(n, 2)."""
    n = len(a)
    if n < 2:
        return 0.0
    inv_a = [0] * n
    inv_b = [0] * n
    for pos, elem in enumerate(a):
        inv_a[elem] = pos
    for pos, elem in enumerate(b):
        inv_b[elem] = pos
    disc = 0
    for e in range(n):
        for f in range(e + 1, n):
            if (inv_a[e] - inv_a[f]) * (inv_b[e] - inv_b[f]) < 0:
                disc += 1
    return disc / (n * (n - 1) // 2)
