"""Output strategies: full softmax, class-factored softmax, and multi-level
hierarchical decomposition, plus the class-assignment rules.

Assignments keep every class contiguous in a stored word ordering so the
word-in-class scores are a single matrix slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from .numerics import init_matrix, log_softmax

Arrays = dict[str, np.ndarray]


# ---------------------------------------------------------------------------
# Partitions
# ---------------------------------------------------------------------------

@dataclass
class ClassAssignment:
    """Partition of the vocabulary into r contiguous groups of ``order``."""

    order: np.ndarray       # word ids, grouped class-by-class
    bounds: np.ndarray      # r+1 offsets into order
    class_of: np.ndarray = field(default=None)
    position: np.ndarray = field(default=None)

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)
        self.bounds = np.asarray(self.bounds, dtype=np.int64)
        k = len(self.order)
        if self.position is None:
            self.position = np.empty(k, dtype=np.int64)
            self.position[self.order] = np.arange(k)
        if self.class_of is None:
            self.class_of = (
                np.searchsorted(self.bounds, self.position, side="right") - 1
            ).astype(np.int64)

    @property
    def r(self) -> int:
        return len(self.bounds) - 1

    @property
    def k(self) -> int:
        return len(self.order)

    def members(self, c: int) -> np.ndarray:
        return self.order[self.bounds[c]: self.bounds[c + 1]]

    def to_tsv(self) -> str:
        lines = [f"{w}\t{c}" for w, c in enumerate(self.class_of)]
        return "\n".join(lines) + "\n"


def default_num_classes(k: int) -> int:
    """sqrt(k) balances the class and word softmax factors."""
    return max(1, ceil(sqrt(k)))


def _even_bounds(total: int, parts: int, offset: int = 0) -> list[int]:
    """offsets splitting [offset, offset+total) into near-equal runs (sizes differ <= 1)."""
    base, extra = divmod(total, parts)
    out = [offset]
    for i in range(parts):
        out.append(out[-1] + base + (1 if i < extra else 0))
    return out


def assign_uniform_random(k: int, r: int, rng) -> ClassAssignment:
    """Random permutation of the words cut into r near-equal classes."""
    if not 1 <= r <= k:
        raise ValueError(f"need 1 <= r <= k, got r={r}, k={k}")
    return ClassAssignment(rng.permutation(k), np.array(_even_bounds(k, r)))


def _assign_by_mass(freq_order: np.ndarray, mass: np.ndarray, r: int) -> ClassAssignment:
    k = len(freq_order)
    if r > k:
        raise ValueError(f"cannot split {k} words into {r} classes")
    cum = np.cumsum(mass)
    cum /= cum[-1]
    cls = np.minimum(np.ceil(cum * r).astype(np.int64) - 1, r - 1)
    cls = np.maximum(cls, 0)
    bounds = np.searchsorted(cls, np.arange(r + 1), side="left")
    # A single word with a huge mass share can jump the cumulative total past
    # several bin edges at once, leaving lower classes empty.  An empty class
    # still receives class-factor probability that no word can claim, so the
    # word distribution would no longer sum to one.  Nudge the boundaries just
    # enough that every class keeps at least one word.
    for i in range(1, r):
        bounds[i] = min(max(bounds[i], i), k - (r - i))
    return ClassAssignment(freq_order, bounds)


def _freq_order(vocab) -> np.ndarray:
    keys = sorted(range(vocab.size), key=lambda i: (-vocab.frequencies[i], vocab.words[i]))
    return np.array(keys, dtype=np.int64)


def assign_by_frequency(vocab, r: int) -> ClassAssignment:
    """Cumulative-frequency binning: word z joins class i when
    i/r < sum_{j<=z} f_j/F <= (i+1)/r over the frequency-descending order."""
    if r < 1:
        raise ValueError(f"need at least one class, got r={r}")
    order = _freq_order(vocab)
    return _assign_by_mass(order, vocab.frequencies[order].astype(np.float64), r)


def assign_by_sqrt_frequency(vocab, r: int) -> ClassAssignment:
    """Same binning over sqrt(f_j/F) masses; equalizes class sizes on
    Zipf-like vocabularies."""
    if r < 1:
        raise ValueError(f"need at least one class, got r={r}")
    order = _freq_order(vocab)
    f = vocab.frequencies[order].astype(np.float64)
    total = f.sum()
    return _assign_by_mass(order, np.sqrt(f / total), r)


@dataclass
class HierarchicalCode:
    """Nested contiguous partition: ``levels[j]`` are the group offsets at
    depth j+1; leaf groups hold the words a final word softmax runs over."""

    order: np.ndarray
    levels: list[np.ndarray]
    position: np.ndarray = field(default=None)
    group_of: np.ndarray = field(default=None)      # (depth, k)
    child_lo: list[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)
        self.levels = [np.asarray(b, dtype=np.int64) for b in self.levels]
        k = len(self.order)
        if self.position is None:
            self.position = np.empty(k, dtype=np.int64)
            self.position[self.order] = np.arange(k)
        if self.group_of is None:
            self.group_of = np.stack([
                np.searchsorted(b, self.position, side="right") - 1
                for b in self.levels
            ])
        if self.child_lo is None:
            # group g at depth j spans child groups
            # [child_lo[j][g], child_lo[j][g+1]) at depth j+1
            self.child_lo = [
                np.searchsorted(self.levels[j + 1], self.levels[j])
                for j in range(self.depth - 1)
            ]

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def k(self) -> int:
        return len(self.order)

    def group_counts(self) -> list[int]:
        return [len(b) - 1 for b in self.levels]

    def code_of(self, word: int) -> tuple[int, ...]:
        """Per-level branch index of the word under its parent node."""
        code = [int(self.group_of[0][word])]
        for j in range(1, self.depth):
            g = self.group_of[j][word]
            parent = self.group_of[j - 1][word]
            code.append(int(g - self.child_lo[j - 1][parent]))
        return tuple(code)


def hierarchy_uniform_random(k: int, depth: int, rng, branching: int | None = None
                             ) -> HierarchicalCode:
    """Random uniform nested clustering with ``depth`` class levels.

    The default branching factor ceil(k^(1/(depth+1))) balances the class
    levels against the final word-in-leaf softmax; depth=1 then matches the
    sqrt(k) flat-class default.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if branching is None:
        branching = max(2, ceil(k ** (1.0 / (depth + 1))))
    order = rng.permutation(k)
    levels = []
    spans = [(0, k)]
    for _ in range(depth):
        bounds = [0]
        next_spans = []
        for lo, hi in spans:
            parts = min(branching, hi - lo)
            cut = _even_bounds(hi - lo, parts, lo)
            bounds.extend(cut[1:])
            next_spans.extend(zip(cut[:-1], cut[1:]))
        levels.append(np.array(bounds, dtype=np.int64))
        spans = next_spans
    return HierarchicalCode(order, levels)


def hierarchy_from_classes(assignment: ClassAssignment) -> HierarchicalCode:
    """Depth-1 hierarchy structurally identical to a flat class partition."""
    return HierarchicalCode(assignment.order.copy(), [assignment.bounds.copy()])


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

class FullSoftmax:
    """Softmax over all k scores; ``energy=True`` uses e^{-y} normalization."""

    needs_input = True

    def __init__(self, w_out, w_direct=None, b_out=None, energy=False):
        self.w_out = w_out
        self.w_direct = w_direct
        self.b_out = b_out
        self.energy = energy
        self.zero_grads()

    @classmethod
    def create(cls, k, n_h, rng, n_i=0, direct=False, bias=False, energy=False):
        return cls(
            init_matrix(k, n_h, rng),
            init_matrix(k, n_i, rng) if direct else None,
            np.zeros(k) if bias else None,
            energy=energy,
        )

    @classmethod
    def for_model(cls, params, energy=False):
        if params.w_out is None:
            raise ValueError("model parameters carry no output weights")
        return cls(params.w_out, params.w_direct, params.b_out, energy=energy)

    @property
    def k(self):
        return self.w_out.shape[0]

    def params(self) -> Arrays:
        out = {"w_out": self.w_out}
        if self.w_direct is not None:
            out["w_direct"] = self.w_direct
        if self.b_out is not None:
            out["b_out"] = self.b_out
        return out

    def zero_grads(self):
        self._g = {name: np.zeros_like(a) for name, a in self.params().items()}

    def grads(self) -> Arrays:
        return self._g

    def scores(self, state, x=None) -> np.ndarray:
        y = self.w_out @ state
        if self.w_direct is not None:
            y = y + self.w_direct @ x
        if self.b_out is not None:
            y = y + self.b_out
        return y

    def scores_at(self, words, state, x=None) -> np.ndarray:
        y = self.w_out[words] @ state
        if self.w_direct is not None:
            y = y + self.w_direct[words] @ x
        if self.b_out is not None:
            y = y + self.b_out[words]
        return y

    def _logp(self, y):
        return log_softmax(-y) if self.energy else log_softmax(y)

    def logprob(self, state, x, target) -> float:
        if not 0 <= target < self.k:
            raise ValueError(f"target {target} out of range for k={self.k}")
        return float(self._logp(self.scores(state, x))[target])

    def log_probs(self, state, x=None) -> np.ndarray:
        return self._logp(self.scores(state, x))

    def backprop_dy(self, dy, state, x):
        """Accumulate parameter gradients for dL/dy and return (d_state, d_x)."""
        self._g["w_out"] += np.outer(dy, state)
        if self.b_out is not None:
            self._g["b_out"] += dy
        d_x = None
        if self.w_direct is not None:
            self._g["w_direct"] += np.outer(dy, x)
            d_x = self.w_direct.T @ dy
        return self.w_out.T @ dy, d_x

    def logprob_grad(self, state, x, target):
        if not 0 <= target < self.k:
            raise ValueError(f"target {target} out of range for k={self.k}")
        y = self.scores(state, x)
        # same log-softmax route as logprob() so static and gradient passes
        # agree bit-for-bit
        lp = self._logp(y)
        logp = float(lp[target])
        p = np.exp(lp)
        if self.energy:
            dy = -p
            dy[target] += 1.0
        else:
            dy = p
            dy[target] -= 1.0
        d_state, d_x = self.backprop_dy(dy, state, x)
        return logp, d_state, d_x


class _Grouped:
    """Shared machinery for strategies built from contiguous group softmaxes."""

    needs_input = False

    def params(self) -> Arrays:
        raise NotImplementedError

    def zero_grads(self):
        self._g = {name: np.zeros_like(a) for name, a in self.params().items()}

    def grads(self) -> Arrays:
        return self._g

    def _factor(self, weights, bias, rows, state, hit, accumulate):
        """log-softmax factor over `rows` of a weight matrix at position `hit`."""
        w = weights[rows]
        y = w @ state
        if bias is not None:
            y = y + bias[rows]
        logp = log_softmax(y)
        if not accumulate:
            return float(logp[hit]), None
        dy = np.exp(logp)
        dy[hit] -= 1.0
        d_state = w.T @ dy
        return float(logp[hit]), (dy, d_state)

    def log_probs(self, state, x=None) -> np.ndarray:
        return np.array([self.logprob(state, x, w) for w in range(self.k)])


class ClassSoftmax(_Grouped):
    """Two-factor softmax: class given history, then word within its class."""

    def __init__(self, assignment: ClassAssignment, w_class, w_word,
                 b_class=None, b_word=None):
        self.assignment = assignment
        self.w_class = w_class
        self.w_word = w_word
        self.b_class = b_class
        self.b_word = b_word
        self.zero_grads()

    @classmethod
    def create(cls, assignment, n_h, rng, bias=False):
        k, r = assignment.k, assignment.r
        return cls(
            assignment,
            init_matrix(r, n_h, rng),
            init_matrix(k, n_h, rng),
            np.zeros(r) if bias else None,
            np.zeros(k) if bias else None,
        )

    @property
    def k(self):
        return self.assignment.k

    def params(self) -> Arrays:
        out = {"w_class": self.w_class, "w_word": self.w_word}
        if self.b_class is not None:
            out["b_class"] = self.b_class
        if self.b_word is not None:
            out["b_word"] = self.b_word
        return out

    def _pieces(self, target):
        a = self.assignment
        if not 0 <= target < a.k:
            raise ValueError(f"word {target} has no class assignment")
        c = int(a.class_of[target])
        lo, hi = a.bounds[c], a.bounds[c + 1]
        rows = a.order[lo:hi]
        return c, rows, int(a.position[target] - lo)

    def factor_logprobs(self, state, target):
        """(log P(class|h), log P(word|class,h)) without touching gradients."""
        c, rows, slot = self._pieces(target)
        lp_c, _ = self._factor(self.w_class, self.b_class,
                               np.arange(self.assignment.r), state, c, False)
        lp_w, _ = self._factor(self.w_word, self.b_word, rows, state, slot, False)
        return lp_c, lp_w

    def logprob(self, state, x, target) -> float:
        lp_c, lp_w = self.factor_logprobs(state, target)
        return lp_c + lp_w

    def logprob_grad(self, state, x, target):
        c, rows, slot = self._pieces(target)
        all_classes = np.arange(self.assignment.r)
        lp_c, (dy_c, ds_c) = self._factor(self.w_class, self.b_class,
                                          all_classes, state, c, True)
        lp_w, (dy_w, ds_w) = self._factor(self.w_word, self.b_word,
                                          rows, state, slot, True)
        self._g["w_class"] += np.outer(dy_c, state)
        self._g["w_word"][rows] += np.outer(dy_w, state)
        if self.b_class is not None:
            self._g["b_class"] += dy_c
        if self.b_word is not None:
            self._g["b_word"][rows] += dy_w
        return lp_c + lp_w, ds_c + ds_w, None


class HierarchicalSoftmax(_Grouped):
    """Product of per-level branch softmaxes down to a word-in-leaf softmax.

    Every internal node owns its own rows of the level matrix, so node
    parameters are independent blocks conditioned on the path.
    """

    def __init__(self, code: HierarchicalCode, level_w: list, w_word,
                 level_b: list | None = None, b_word=None):
        self.code = code
        self.level_w = list(level_w)
        self.w_word = w_word
        self.level_b = list(level_b) if level_b is not None else None
        self.b_word = b_word
        self.zero_grads()

    @classmethod
    def create(cls, code, n_h, rng, bias=False):
        level_w = [init_matrix(g, n_h, rng) for g in code.group_counts()]
        level_b = [np.zeros(g) for g in code.group_counts()] if bias else None
        return cls(
            code,
            level_w,
            init_matrix(code.k, n_h, rng),
            level_b,
            np.zeros(code.k) if bias else None,
        )

    @property
    def k(self):
        return self.code.k

    def params(self) -> Arrays:
        out = {f"w_level{j + 1}": w for j, w in enumerate(self.level_w)}
        out["w_word"] = self.w_word
        if self.level_b is not None:
            out.update({f"b_level{j + 1}": b for j, b in enumerate(self.level_b)})
        if self.b_word is not None:
            out["b_word"] = self.b_word
        return out

    def _path(self, target):
        code = self.code
        if not 0 <= target < code.k:
            raise ValueError(f"word {target} has no hierarchical code")
        path = []
        for j in range(code.depth):
            g = int(code.group_of[j][target])
            if j == 0:
                lo, hi = 0, len(code.levels[0]) - 1
            else:
                parent = int(code.group_of[j - 1][target])
                lo = int(code.child_lo[j - 1][parent])
                hi = int(code.child_lo[j - 1][parent + 1])
            path.append((j, np.arange(lo, hi), g - lo))
        leaf = int(code.group_of[-1][target])
        wlo, whi = code.levels[-1][leaf], code.levels[-1][leaf + 1]
        rows = code.order[wlo:whi]
        slot = int(code.position[target] - wlo)
        return path, rows, slot

    def logprob(self, state, x, target) -> float:
        path, rows, slot = self._path(target)
        total = 0.0
        for j, groups, hit in path:
            b = None if self.level_b is None else self.level_b[j]
            lp, _ = self._factor(self.level_w[j], b, groups, state, hit, False)
            total += lp
        if len(rows) > 1:
            lp, _ = self._factor(self.w_word, self.b_word, rows, state, slot, False)
            total += lp
        return total

    def logprob_grad(self, state, x, target):
        path, rows, slot = self._path(target)
        total = 0.0
        d_state = np.zeros_like(state)
        for j, groups, hit in path:
            b = None if self.level_b is None else self.level_b[j]
            lp, (dy, ds) = self._factor(self.level_w[j], b, groups, state, hit, True)
            total += lp
            d_state += ds
            self._g[f"w_level{j + 1}"][groups] += np.outer(dy, state)
            if self.level_b is not None:
                self._g[f"b_level{j + 1}"][groups] += dy
        if len(rows) > 1:
            lp, (dy, ds) = self._factor(self.w_word, self.b_word, rows, state, slot, True)
            total += lp
            d_state += ds
            self._g["w_word"][rows] += np.outer(dy, state)
            if self.b_word is not None:
                self._g["b_word"][rows] += dy
        return total, d_state, None
