"""Words, cylinder products, and cut-set construction over the level tree.

Three traversal engines back every tree quantity (cut-set sums, net-measure
dynamic programs, per-depth sums):

* ``UniformEngine``   — every level's maps are identical, so all words at a
  depth share one product; the tree collapses to a chain with multiplicities.
* ``DiagonalEngine``  — stationary diagonal families commute per axis, so
  words collapse to per-map choice counts with multinomial multiplicities.
* ``GenericEngine``   — vectorized level-by-level expansion with a node
  budget; the only engine that pays the exponential price.

Equal-product aggregation is the central performance decision: the shipped
block fixtures have 9^k-size levels that reduce to O(1) work per depth.
All multiplicities are exact Python integers; all magnitudes live in the
log domain so depth-hundreds products stay finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import BudgetExceeded, MoranDimError
from .linalg import Matrix, SingularValues, mat_mul, singular_values, sv2_batch
from .svf import branch_index, log_phi_from_logs
from .system import SystemSpec

DEFAULT_NODE_BUDGET = 10_000_000
_MAX_CHAIN_DEPTH = 1_000_000
_WORD_ENUM_CAP = 200_000
# Stopping comparisons happen in the log domain with a relative snap so the
# tie case alpha_m == epsilon stops even when the two floats were produced
# by different arithmetic paths.
_STOP_SNAP = 1e-12


# ---------------------------------------------------------------------------
# Words and products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Word:
    """A finite word with 1-based digits, digit j valid for level j."""

    digits: tuple

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))

    def __len__(self):
        return len(self.digits)

    def parent(self) -> "Word":
        return Word(self.digits[:-1])

    def child(self, digit: int) -> "Word":
        return Word(self.digits + (digit,))

    def is_prefix_of(self, other) -> bool:
        o = other.digits if isinstance(other, Word) else tuple(other)
        return len(self.digits) <= len(o) and o[: len(self.digits)] == self.digits

    def __str__(self):
        return "-".join(str(d) for d in self.digits) if self.digits else "(empty)"


def validate_word(spec: SystemSpec, w: Word) -> None:
    for j, d in enumerate(w.digits, start=1):
        n = spec.branch_count(j)
        if not 1 <= d <= n:
            raise MoranDimError(f"digit {d} at position {j} outside 1..{n}")


def common_prefix(u: Word, v: Word) -> Word:
    """Longest shared initial word of u and v."""
    out = []
    for a, b in zip(u.digits, v.digits):
        if a != b:
            break
        out.append(a)
    return Word(tuple(out))


@dataclass
class ProductNode:
    """Cached left-to-right product T_u with its singular values."""

    word: Word
    product: Matrix
    sv: SingularValues
    log_phi_cache: dict = field(default_factory=dict)

    def log_phi(self, s: float) -> float:
        key = float(s)
        if key not in self.log_phi_cache:
            self.log_phi_cache[key] = float(
                log_phi_from_logs(np.array(self.sv.log_values), key)
            )
        return self.log_phi_cache[key]


def product(spec: SystemSpec, w: Word, cache: Optional[dict] = None) -> ProductNode:
    """The product node for ``w``; children extend parents by one multiplication.

    Pass a dict as ``cache`` to share prefix products across calls.
    """
    validate_word(spec, w)
    if cache is None:
        cache = {}
    root = cache.get(())
    if root is None:
        ident = Matrix.identity(spec.dim)
        root = ProductNode(Word(()), ident, singular_values(ident))
        cache[()] = root
    node = root
    for j, d in enumerate(w.digits, start=1):
        key = w.digits[:j]
        nxt = cache.get(key)
        if nxt is None:
            mat = mat_mul(node.product, spec.level(j).maps[d - 1])
            nxt = ProductNode(Word(key), mat, singular_values(mat))
            cache[key] = nxt
        node = nxt
    return node


# ---------------------------------------------------------------------------
# Log-domain helpers
# ---------------------------------------------------------------------------

def logsumexp(values) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return -math.inf
    m = float(np.max(arr))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(arr - m))))


def log_int(n: int) -> float:
    """Natural log of a (possibly huge) positive integer."""
    return math.log(n)


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------

class UniformEngine:
    """Chain engine for schedules whose levels each hold one repeated map."""

    kind = "uniform"

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.d = spec.dim
        self._counts = [1]            # exact word count per depth
        self._log_svs = [np.zeros(self.d)]
        self._chain = np.eye(self.d)  # normalized running product
        self._log_scale = 0.0
        self._log_det = 0.0

    def _extend(self, t: int) -> None:
        while len(self._counts) <= t:
            k = len(self._counts)
            lvl = self.spec.level(k)
            mat = lvl.maps[0].entries
            raw = self._chain @ mat
            scale = float(np.max(np.abs(raw)))
            if scale <= 0.0:
                raise MoranDimError(f"level {k} map drives the chain product to zero")
            self._chain = raw / scale
            self._log_scale += math.log(scale)
            self._log_det += math.log(abs(lvl.maps[0].det()))
            if self.d == 1:
                logs = np.array([self._log_scale + math.log(abs(self._chain[0, 0]))])
                self._chain = np.eye(1)
                self._log_scale = logs[0]
            elif self.d == 2:
                s1, _ = sv2_batch(self._chain[None])
                l1 = self._log_scale + math.log(float(s1[0]))
                logs = np.array([l1, self._log_det - l1])
            else:
                vals = np.linalg.svd(self._chain, compute_uv=False)
                logs = self._log_scale + np.log(vals)
            self._counts.append(self._counts[-1] * lvl.branch_count)
            self._log_svs.append(logs)
            if k > _MAX_CHAIN_DEPTH:
                raise BudgetExceeded(f"chain depth exceeds {_MAX_CHAIN_DEPTH}")

    def count_at(self, t: int) -> int:
        self._extend(t)
        return self._counts[t]

    def log_svs_at(self, t: int) -> np.ndarray:
        self._extend(t)
        return self._log_svs[t]

    def stop_depth(self, m: int, log_eps: float) -> int:
        t = 1
        while True:
            if self.log_svs_at(t)[m - 1] <= log_eps + _STOP_SNAP:
                return t
            t += 1

    def cutset_groups(self, s: float, log_eps: float, node_budget: int):
        m = branch_index(s, self.d)
        t = self.stop_depth(m, log_eps)
        count = self.count_at(t)
        grp = CutGroup(
            depth=t,
            count=count,
            log_count=log_int(count),
            log_phi=float(log_phi_from_logs(self.log_svs_at(t), s)),
            log_alpha_m=float(self.log_svs_at(t)[m - 1]),
            log_alpha_m_parent=float(self.log_svs_at(t - 1)[m - 1]),
        )
        return [grp], False, t

    def schedule_log_sums(self, s: float, log_eps_list, node_budget: int):
        m = branch_index(s, self.d)
        sums, complete = [], []
        t = 1
        for le in log_eps_list:
            while self.log_svs_at(t)[m - 1] > le + _STOP_SNAP:
                t += 1
            sums.append(log_int(self.count_at(t)) + float(log_phi_from_logs(self.log_svs_at(t), s)))
            complete.append(True)
        return sums, complete, t

    def net_measure_log(self, s: float, k: int, K: int, node_budget: int):
        self._extend(K)
        v = float(log_phi_from_logs(self.log_svs_at(K), s))
        for t in range(K - 1, -1, -1):
            child = math.log(self.spec.level(t + 1).branch_count) + v
            if t >= k:
                v = min(float(log_phi_from_logs(self.log_svs_at(t), s)), child)
            else:
                v = child
        return v, False, K

    def level_log_sums(self, s: float, depths):
        return [
            log_int(self.count_at(t)) + float(log_phi_from_logs(self.log_svs_at(t), s))
            for t in depths
        ]


class DiagonalEngine:
    """Choice-count engine for stationary families of diagonal maps.

    Diagonal maps commute per axis, so a word reduces to how many times
    each map was chosen; per-axis log products are linear in those counts.
    The composition lattice (one row per count vector, per depth) is cached
    independently of the exponent, and every per-exponent pass is a
    vectorized sweep over it.  Multiplicities stay exact integers on the
    small cut-set path and live in the log domain on the schedule path.
    """

    kind = "diagonal"

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.d = spec.dim
        lvl = spec.schedule.levels[0]
        self.n_maps = lvl.branch_count
        self.log_c = np.array(
            [[math.log(abs(m.entries[i, i])) for i in range(self.d)] for m in lvl.maps]
        )  # (M, d)
        self._comps = [np.zeros((1, self.n_maps), dtype=np.int64)]
        self._child_idx = []  # child_idx[t][i, j] = row of comps[t][i]+e_j in comps[t+1]
        self._log_fact = np.zeros(1)

    # -- composition lattice -------------------------------------------------
    def _extend_lattice(self, t: int) -> None:
        while len(self._comps) <= t:
            cur = self._comps[-1]
            M = self.n_maps
            stacked = np.repeat(cur, M, axis=0)
            bump = np.tile(np.eye(M, dtype=np.int64), (cur.shape[0], 1))
            children = stacked + bump
            nxt, inverse = np.unique(children, axis=0, return_inverse=True)
            self._comps.append(nxt)
            self._child_idx.append(inverse.reshape(cur.shape[0], M))

    def comps_at(self, t: int) -> np.ndarray:
        self._extend_lattice(t)
        return self._comps[t]

    def child_rows(self, t: int) -> np.ndarray:
        self._extend_lattice(t + 1)
        return self._child_idx[t]

    def _log_svs_of(self, comps: np.ndarray) -> np.ndarray:
        """(C, d) descending log singular values for composition rows."""
        prods = comps.astype(float) @ self.log_c
        return -np.sort(-prods, axis=1)

    def _log_factorials(self, n: int) -> np.ndarray:
        if self._log_fact.size <= n:
            ln = np.concatenate([[0.0], np.log(np.arange(1, n + 1, dtype=float))])
            self._log_fact = np.cumsum(ln)
        return self._log_fact

    def _log_multinomials(self, comps: np.ndarray) -> np.ndarray:
        t = int(comps[0].sum())
        lf = self._log_factorials(t)
        return lf[t] - lf[comps].sum(axis=1)

    @staticmethod
    def _multinomial(comp) -> int:
        total = int(sum(comp))
        out = 1
        for c in comp:
            out *= math.comb(total, int(c))
            total -= int(c)
        return out

    # -- cut-sets ------------------------------------------------------------
    def cutset_groups(self, s: float, log_eps: float, node_budget: int):
        m = branch_index(s, self.d)
        groups, truncated, nodes = [], False, 0
        frontier = {(0,) * self.n_maps: 1}  # comp -> exact alive word count
        depth = 0
        while frontier:
            depth += 1
            children = {}
            for comp in sorted(frontier):
                count = frontier[comp]
                parent_la = float(self._log_svs_of(np.asarray([comp]))[0, m - 1])
                for j in range(self.n_maps):
                    child = tuple(c + (1 if i == j else 0) for i, c in enumerate(comp))
                    logs = self._log_svs_of(np.asarray([child]))[0]
                    la = float(logs[m - 1])
                    if la <= log_eps + _STOP_SNAP:
                        groups.append(
                            CutGroup(
                                depth=depth,
                                count=count,
                                log_count=log_int(count),
                                log_phi=float(log_phi_from_logs(logs, s)),
                                log_alpha_m=la,
                                log_alpha_m_parent=parent_la,
                            )
                        )
                    else:
                        children[child] = children.get(child, 0) + count
            nodes += len(children)
            if nodes > node_budget:
                truncated = True
                break
            frontier = children
        return _merge_groups(groups), truncated, nodes

    def schedule_log_sums(self, s: float, log_eps_list, node_budget: int):
        m = branch_index(s, self.d)
        le = np.asarray(log_eps_list)   # decreasing
        neg_le = -(le + _STOP_SNAP)     # increasing, for searchsorted
        J = len(le)
        buckets = np.full(J, -math.inf)
        log_eps_min = float(le[-1])
        nodes = 0
        truncated = False
        frontier_alpha_max = -math.inf

        t = 0
        alive = np.array([True])
        log_counts = np.zeros(1)
        parent_la = self._log_svs_of(self.comps_at(0))[:, m - 1]
        while alive.any():
            child_rows = self.child_rows(t)
            child_comps = self.comps_at(t + 1)
            child_logs = self._log_svs_of(child_comps)
            child_la = child_logs[:, m - 1]
            child_lph = np.asarray(log_phi_from_logs(child_logs, s))
            # edges from alive parents
            src = np.nonzero(alive)[0]
            rows = child_rows[src]                      # (A, M)
            e_parent_la = np.repeat(parent_la[src], self.n_maps)
            e_child = rows.reshape(-1)
            e_terms = np.repeat(log_counts[src], self.n_maps) + child_lph[e_child]
            e_child_la = child_la[e_child]
            i_lo = np.searchsorted(neg_le, -e_parent_la, side="right")
            i_hi = np.searchsorted(neg_le, -e_child_la, side="right")
            for b in range(J):
                mask = (i_lo <= b) & (b < i_hi)
                if mask.any():
                    buckets[b] = np.logaddexp(buckets[b], logsumexp(e_terms[mask]))
            # propagate alive mass to children
            cont = e_child_la > log_eps_min + _STOP_SNAP
            child_counts = np.full(child_comps.shape[0], -math.inf)
            np.logaddexp.at(child_counts, e_child[cont], e_terms[cont] - child_lph[e_child[cont]])
            alive = child_counts > -math.inf
            nodes += int(alive.sum())
            if nodes > node_budget and alive.any():
                truncated = True
                frontier_alpha_max = float(child_la[alive].max())
                break
            log_counts = child_counts
            parent_la = child_la
            t += 1
        sums = [float(v) for v in buckets]
        if truncated:
            complete = [frontier_alpha_max <= float(l) for l in le]
        else:
            complete = [True] * len(le)
        return sums, complete, nodes

    # -- net measure and level sums -------------------------------------------
    def net_measure_log(self, s: float, k: int, K: int, node_budget: int):
        nodes = sum(self.comps_at(t).shape[0] for t in range(K + 1))
        if nodes > node_budget:
            raise BudgetExceeded(f"net-measure state count {nodes} exceeds budget")
        v = np.asarray(log_phi_from_logs(self._log_svs_of(self.comps_at(K)), s))
        for t in range(K - 1, -1, -1):
            rows = self.child_rows(t)                   # (C_t, M)
            grouped = v[rows]
            mx = grouped.max(axis=1)
            child = mx + np.log(np.exp(grouped - mx[:, None]).sum(axis=1))
            if t >= k:
                own = np.asarray(log_phi_from_logs(self._log_svs_of(self.comps_at(t)), s))
                v = np.minimum(own, child)
            else:
                v = child
        return float(v[0]), False, nodes

    def level_log_sums(self, s: float, depths):
        out = []
        for t in depths:
            comps = self.comps_at(t)
            logs = self._log_svs_of(comps)
            terms = self._log_multinomials(comps) + np.asarray(log_phi_from_logs(logs, s))
            out.append(logsumexp(terms))
        return out


class GenericEngine:
    """Budgeted vectorized level-by-level expansion for heterogeneous systems."""

    kind = "generic"

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.d = spec.dim
        self._level_cache = {}

    def _level_maps(self, k: int):
        if k not in self._level_cache:
            lvl = self.spec.level(k)
            mats = np.stack([m.entries for m in lvl.maps])
            logdets = np.array([math.log(abs(m.det())) for m in lvl.maps])
            self._level_cache[k] = (mats, logdets)
        return self._level_cache[k]

    @staticmethod
    def _root():
        return {
            "Q": None,  # set lazily per dim
            "log_scale": np.zeros(1),
            "log_det": np.zeros(1),
        }

    def _expand(self, state, k: int):
        """Children of every node in ``state`` through level k's maps."""
        mats, logdets = self._level_maps(k)
        n = mats.shape[0]
        Q = state["Q"]
        raw = np.einsum("nij,mjk->nmik", Q, mats).reshape(-1, self.d, self.d)
        log_scale = np.repeat(state["log_scale"], n)
        log_det = np.repeat(state["log_det"], n) + np.tile(logdets, Q.shape[0])
        if self.d == 1:
            a1 = np.abs(raw[:, 0, 0])
        elif self.d == 2:
            a1, _ = sv2_batch(raw)
        else:
            a1 = np.linalg.svd(raw, compute_uv=False)[:, 0]
        log_scale = log_scale + np.log(a1)
        Q_next = raw / a1[:, None, None]
        return {"Q": Q_next, "log_scale": log_scale, "log_det": log_det}

    def _log_svs(self, state) -> np.ndarray:
        """(N, d) descending log singular values for a level state."""
        ls = state["log_scale"]
        if self.d == 1:
            return ls[:, None]
        if self.d == 2:
            return np.stack([ls, state["log_det"] - ls], axis=1)
        vals = np.linalg.svd(state["Q"], compute_uv=False)
        return ls[:, None] + np.log(vals)

    def _initial(self):
        return {
            "Q": np.eye(self.d)[None],
            "log_scale": np.zeros(1),
            "log_det": np.zeros(1),
        }

    def schedule_log_sums(self, s: float, log_eps_list, node_budget: int):
        m = branch_index(s, self.d)
        le = np.asarray(log_eps_list)
        log_eps_min = float(le[-1])
        buckets = [[] for _ in le]
        state = self._initial()
        parent_alpha = np.zeros(1)
        nodes = 0
        truncated = False
        frontier_alpha_max = -math.inf
        depth = 0
        while state["Q"].shape[0] > 0:
            depth += 1
            n = self.spec.level(depth).branch_count
            if nodes + state["Q"].shape[0] * n > node_budget:
                truncated = True
                frontier_alpha_max = float(np.max(parent_alpha))
                break
            child = self._expand(state, depth)
            nodes += child["log_scale"].size
            logs = self._log_svs(child)
            la = logs[:, m - 1]
            pa = np.repeat(parent_alpha, n)
            lph = log_phi_from_logs(logs, s)
            for i, eps_i in enumerate(le):
                mask = (la <= eps_i + _STOP_SNAP) & (pa > eps_i + _STOP_SNAP)
                if np.any(mask):
                    buckets[i].append(logsumexp(lph[mask]))
            alive = la > log_eps_min + _STOP_SNAP
            state = {
                "Q": child["Q"][alive],
                "log_scale": child["log_scale"][alive],
                "log_det": child["log_det"][alive],
            }
            parent_alpha = la[alive]
        sums = [logsumexp(b) for b in buckets]
        if truncated:
            complete = [frontier_alpha_max <= float(l) for l in le]
        else:
            complete = [True] * len(le)
        return sums, complete, nodes

    def cutset_groups(self, s: float, log_eps: float, node_budget: int):
        sums_state = self._initial()
        m = branch_index(s, self.d)
        groups = []
        parent_alpha = np.zeros(1)
        nodes = 0
        truncated = False
        depth = 0
        state = sums_state
        while state["Q"].shape[0] > 0:
            depth += 1
            n = self.spec.level(depth).branch_count
            if nodes + state["Q"].shape[0] * n > node_budget:
                truncated = True
                break
            child = self._expand(state, depth)
            nodes += child["log_scale"].size
            logs = self._log_svs(child)
            la = logs[:, m - 1]
            pa = np.repeat(parent_alpha, n)
            stopped = la <= log_eps + _STOP_SNAP
            lph = log_phi_from_logs(logs, s)
            for i in np.nonzero(stopped)[0]:
                groups.append(
                    CutGroup(
                        depth=depth,
                        count=1,
                        log_count=0.0,
                        log_phi=float(lph[i]),
                        log_alpha_m=float(la[i]),
                        log_alpha_m_parent=float(pa[i]),
                    )
                )
            alive = ~stopped
            state = {
                "Q": child["Q"][alive],
                "log_scale": child["log_scale"][alive],
                "log_det": child["log_det"][alive],
            }
            parent_alpha = la[alive]
        return groups, truncated, nodes

    def max_depth_within(self, node_budget: int, K_cap: int = 64) -> int:
        total, t = 1, 0
        width = 1
        while t < K_cap:
            width *= self.spec.level(t + 1).branch_count
            if total + width > node_budget:
                break
            total += width
            t += 1
        return max(t, 1)

    def _tree_log_svs(self, K: int, node_budget: int):
        """Full tree to depth K as per-level (N_t, d) log-sv arrays."""
        levels = []
        state = self._initial()
        total = 1
        for t in range(1, K + 1):
            n = self.spec.level(t).branch_count
            if total + state["Q"].shape[0] * n > node_budget:
                return levels, True
            state = self._expand(state, t)
            total += state["log_scale"].size
            levels.append(self._log_svs(state))
        return levels, False

    def _net_dp_from_logphi(self, logphi, k: int, K_eff: int) -> float:
        v = logphi[K_eff - 1]
        for t in range(K_eff - 1, 0, -1):
            n = self.spec.level(t + 1).branch_count
            grouped = v.reshape(-1, n)
            mx = grouped.max(axis=1, keepdims=True)
            child = (mx + np.log(np.exp(grouped - mx).sum(axis=1, keepdims=True))).reshape(-1)
            if t >= k:
                v = np.minimum(logphi[t - 1], child)
            else:
                v = child
        mx = float(np.max(v))
        return mx + math.log(float(np.sum(np.exp(v - mx))))

    def net_measure_log(self, s: float, k: int, K: int, node_budget: int):
        levels, truncated = self._tree_log_svs(K, node_budget)
        K_eff = len(levels)
        if K_eff < k:
            raise BudgetExceeded(
                f"net-measure tree to depth {k} does not fit the node budget"
            )
        logphi = [np.asarray(log_phi_from_logs(lv, s), dtype=float).reshape(-1)
                  for lv in levels]
        root = self._net_dp_from_logphi(logphi, k, K_eff)
        nodes = sum(len(l) for l in levels)
        return root, truncated or K_eff < K, nodes

    def net_measure_series(self, s: float, windows, node_budget: int):
        """Values for many (k, K) windows off one shared tree expansion."""
        K_max = max(K for _, K in windows)
        levels, truncated = self._tree_log_svs(K_max, node_budget)
        K_eff = len(levels)
        logphi = [np.asarray(log_phi_from_logs(lv, s), dtype=float).reshape(-1)
                  for lv in levels]
        out = []
        for k, K in windows:
            Kw = min(K, K_eff)
            if Kw < k:
                out.append(None)
                continue
            root = self._net_dp_from_logphi(logphi, k, Kw)
            out.append((root, truncated or Kw < K))
        return out

    def level_log_sums(self, s: float, depths):
        want = sorted(set(int(t) for t in depths))
        out = {}
        state = self._initial()
        for t in range(1, want[-1] + 1):
            state = self._expand(state, t)
            if t in want:
                lph = np.asarray(log_phi_from_logs(self._log_svs(state), s)).reshape(-1)
                out[t] = logsumexp(lph)
        return [out[t] for t in depths]


def make_engine(spec: SystemSpec):
    """Pick the cheapest sound engine for this system."""
    levels = spec.schedule.distinct_levels()
    if all(lvl.maps_all_identical() for lvl in levels):
        return UniformEngine(spec)
    if spec.schedule.kind == "constant" and levels[0].maps_all_diagonal():
        return DiagonalEngine(spec)
    return GenericEngine(spec)


# ---------------------------------------------------------------------------
# Cut-sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutGroup:
    """A bundle of cut-set words sharing depth, product magnitudes, and cost."""

    depth: int
    count: int
    log_count: float
    log_phi: float
    log_alpha_m: float
    log_alpha_m_parent: float


def _merge_groups(groups):
    merged = {}
    for g in groups:
        key = (g.depth, round(g.log_phi, 12), round(g.log_alpha_m, 12),
               round(g.log_alpha_m_parent, 12))
        if key in merged:
            old = merged[key]
            cnt = old.count + g.count
            merged[key] = CutGroup(
                depth=g.depth,
                count=cnt,
                log_count=log_int(cnt),
                log_phi=g.log_phi,
                log_alpha_m=g.log_alpha_m,
                log_alpha_m_parent=g.log_alpha_m_parent,
            )
        else:
            merged[key] = g
    return list(merged.values())


@dataclass
class CutSet:
    """The stopping family for (s, epsilon) with per-group log costs."""

    spec: SystemSpec
    s: float
    m: int
    epsilon: float
    groups: list
    truncated: bool
    node_budget_used: int

    def word_count(self) -> int:
        return sum(g.count for g in self.groups)

    def log_sum(self) -> float:
        return logsumexp([g.log_count + g.log_phi for g in self.groups])

    def entries(self, max_words: int = _WORD_ENUM_CAP) -> Iterator[tuple]:
        """Enumerate (Word, log_phi) pairs via an independent recursive walk."""
        yield from iter_cutset_words(self.spec, self.s, self.epsilon, max_words)


def iter_cutset_words(spec: SystemSpec, s: float, epsilon: float,
                      max_words: int = _WORD_ENUM_CAP) -> Iterator[tuple]:
    """Depth-first enumeration of the cut-set words with their log costs.

    Independent of the engines: plain per-word products with rescaling.
    Intended for dumps and small-system tests; raises BudgetExceeded past
    ``max_words`` emitted words.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if s <= 0:
        raise ValueError("cut-sets need s > 0")
    d = spec.dim
    m = branch_index(s, d)
    log_eps = math.log(epsilon)
    emitted = 0

    def log_svs_of(Q, log_scale, log_det):
        if d == 1:
            return np.array([log_scale + math.log(abs(Q[0, 0]))])
        if d == 2:
            s1, _ = sv2_batch(Q[None])
            l1 = log_scale + math.log(float(s1[0]))
            return np.array([l1, log_det - l1])
        return log_scale + np.log(np.linalg.svd(Q, compute_uv=False))

    stack = [((), np.eye(d), 0.0, 0.0)]
    while stack:
        digits, Q, log_scale, log_det = stack.pop()
        depth = len(digits) + 1
        lvl = spec.level(depth)
        # push children in reverse so emission order is digit-ascending
        pending = []
        for j in range(1, lvl.branch_count + 1):
            mat = lvl.maps[j - 1]
            raw = Q @ mat.entries
            scale = float(np.max(np.abs(raw)))
            Q2 = raw / scale
            ls2 = log_scale + math.log(scale)
            ld2 = log_det + math.log(abs(mat.det()))
            logs = log_svs_of(Q2, ls2, ld2)
            if logs[m - 1] <= log_eps + _STOP_SNAP:
                emitted += 1
                if emitted > max_words:
                    raise BudgetExceeded(
                        f"cut-set enumeration exceeds {max_words} words"
                    )
                yield Word(digits + (j,)), float(log_phi_from_logs(logs, s))
            else:
                pending.append((digits + (j,), Q2, ls2, ld2))
        stack.extend(reversed(pending))


def cutset(spec: SystemSpec, s: float, epsilon: float,
           node_budget: int = DEFAULT_NODE_BUDGET) -> CutSet:
    """Build the stopping family: descend while alpha_m > epsilon, emit the
    first word where it drops to <= epsilon (ties stop)."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if s <= 0:
        raise ValueError("cut-sets need s > 0")
    if node_budget < 1:
        raise ValueError("node_budget must be >= 1")
    engine = make_engine(spec)
    m = branch_index(s, spec.dim)
    groups, truncated, nodes = engine.cutset_groups(s, math.log(epsilon), node_budget)
    return CutSet(
        spec=spec,
        s=float(s),
        m=m,
        epsilon=float(epsilon),
        groups=groups,
        truncated=truncated,
        node_budget_used=nodes,
    )


def cutset_sum(c: CutSet) -> float:
    """Sum of phi^s over the cut-set, by exact summation in a fixed order."""
    return math.fsum(math.exp(g.log_count + g.log_phi) for g in c.groups)
