"""Maximum bipartite matching and min-max (bottleneck) assignment."""

from __future__ import annotations

from collections import deque

import numpy as np

UNMATCHED = -1


def hopcroft_karp(n_left: int, n_right: int, adj: list[list[int]],
                  match_left: list[int] | None = None) -> list[int]:
    """Maximum matching; ``adj[u]`` lists right neighbours of left vertex u.

    ``match_left`` is an optional valid partial matching to start from.
    Neighbours are tried in list order, so results are deterministic.
    """
    if match_left is None:
        match_left = [UNMATCHED] * n_left
    else:
        match_left = list(match_left)
    match_right = [UNMATCHED] * n_right
    for u, v in enumerate(match_left):
        if v != UNMATCHED:
            match_right[v] = u
    inf = n_left + n_right + 1

    while True:
        # layered BFS from free left vertices
        dist = [inf] * n_left
        queue = deque()
        for u in range(n_left):
            if match_left[u] == UNMATCHED:
                dist[u] = 0
                queue.append(u)
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_right[v]
                if w == UNMATCHED:
                    found = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if not found:
            return match_left

        # iterative DFS along the layers
        pos = [0] * n_left
        for root in range(n_left):
            if match_left[root] != UNMATCHED:
                continue
            stack = [root]
            while stack:
                u = stack[-1]
                advanced = False
                while pos[u] < len(adj[u]):
                    v = adj[u][pos[u]]
                    pos[u] += 1
                    w = match_right[v]
                    if w == UNMATCHED:
                        # augment along the stack
                        for x in reversed(stack):
                            prev = match_left[x]
                            match_left[x] = v
                            match_right[v] = x
                            v = prev
                        stack = []
                        advanced = True
                        break
                    if dist[w] == dist[u] + 1:
                        stack.append(w)
                        advanced = True
                        break
                if not advanced:
                    dist[u] = inf
                    stack.pop()


def _adjacency(n_left, rows, cols, keep):
    adj = [[] for _ in range(n_left)]
    for r, c in zip(rows[keep].tolist(), cols[keep].tolist()):
        adj[r].append(c)
    return adj


def bottleneck_assignment(n: int, rows, cols, costs):
    """Perfect matching minimizing the maximum edge cost on a sparse graph.

    Returns ``(value, match)`` where ``match[i]`` is the partner of left
    vertex ``i``, or ``(inf, None)`` when no perfect matching exists.  Edges
    are ordered by (cost, row, col), which fixes the tie-breaking.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    costs = np.asarray(costs, dtype=float)
    if n == 0:
        return 0.0, []
    order = np.lexsort((cols, rows, costs))
    rows, cols, costs = rows[order], cols[order], costs[order]
    values = np.unique(costs)

    def attempt(k, warm):
        keep = costs <= values[k]
        adj = _adjacency(n, rows, cols, keep)
        start = None
        if warm is not None:
            allowed = [set(a) for a in adj]
            start = [v if v != UNMATCHED and v in allowed[u] else UNMATCHED
                     for u, v in enumerate(warm)]
            # drop duplicates of right vertices (cannot happen for a valid matching)
        match = hopcroft_karp(n, n, adj, start)
        return match, all(v != UNMATCHED for v in match)

    match, ok = attempt(len(values) - 1, None)
    if not ok:
        return float("inf"), None
    lo, hi = 0, len(values) - 1
    best = match
    warm = match
    while lo < hi:
        mid = (lo + hi) // 2
        match, ok = attempt(mid, warm)
        warm = match
        if ok:
            hi = mid
            best = match
        else:
            lo = mid + 1
    return float(values[hi]), best


def dense_bottleneck(cost: np.ndarray):
    """Bottleneck assignment for a full ``n x n`` cost matrix."""
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    rows, cols = np.indices(cost.shape)
    return bottleneck_assignment(n, rows.ravel(), cols.ravel(), cost.ravel())
