//! Minimum-weight matching on the spacetime defect graph of a repetition
//! code under phenomenological noise.
//!
//! Node `(t, i)` is check `i` in time slice `t`. A data flip between slices
//! joins neighbouring checks in one slice (or a check and the nearest code
//! boundary); a measurement error joins the same check in consecutive
//! slices. Path lengths on this grid are weighted Manhattan distances.

/// Largest defect cluster solved exactly by subset dynamic programming.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeGraph {
    pub distance: usize,
    /// Time slices including the final perfect one.
    pub slices: usize,
    pub w_space: f64,
    pub w_time: f64,
}

/// Log-likelihood weight of an independent error with probability `p`.
pub fn edge_weight(p: f64) -> f64 {
    let p = p.clamp(1e-15, 0.5 - 1e-12);
    ((1.0 - p) / p).ln()
}

impl SpacetimeGraph {
    pub fn new(distance: usize, slices: usize, p_flip: f64, p_meas: f64) -> Self {
        Self {
            distance,
            slices,
            w_space: edge_weight(p_flip),
            w_time: edge_weight(p_meas),
        }
    }

    pub fn checks(&self) -> usize {
        self.distance - 1
    }

    pub fn pair_weight(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        a.0.abs_diff(b.0) as f64 * self.w_time + a.1.abs_diff(b.1) as f64 * self.w_space
    }

    /// Cheapest boundary and whether it is the left one (qubit 0 side).
    pub fn boundary(&self, a: (usize, usize)) -> (f64, bool) {
        let left = (a.1 + 1) as f64 * self.w_space;
        let right = (self.distance - 1 - a.1) as f64 * self.w_space;
        if left <= right {
            (left, true)
        } else {
            (right, false)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Defect index pairs; `None` marks a boundary match.
    pub pairs: Vec<(usize, Option<usize>)>,
    pub weight: f64,
    /// Correction flips qubit 0 an odd number of times.
    pub flips_left_qubit: bool,
    /// Every cluster was solved exactly.
    pub exact: bool,
}

fn exact_cluster(
    g: &SpacetimeGraph,
    defects: &[(usize, usize)],
    ids: &[usize],
) -> Vec<(usize, Option<usize>)> {
    let n = ids.len();
    let full = (1usize << n) - 1;
    let mut cost = vec![f64::INFINITY; 1 << n];
    let mut choice = vec![(0usize, usize::MAX); 1 << n];
    cost[0] = 0.0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let a = defects[ids[i]];
        let mut best = g.boundary(a).0 + cost[rest];
        let mut pick = (i, usize::MAX);
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let c = g.pair_weight(a, defects[ids[j]]) + cost[rest & !(1 << j)];
            if c < best {
                best = c;
                pick = (i, j);
            }
        }
        cost[mask] = best;
        choice[mask] = pick;
    }
    let mut out = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let (i, j) = choice[mask];
        mask &= !(1 << i);
        if j == usize::MAX {
            out.push((ids[i], None));
        } else {
            mask &= !(1 << j);
            out.push((ids[i], Some(ids[j])));
        }
    }
    out
}

fn greedy_cluster(
    g: &SpacetimeGraph,
    defects: &[(usize, usize)],
    ids: &[usize],
) -> Vec<(usize, Option<usize>)> {
    let mut cands: Vec<(f64, usize, Option<usize>)> = Vec::new();
    for (x, &i) in ids.iter().enumerate() {
        cands.push((g.boundary(defects[i]).0, i, None));
        for &j in &ids[x + 1..] {
            cands.push((g.pair_weight(defects[i], defects[j]), i, Some(j)));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; defects.len()];
    let mut out = Vec::new();
    for (_, i, j) in cands {
        if used[i] || j.is_some_and(|j| used[j]) {
            continue;
        }
        used[i] = true;
        if let Some(j) = j {
            used[j] = true;
        }
        out.push((i, j));
    }
    out
}

/// Minimum-weight matching of `defects` (slice, check) with the boundary.
///
/// Two defects are only worth pairing when that beats sending both to the
/// boundary, so the defects split into independent clusters along such
/// links. Clusters up to [`EXACT_LIMIT`] are solved exactly, larger ones
/// greedily.
pub fn decode(g: &SpacetimeGraph, defects: &[(usize, usize)]) -> Matching {
    let n = defects.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let bw: Vec<f64> = defects.iter().map(|&d| g.boundary(d).0).collect();
    for i in 0..n {
        for j in i + 1..n {
            if g.pair_weight(defects[i], defects[j]) < bw[i] + bw[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[r]].push(i);
    }
    let mut pairs = Vec::new();
    let mut exact = true;
    for c in &clusters {
        if c.len() <= EXACT_LIMIT {
            pairs.extend(exact_cluster(g, defects, c));
        } else {
            exact = false;
            pairs.extend(greedy_cluster(g, defects, c));
        }
    }
    let mut weight = 0.0;
    let mut flips_left_qubit = false;
    for &(i, j) in &pairs {
        match j {
            Some(j) => weight += g.pair_weight(defects[i], defects[j]),
            None => {
                let (w, left) = g.boundary(defects[i]);
                weight += w;
                flips_left_qubit ^= left;
            }
        }
    }
    Matching {
        pairs,
        weight,
        flips_left_qubit,
        exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_single_defects() {
        let g = SpacetimeGraph::new(5, 3, 0.01, 0.01);
        let m = decode(&g, &[]);
        assert_eq!(m.weight, 0.0);
        assert!(!m.flips_left_qubit);
        let m = decode(&g, &[(1, 0)]);
        assert_eq!(m.pairs, vec![(0, None)]);
        assert!(m.flips_left_qubit);
        let m = decode(&g, &[(1, 3)]);
        assert!(!m.flips_left_qubit);
    }

    #[test]
    fn time_pair_beats_two_boundaries() {
        let g = SpacetimeGraph::new(7, 5, 0.01, 0.01);
        let m = decode(&g, &[(1, 3), (2, 3)]);
        assert_eq!(m.pairs.len(), 1);
        assert!((m.weight - g.w_time).abs() < 1e-12);
    }

    #[test]
    fn exact_and_greedy_agree_on_easy_cluster() {
        let g = SpacetimeGraph::new(9, 4, 0.02, 0.05);
        let d = [(0, 1), (0, 2), (3, 6), (3, 7)];
        let ids: Vec<usize> = (0..4).collect();
        let w = |p: &[(usize, Option<usize>)]| -> f64 {
            p.iter()
                .map(|&(i, j)| j.map_or(g.boundary(d[i]).0, |j| g.pair_weight(d[i], d[j])))
                .sum()
        };
        assert!((w(&exact_cluster(&g, &d, &ids)) - w(&greedy_cluster(&g, &d, &ids))).abs() < 1e-12);
    }
}
