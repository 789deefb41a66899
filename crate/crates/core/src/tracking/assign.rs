use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Platform-to-hand pairing. `mapping[p]` is the hand index served by
/// platform `p`, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub mapping: Vec<Option<usize>>,
    /// Sum of platform-to-hand distances, accumulated in platform order.
    pub cost: f64,
}

impl Assignment {
    pub fn empty(platforms: usize) -> Self {
        Self {
            mapping: vec![None; platforms],
            cost: 0.0,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mapping.iter().enumerate().filter_map(|(p, h)| h.map(|h| (p, h)))
    }

    pub fn platform_for(&self, hand: usize) -> Option<usize> {
        self.mapping.iter().position(|h| *h == Some(hand))
    }
}

pub(crate) fn mapping_cost(platforms: &[Vec2], hands: &[Vec2], mapping: &[Option<usize>]) -> f64 {
    mapping
        .iter()
        .enumerate()
        .filter_map(|(p, h)| h.map(|h| platforms[p].distance(hands[h])))
        .sum()
}

/// Minimum-cost injective pairing of platforms with hands (Euclidean
/// distance), pairing as many as possible. Exact ties go to the
/// lexicographically smallest mapping: lower platform ids take lower hand ids.
pub fn assign(platforms: &[Vec2], hands: &[Vec2]) -> Assignment {
    let (n, m) = (platforms.len(), hands.len());
    if n == 0 || m == 0 {
        return Assignment::empty(n);
    }
    let cost: Vec<Vec<f64>> = platforms
        .iter()
        .map(|p| hands.iter().map(|h| p.distance(*h)).collect())
        .collect();
    let rows = hungarian(&cost);
    let mut mapping: Vec<Option<usize>> = rows.into_iter().map(|c| c.filter(|&c| c < m)).collect();
    break_ties(platforms, hands, &mut mapping);
    let cost = mapping_cost(platforms, hands, &mapping);
    Assignment { mapping, cost }
}

/// Kuhn-Munkres with row/column potentials on the zero-padded square matrix.
/// Returns the column assigned to each row (`None` for padding).
fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    let m = cost.first().map_or(0, |r| r.len());
    let k = n.max(m);
    let at = |i: usize, j: usize| if i < n && j < m { cost[i][j] } else { 0.0 };

    // 1-based; index 0 is the virtual source column
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut owner = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for row in 1..=k {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![None; n];
    for j in 1..=k {
        let i = owner[j];
        if i >= 1 && i <= n {
            result[i - 1] = Some(j - 1);
        }
    }
    result
}

fn lex_key(mapping: &[Option<usize>]) -> Vec<usize> {
    mapping.iter().map(|h| h.unwrap_or(usize::MAX)).collect()
}

/// Applies cost-neutral swaps that make the mapping lexicographically smaller.
fn break_ties(platforms: &[Vec2], hands: &[Vec2], mapping: &mut [Option<usize>]) {
    let n = mapping.len();
    let tol = |c: f64| 1e-12 * c.abs().max(1e-12);
    loop {
        let base = mapping_cost(platforms, hands, mapping);
        let key = lex_key(mapping);
        let mut best: Option<Vec<Option<usize>>> = None;
        let mut consider = |cand: Vec<Option<usize>>| {
            let c = mapping_cost(platforms, hands, &cand);
            if (c - base).abs() <= tol(base) && lex_key(&cand) < key {
                let better = best.as_ref().is_none_or(|b| lex_key(&cand) < lex_key(b));
                if better {
                    best = Some(cand);
                }
            }
        };
        for i in 0..n {
            for j in (i + 1)..n {
                if mapping[i] != mapping[j] {
                    let mut cand = mapping.to_vec();
                    cand.swap(i, j);
                    consider(cand);
                }
            }
            if mapping[i].is_some() {
                for h in 0..hands.len() {
                    if !mapping.contains(&Some(h)) {
                        let mut cand = mapping.to_vec();
                        cand[i] = Some(h);
                        consider(cand);
                    }
                }
            }
        }
        match best {
            Some(b) => mapping.copy_from_slice(&b),
            None => break,
        }
    }
}
