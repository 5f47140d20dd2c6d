//! Gauge vectors and the parity union-find that solves `d_i d_j = sgn(a_ij)`.

use serde::{Deserialize, Serialize};

use crate::{Matrix, Scalar};

/// Diagonal `±1` signature `D`.
///
/// Gauges produced by this crate are canonical: the smallest-index node of
/// every weakly connected component carries `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gauge(Vec<i8>);

impl Gauge {
    /// Panics unless every entry is `+1` or `-1`.
    pub fn new(signs: Vec<i8>) -> Self {
        assert!(signs.iter().all(|&s| s == 1 || s == -1), "gauge entries must be +1 or -1");
        Self(signs)
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    /// `D 1_n` as a real vector.
    pub fn to_vector<T: Scalar>(&self) -> Vec<T> {
        self.0.iter().map(|&s| if s > 0 { T::one() } else { -T::one() }).collect()
    }

    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_diagonal(&self.to_vector())
    }

    /// `D M D`.
    pub fn conjugate<T: Scalar>(&self, m: &Matrix<T>) -> Matrix<T> {
        m.conjugate_by_signs(&self.0)
    }

    /// `D x`.
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.0).map(|(&v, &s)| if s > 0 { v } else { -v }).collect()
    }

    /// Whether `d_i d_j a_ij >= 0` for every entry, i.e. `D A D = |A|`.
    pub fn certifies<T: Scalar>(&self, adj: &Matrix<T>) -> bool {
        let n = self.len();
        adj.nrows() == n
            && (0..n).all(|i| {
                (0..n).all(|j| {
                    let a = adj[(i, j)];
                    if self.0[i] == self.0[j] {
                        a >= T::zero()
                    } else {
                        a <= T::zero()
                    }
                })
            })
    }
}

/// Union-find where each node stores its parity relative to its parent.
#[derive(Debug, Clone)]
pub(crate) struct ParityUnionFind {
    parent: Vec<usize>,
    odd: Vec<bool>,
    rank: Vec<u8>,
}

impl ParityUnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), odd: vec![false; n], rank: vec![0; n] }
    }

    /// Root of `x` and the parity of `x` relative to it.
    pub fn find(&mut self, x: usize) -> (usize, bool) {
        let mut path = Vec::new();
        let mut v = x;
        while self.parent[v] != v {
            path.push(v);
            v = self.parent[v];
        }
        let root = v;
        // compress from the node nearest the root outwards
        for &u in path.iter().rev() {
            let p = self.parent[u];
            if p != root {
                self.odd[u] ^= self.odd[p];
            }
            self.parent[u] = root;
        }
        (root, self.odd[x] && x != root)
    }

    /// Records `parity(a) xor parity(b) == odd`; `false` on contradiction.
    pub fn relate(&mut self, a: usize, b: usize, odd: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return (pa ^ pb) == odd;
        }
        let (child, root) = if self.rank[ra] < self.rank[rb] { (ra, rb) } else { (rb, ra) };
        if self.rank[ra] == self.rank[rb] {
            self.rank[root] += 1;
        }
        self.parent[child] = root;
        self.odd[child] = pa ^ pb ^ odd;
        true
    }
}

/// Solves the sign constraints `(i, j, negative)` meaning
/// `d_i d_j = -1` when `negative`, `+1` otherwise.
///
/// Returns the canonical gauge, or `None` if the constraints are
/// contradictory (a conflicting digon or an odd negative cycle).
pub(crate) fn solve_gauge(n: usize, constraints: impl IntoIterator<Item = (usize, usize, bool)>) -> Option<Gauge> {
    let mut uf = ParityUnionFind::new(n);
    for (i, j, negative) in constraints {
        if !uf.relate(i, j, negative) {
            return None;
        }
    }
    let mut root_first: Vec<Option<usize>> = vec![None; n];
    let mut root_parity = vec![false; n];
    let mut signs = vec![1i8; n];
    for v in 0..n {
        let (root, parity) = uf.find(v);
        match root_first[root] {
            None => {
                root_first[root] = Some(v);
                root_parity[root] = parity;
            }
            Some(_) => {
                if parity != root_parity[root] {
                    signs[v] = -1;
                }
            }
        }
    }
    Some(Gauge(signs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_chain_and_conflict() {
        let g = solve_gauge(3, [(0, 1, true), (1, 2, true)]).unwrap();
        assert_eq!(g.signs(), &[1, -1, 1]);
        assert!(solve_gauge(3, [(0, 1, true), (1, 2, true), (2, 0, true)]).is_none());
        assert!(solve_gauge(2, [(0, 1, true), (1, 0, false)]).is_none());
    }

    #[test]
    fn canonical_per_component() {
        // components {0,2} and {1,3}; the constraint order makes 2 and 3 the roots
        let g = solve_gauge(4, [(2, 0, true), (3, 1, false)]).unwrap();
        assert_eq!(g.signs(), &[1, 1, -1, 1]);
    }

    #[test]
    fn long_path_compression_keeps_parity() {
        let n = 64;
        let cons: Vec<_> = (1..n).map(|i| (i - 1, i, i % 3 == 0)).collect();
        let g = solve_gauge(n, cons.clone()).unwrap();
        for (i, j, neg) in cons {
            assert_eq!(g.signs()[i] * g.signs()[j] == -1, neg);
        }
    }
}
