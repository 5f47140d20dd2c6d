//! Signed digraphs and per-graph combinatorial analyses.
//!
//! A signed digraph over `n` nodes is stored as the weighted adjacency
//! matrix `A = [a_ij]`, where `a_ij != 0` means the edge `v_j -> v_i`
//! exists with weight `a_ij`. Positive weights model cooperation, negative
//! weights antagonism.

mod balance;
mod support;

pub use balance::Gauge;
pub use support::Support;

use thiserror::Error;

use crate::{Matrix, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("edge ({src}, {dst}) references a node outside 1..={n}")]
    NodeOutOfRange { src: usize, dst: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({src}, {dst})")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("edge ({src}, {dst}) has zero weight")]
    ZeroWeight { src: usize, dst: usize },
    #[error("edge ({src}, {dst}) has a non-finite weight")]
    NonFiniteWeight { src: usize, dst: usize },
    #[error("adjacency matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency has nonzero diagonal at node {0}")]
    NonzeroDiagonal(usize),
    #[error("cannot take the union of an empty graph list")]
    EmptyUnion,
    #[error("graph {index} has {found} nodes, expected {expected}")]
    NodeCountMismatch { index: usize, expected: usize, found: usize },
}

/// Weighted signed adjacency over `n` nodes. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedDigraph<T> {
    adj: Matrix<T>,
}

/// The Laplacian of a signed digraph together with its split into a
/// cooperative part and an antagonistic part.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianParts<T> {
    /// `L = Δ_{|A|} - A`.
    pub laplacian: Matrix<T>,
    /// Laplacian of `A⁺`.
    pub plus_laplacian: Matrix<T>,
    /// `Δ_{|A⁻|}`: diagonal of the absolute negative row sums.
    pub minus_degree: Matrix<T>,
    /// `|A⁻|`.
    pub abs_minus: Matrix<T>,
    /// Laplacian of `|A|`.
    pub abs_laplacian: Matrix<T>,
}

impl<T: Scalar> LaplacianParts<T> {
    /// `L_{A⁺} + Δ_{|A⁻|}`, the diagonally dominant Z-matrix part of `L`.
    pub fn base(&self) -> Matrix<T> {
        &self.plus_laplacian + &self.minus_degree
    }
}

impl<T: Scalar> SignedDigraph<T> {
    /// Builds a graph from 1-based `(src, dst, weight)` triples; the edge
    /// `(src, dst)` sets `a_{dst,src} = weight`.
    pub fn new(n: usize, edges: &[(usize, usize, T)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut adj = Matrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for &(src, dst, w) in edges {
            if src == 0 || dst == 0 || src > n || dst > n {
                return Err(GraphError::NodeOutOfRange { src, dst, n });
            }
            if src == dst {
                return Err(GraphError::SelfLoop(src));
            }
            if !w.is_finite() {
                return Err(GraphError::NonFiniteWeight { src, dst });
            }
            if w == T::zero() {
                return Err(GraphError::ZeroWeight { src, dst });
            }
            let slot = (dst - 1) * n + (src - 1);
            if seen[slot] {
                return Err(GraphError::DuplicateEdge { src, dst });
            }
            seen[slot] = true;
            adj[(dst - 1, src - 1)] = w;
        }
        Ok(Self { adj })
    }

    pub fn from_adjacency(adj: Matrix<T>) -> Result<Self, GraphError> {
        if !adj.is_square() {
            return Err(GraphError::NotSquare { rows: adj.nrows(), cols: adj.ncols() });
        }
        let n = adj.nrows();
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        for i in 0..n {
            if adj[(i, i)] != T::zero() {
                return Err(GraphError::NonzeroDiagonal(i + 1));
            }
            for j in 0..n {
                if !adj[(i, j)].is_finite() {
                    return Err(GraphError::NonFiniteWeight { src: j + 1, dst: i + 1 });
                }
            }
        }
        Ok(Self { adj })
    }

    /// `n` isolated nodes.
    pub fn empty(n: usize) -> Result<Self, GraphError> {
        Self::new(n, &[])
    }

    pub fn n(&self) -> usize {
        self.adj.nrows()
    }

    pub fn adjacency(&self) -> &Matrix<T> {
        &self.adj
    }

    /// Edges as 1-based `(src, dst, weight)` triples in row-major order of
    /// the adjacency matrix.
    pub fn edges(&self) -> Vec<(usize, usize, T)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = self.adj[(i, j)];
                if w != T::zero() {
                    out.push((j + 1, i + 1, w));
                }
            }
        }
        out
    }

    pub fn has_negative_edges(&self) -> bool {
        self.adj.as_slice().iter().any(|&w| w < -T::weight_tol())
    }

    /// `(A⁺, A⁻)`: the nonnegative and nonpositive parts of `A`.
    pub fn sign_split(&self) -> (Matrix<T>, Matrix<T>) {
        let plus = self.adj.map(|a| if a > T::zero() { a } else { T::zero() });
        let minus = self.adj.map(|a| if a < T::zero() { a } else { T::zero() });
        (plus, minus)
    }

    /// Laplacian and its cooperation/antagonism decomposition.
    ///
    /// The diagonal of `L` is assembled as `rowsum(A⁺) + rowsum(|A⁻|)` so that
    /// `L == (L_{A⁺} + Δ_{|A⁻|}) + |A⁻|` holds bit for bit.
    pub fn laplacian_parts(&self) -> LaplacianParts<T> {
        let n = self.n();
        let (plus, minus) = self.sign_split();
        let abs_minus = minus.abs();
        let plus_deg = plus.row_sums();
        let minus_deg = abs_minus.row_sums();

        let plus_laplacian = Matrix::from_fn(n, n, |i, j| if i == j { plus_deg[i] } else { -plus[(i, j)] });
        let minus_degree = Matrix::from_diagonal(&minus_deg);
        let laplacian =
            Matrix::from_fn(n, n, |i, j| if i == j { plus_deg[i] + minus_deg[i] } else { -self.adj[(i, j)] });
        let abs_laplacian =
            Matrix::from_fn(n, n, |i, j| if i == j { plus_deg[i] + minus_deg[i] } else { -self.adj[(i, j)].abs() });
        LaplacianParts { laplacian, plus_laplacian, minus_degree, abs_minus, abs_laplacian }
    }

    pub fn laplacian(&self) -> Matrix<T> {
        self.laplacian_parts().laplacian
    }

    /// Directed support, ignoring weights below [`Scalar::weight_tol`].
    pub fn support(&self) -> Support {
        let n = self.n();
        let mut s = Support::empty(n);
        for i in 0..n {
            for j in 0..n {
                if self.adj[(i, j)].abs() >= T::weight_tol() {
                    s.set(i, j);
                }
            }
        }
        s
    }

    /// Sign constraints `(i, j, negative)` for every structural edge.
    fn sign_constraints(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        let n = self.n();
        let tol = T::weight_tol();
        (0..n).flat_map(move |i| {
            (0..n).filter_map(move |j| {
                let a = self.adj[(i, j)];
                (a.abs() >= tol).then_some((i, j, a < T::zero()))
            })
        })
    }

    /// Canonical gauge `D` with `D A D = |A|`, or `None` if the graph is
    /// structurally unbalanced.
    pub fn structural_balance(&self) -> Option<Gauge> {
        balance::solve_gauge(self.n(), self.sign_constraints())
    }

    pub fn is_structurally_balanced(&self) -> bool {
        self.structural_balance().is_some()
    }

    /// `a_ij a_ji >= 0` for every pair.
    pub fn is_digon_sign_symmetric(&self) -> bool {
        let n = self.n();
        let tol = T::weight_tol();
        (0..n).all(|i| {
            (i + 1..n).all(|j| {
                let (a, b) = (self.adj[(i, j)], self.adj[(j, i)]);
                a.abs() < tol || b.abs() < tol || (a > T::zero()) == (b > T::zero())
            })
        })
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.support().is_strongly_connected()
    }
}

/// Which signs have been observed on an ordered node pair across a union.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SignSet {
    pub positive: bool,
    pub negative: bool,
}

impl SignSet {
    pub fn is_empty(self) -> bool {
        !self.positive && !self.negative
    }

    pub fn is_mixed(self) -> bool {
        self.positive && self.negative
    }
}

/// Union of a collection of signed digraphs: the union of their edge sets,
/// plus the signs observed on each ordered pair. Weights are never summed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UnionGraph {
    support: Support,
    signs: Vec<SignSet>,
}

impl UnionGraph {
    pub fn empty(n: usize) -> Self {
        Self { support: Support::empty(n), signs: vec![SignSet::default(); n * n] }
    }

    pub fn n(&self) -> usize {
        self.support.n()
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Signs observed for the entry `(i, j)` (edge `v_j -> v_i`), 0-based.
    pub fn signs(&self, i: usize, j: usize) -> SignSet {
        self.signs[i * self.n() + j]
    }

    pub fn add<T: Scalar>(&mut self, g: &SignedDigraph<T>) -> Result<(), GraphError> {
        let n = self.n();
        if g.n() != n {
            return Err(GraphError::NodeCountMismatch { index: 0, expected: n, found: g.n() });
        }
        let tol = T::weight_tol();
        for i in 0..n {
            for j in 0..n {
                let a = g.adj[(i, j)];
                if a.abs() >= tol {
                    self.support.set(i, j);
                    let s = &mut self.signs[i * n + j];
                    if a > T::zero() {
                        s.positive = true;
                    } else {
                        s.negative = true;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.support.is_strongly_connected()
    }

    /// A single gauge balancing every observed sign, if one exists. Any pair
    /// observed with both signs makes this `None`.
    pub fn gauge(&self) -> Option<Gauge> {
        let n = self.n();
        if self.signs.iter().any(|s| s.is_mixed()) {
            return None;
        }
        let constraints = (0..n).flat_map(move |i| {
            (0..n).filter_map(move |j| {
                let s = self.signs[i * n + j];
                (!s.is_empty()).then_some((i, j, s.negative))
            })
        });
        balance::solve_gauge(n, constraints)
    }
}

/// Union of the given graphs; errors on an empty list or mismatched sizes.
pub fn union_graphs<'a, T: Scalar>(
    graphs: impl IntoIterator<Item = &'a SignedDigraph<T>>,
) -> Result<UnionGraph, GraphError> {
    let mut iter = graphs.into_iter();
    let first = iter.next().ok_or(GraphError::EmptyUnion)?;
    let mut u = UnionGraph::empty(first.n());
    u.add(first)?;
    for (k, g) in iter.enumerate() {
        u.add(g).map_err(|e| match e {
            GraphError::NodeCountMismatch { expected, found, .. } => {
                GraphError::NodeCountMismatch { index: k + 1, expected, found }
            }
            other => other,
        })?;
    }
    Ok(u)
}
