use crate::graph::{SignedDigraph, Support};
use crate::{Matrix, Scalar};

/// The `2n`-node conventional digraph with nonnegative adjacency
/// `[[A⁺, |A⁻|], [|A⁻|, A⁺]]`.
///
/// Node `i` of the top copy stands for `+x_i`, node `n + i` for `-x_i`; a
/// cooperative edge links same-sign copies and an antagonistic edge links
/// opposite copies.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedGraph<T> {
    adj: Matrix<T>,
}

impl<T: Scalar> LiftedGraph<T> {
    pub fn new(g: &SignedDigraph<T>) -> Self {
        let (plus, minus) = g.sign_split();
        let abs_minus = minus.abs();
        Self { adj: Matrix::from_blocks(&plus, &abs_minus, &abs_minus, &plus) }
    }

    /// Node count `2n`.
    pub fn n2(&self) -> usize {
        self.adj.nrows()
    }

    pub fn adjacency(&self) -> &Matrix<T> {
        &self.adj
    }

    /// Laplacian of the nonnegative lifted adjacency, assembled entrywise.
    pub fn laplacian(&self) -> Matrix<T> {
        let n = self.n2();
        let deg = self.adj.row_sums();
        Matrix::from_fn(n, n, |i, j| if i == j { deg[i] } else { -self.adj[(i, j)] })
    }

    /// The same Laplacian built blockwise from the signed graph:
    /// `[[L_{A⁺} + Δ_{|A⁻|}, -|A⁻|], [-|A⁻|, L_{A⁺} + Δ_{|A⁻|}]]`.
    pub fn block_laplacian(g: &SignedDigraph<T>) -> Matrix<T> {
        let parts = g.laplacian_parts();
        let base = parts.base();
        let off = -&parts.abs_minus;
        Matrix::from_blocks(&base, &off, &off, &base)
    }

    pub fn support(&self) -> Support {
        let n = self.n2();
        let mut s = Support::empty(n);
        for i in 0..n {
            for j in 0..n {
                if self.adj[(i, j)] >= T::weight_tol() {
                    s.set(i, j);
                }
            }
        }
        s
    }
}
