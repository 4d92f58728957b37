//! Block-sparse Cholesky factorisation with 3x3 blocks.
//!
//! The elimination order is a minimum-degree ordering of the node graph,
//! computed once per problem. Eliminating a node connects its remaining
//! neighbours, so the neighbour set at elimination time is exactly the row
//! pattern of that column of `L`. Ties in degree break on the smaller node
//! index, which keeps the factorisation deterministic.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::mat3::{self, Mat3, Vec3};
use crate::scalar::Real;

/// Fill-reducing ordering and the block pattern of the Cholesky factor.
#[derive(Clone, Debug)]
pub struct SymbolicFactor {
    /// position -> node
    perm: Vec<usize>,
    /// node -> position
    iperm: Vec<usize>,
    /// strictly-lower row positions of each column, ascending
    rows: Vec<Vec<usize>>,
}

impl SymbolicFactor {
    /// Computes the ordering and fill pattern for `n` nodes connected by `edges`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a != b {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
        let mut eliminated = vec![false; n];
        let mut perm = Vec::with_capacity(n);
        let mut pattern: Vec<Vec<usize>> = Vec::with_capacity(n);

        while let Some(Reverse((deg, v))) = heap.pop() {
            if eliminated[v] || deg != adj[v].len() {
                continue;
            }
            eliminated[v] = true;
            let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
            for &u in &nbrs {
                adj[u].remove(&v);
                for &w in &nbrs {
                    if w != u {
                        adj[u].insert(w);
                    }
                }
            }
            for &u in &nbrs {
                heap.push(Reverse((adj[u].len(), u)));
            }
            perm.push(v);
            pattern.push(nbrs);
        }

        let mut iperm = vec![0; n];
        for (pos, &node) in perm.iter().enumerate() {
            iperm[node] = pos;
        }
        let rows = pattern
            .into_iter()
            .map(|nbrs| {
                let mut r: Vec<usize> = nbrs.into_iter().map(|u| iperm[u]).collect();
                r.sort_unstable();
                r
            })
            .collect();
        Self { perm, iperm, rows }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Number of stored off-diagonal blocks in `L`.
    pub fn nnz_blocks(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Storage slot of the lower block coupling nodes `a` and `b` (`a != b`).
    ///
    /// Returns `(column, index, transposed)`: the block stored there equals
    /// `H[a][b]` when `transposed` is false and `H[b][a]` otherwise.
    pub fn slot(&self, a: usize, b: usize) -> Option<(usize, usize, bool)> {
        let (pa, pb) = (self.iperm[a], self.iperm[b]);
        // stored block (row r, col c) with r > c holds H[node(r)][node(c)]
        let (col, row, transposed) = if pa > pb { (pb, pa, false) } else { (pa, pb, true) };
        self.rows[col]
            .binary_search(&row)
            .ok()
            .map(|idx| (col, idx, transposed))
    }

    pub fn position(&self, node: usize) -> usize {
        self.iperm[node]
    }
}

/// Symmetric block matrix laid out on a [`SymbolicFactor`] pattern; after
/// [`BlockMatrix::factorize`] it holds the Cholesky factor in place.
#[derive(Clone, Debug)]
pub struct BlockMatrix<T> {
    /// diagonal blocks by position
    pub diag: Vec<Mat3<T>>,
    /// off-diagonal lower blocks by column, aligned with `SymbolicFactor::rows`
    pub lower: Vec<Vec<Mat3<T>>>,
}

/// The factorisation met a non-positive pivot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub position: usize,
}

impl<T: Real> BlockMatrix<T> {
    pub fn zeros(sym: &SymbolicFactor) -> Self {
        Self {
            diag: vec![mat3::zeros(); sym.len()],
            lower: sym.rows.iter().map(|r| vec![mat3::zeros(); r.len()]).collect(),
        }
    }

    /// Adds `block` to `H[node][node]`.
    pub fn add_diag(&mut self, sym: &SymbolicFactor, node: usize, block: &Mat3<T>) {
        mat3::add_assign(&mut self.diag[sym.iperm[node]], block);
    }

    /// Adds `block` to `H[a][b]` (and implicitly its transpose to `H[b][a]`).
    ///
    /// Panics if the pair is not part of the symbolic pattern.
    pub fn add_offdiag(&mut self, sym: &SymbolicFactor, a: usize, b: usize, block: &Mat3<T>) {
        let (col, idx, transposed) = sym.slot(a, b).expect("block outside symbolic pattern");
        let target = &mut self.lower[col][idx];
        if transposed {
            mat3::add_assign(target, &mat3::transpose(block));
        } else {
            mat3::add_assign(target, block);
        }
    }

    /// Adds `lambda` to every diagonal entry.
    pub fn add_to_diagonal(&mut self, lambda: T) {
        for d in &mut self.diag {
            for k in 0..3 {
                d[k][k] += lambda;
            }
        }
    }

    /// Right-looking block Cholesky, in place: `H = L L^T`.
    pub fn factorize(&mut self, sym: &SymbolicFactor) -> Result<(), NotPositiveDefinite> {
        let n = sym.len();
        for p in 0..n {
            let lpp = mat3::cholesky(&self.diag[p]).ok_or(NotPositiveDefinite { position: p })?;
            self.diag[p] = lpp;
            let rows = &sym.rows[p];
            for blk in self.lower[p].iter_mut() {
                *blk = mat3::right_solve_lt(blk, &lpp);
            }
            // Schur complement update of the trailing matrix.
            let col = std::mem::take(&mut self.lower[p]);
            for (k2, &r2) in rows.iter().enumerate() {
                let update = mat3::mul_bt(&col[k2], &col[k2]);
                mat3::sub_assign(&mut self.diag[r2], &update);
                // rows[p] beyond k2 is a subset of rows[r2]; walk both in order
                let target_rows = &sym.rows[r2];
                let target = &mut self.lower[r2];
                let mut idx = 0;
                for (k1, &r1) in rows.iter().enumerate().skip(k2 + 1) {
                    while target_rows[idx] < r1 {
                        idx += 1;
                    }
                    debug_assert_eq!(target_rows[idx], r1, "fill pattern closed under elimination");
                    let update = mat3::mul_bt(&col[k1], &col[k2]);
                    mat3::sub_assign(&mut target[idx], &update);
                }
            }
            self.lower[p] = col;
        }
        Ok(())
    }

    /// Solves `L L^T x = b` with a factorised matrix; `b` and the result are indexed by node.
    pub fn solve(&self, sym: &SymbolicFactor, b: &[Vec3<T>]) -> Vec<Vec3<T>> {
        let n = sym.len();
        let mut y: Vec<Vec3<T>> = sym.perm.iter().map(|&node| b[node]).collect();
        for p in 0..n {
            y[p] = mat3::forward_sub(&self.diag[p], &y[p]);
            let yp = y[p];
            for (blk, &r) in self.lower[p].iter().zip(&sym.rows[p]) {
                let v = mat3::mul_vec(blk, &yp);
                for k in 0..3 {
                    y[r][k] -= v[k];
                }
            }
        }
        for p in (0..n).rev() {
            let mut acc = y[p];
            for (blk, &r) in self.lower[p].iter().zip(&sym.rows[p]) {
                let v = mat3::tmul_vec(blk, &y[r]);
                for k in 0..3 {
                    acc[k] -= v[k];
                }
            }
            y[p] = mat3::backward_sub_t(&self.diag[p], &acc);
        }
        let mut x = vec![[T::zero(); 3]; n];
        for (p, &node) in sym.perm.iter().enumerate() {
            x[node] = y[p];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense reference: build the full matrix and solve by Gaussian elimination.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut rhs = b.to_vec();
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, piv);
            rhs.swap(c, piv);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (rhs[r] - s) / m[r][r];
        }
        x
    }

    #[test]
    fn matches_dense_solve_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 3 + trial;
            let mut edges = Vec::new();
            for i in 1..n {
                edges.push((i - 1, i));
            }
            for _ in 0..n {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b {
                    edges.push((a, b));
                }
            }
            let sym = SymbolicFactor::new(n, edges.iter().copied());
            let mut dense = vec![vec![0.0; 3 * n]; 3 * n];
            let mut h = BlockMatrix::<f64>::zeros(&sym);
            for &(a, b) in &edges {
                // J^T J with random J blocks keeps the matrix PSD
                let ja: Mat3<f64> = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
                let jb: Mat3<f64> = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
                let haa = mat3::tmul(&ja, &ja);
                let hbb = mat3::tmul(&jb, &jb);
                let hab = mat3::tmul(&ja, &jb);
                h.add_diag(&sym, a, &haa);
                h.add_diag(&sym, b, &hbb);
                h.add_offdiag(&sym, a, b, &hab);
                for r in 0..3 {
                    for c in 0..3 {
                        dense[3 * a + r][3 * a + c] += haa[r][c];
                        dense[3 * b + r][3 * b + c] += hbb[r][c];
                        dense[3 * a + r][3 * b + c] += hab[r][c];
                        dense[3 * b + c][3 * a + r] += hab[r][c];
                    }
                }
            }
            h.add_to_diagonal(0.5);
            for (k, row) in dense.iter_mut().enumerate() {
                row[k] += 0.5;
            }
            let b: Vec<Vec3<f64>> = (0..n)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .collect();
            let flat: Vec<f64> = b.iter().flatten().copied().collect();
            h.factorize(&sym).unwrap();
            let x = h.solve(&sym, &b);
            let xd = dense_solve(&dense, &flat);
            for (k, v) in x.iter().flatten().enumerate() {
                assert!((v - xd[k]).abs() < 1e-9, "trial {trial}: {v} vs {}", xd[k]);
            }
        }
    }

    #[test]
    fn chain_has_no_fill() {
        let n = 50;
        let sym = SymbolicFactor::new(n, (1..n).map(|i| (i - 1, i)));
        assert_eq!(sym.nnz_blocks(), n - 1);
    }

    #[test]
    fn indefinite_is_reported() {
        let sym = SymbolicFactor::new(1, std::iter::empty());
        let mut h = BlockMatrix::<f64>::zeros(&sym);
        h.add_diag(&sym, 0, &mat3::diag([1.0, -1.0, 1.0]));
        assert_eq!(h.factorize(&sym), Err(NotPositiveDefinite { position: 0 }));
    }
}
