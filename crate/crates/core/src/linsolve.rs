//! Sparse assembly and the solve contract for the coupled step systems.
//!
//! Matrices are stored in compressed rows. The direct policy factors the
//! matrix with faer; the symbolic analysis is cached and reused
//! while the sparsity pattern stays the same, which is the case for every
//! step of a run because assembly keeps structural zeros.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::factor::{Factors, LdltFactors, LuFactors};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Sums duplicate entries. Explicit zeros are kept as structural entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite entry at ({r}, {c})")));
            }
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_unstable_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(c, v) in row.iter() {
                if c == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = c;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }
    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let s = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[s.clone()], &self.values[s])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|i| vals[i]).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "vector length does not match column count");
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// True when `|a_ij - a_ji| <= tol * max|a|` for all entries.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let t = self.transpose();
        (0..self.nrows).all(|r| {
            let (cols, vals) = self.row(r);
            let (tcols, tvals) = t.row(r);
            let mut i = 0;
            let mut j = 0;
            while i < cols.len() || j < tcols.len() {
                let (a, b) = match (cols.get(i), tcols.get(j)) {
                    (Some(&c), Some(&tc)) if c == tc => {
                        i += 1;
                        j += 1;
                        (vals[i - 1], tvals[j - 1])
                    }
                    (Some(&c), Some(&tc)) if c < tc => {
                        i += 1;
                        (vals[i - 1], 0.0)
                    }
                    (Some(_), None) => {
                        i += 1;
                        (vals[i - 1], 0.0)
                    }
                    _ => {
                        j += 1;
                        (0.0, tvals[j - 1])
                    }
                };
                if (a - b).abs() > tol * scale {
                    return false;
                }
            }
            true
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] += v;
            }
        }
        out
    }

    /// MatrixMarket coordinate format (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{} {} {:.17e}", r + 1, c + 1, v);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_matrix_market())?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SolverPolicy {
    #[default]
    /// Sparse factorization followed by preconditioned GMRES: a symmetric
    /// indefinite factorization when the system carries a [`Symmetrizer`],
    /// a pivoted LU otherwise.
    DirectLu,
    /// Restarted GMRES with Jacobi preconditioning.
    Gmres { restart: usize, max_iter: usize },
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub tolerance: f64,
    pub policy: SolverPolicy,
    pub symmetrizer: Option<Arc<Symmetrizer>>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `||A x - b|| / max(||b||, 1)`.
    pub residual: f64,
}

/// Sums a stream of triplets and right-hand-side contributions into a square system.
pub fn assemble(
    n: usize,
    triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    rhs: impl IntoIterator<Item = (usize, f64)>,
) -> Result<LinearSystem> {
    let t: Vec<_> = triplets.into_iter().collect();
    let matrix = SparseMatrix::from_triplets(n, n, &t)?;
    let mut b = vec![0.0; n];
    for (i, v) in rhs {
        if i >= n {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: 0,
                nrows: n,
                ncols: 1,
            });
        }
        b[i] += v;
    }
    Ok(LinearSystem::new(matrix, b))
}

/// Triplet accumulator for a square system in which some unknowns are
/// prescribed. Rows of prescribed unknowns become identity rows; any other
/// contribution to such a row is dropped.
#[derive(Clone, Debug)]
pub struct SystemBuilder {
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    fixed: Vec<Option<f64>>,
}

impl SystemBuilder {
    pub fn new(n: usize) -> Self {
        SystemBuilder {
            n,
            triplets: Vec::new(),
            rhs: vec![0.0; n],
            fixed: vec![None; n],
        }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut b = SystemBuilder::new(n);
        b.triplets.reserve(nnz);
        b
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.triplets.push((row, col, value));
    }

    #[inline]
    pub fn add_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] += value;
    }

    /// Prescribes unknown `row` to `value`.
    pub fn fix(&mut self, row: usize, value: f64) {
        self.fixed[row] = Some(value);
    }

    pub fn is_fixed(&self, row: usize) -> bool {
        self.fixed[row].is_some()
    }

    pub fn build(self) -> Result<LinearSystem> {
        let SystemBuilder {
            n,
            mut triplets,
            mut rhs,
            fixed,
        } = self;
        triplets.retain(|&(r, _, _)| r >= n || fixed[r].is_none());
        for (r, f) in fixed.iter().enumerate() {
            if let Some(v) = f {
                triplets.push((r, r, 1.0));
                rhs[r] = *v;
            }
        }
        let matrix = SparseMatrix::from_triplets(n, n, &triplets)?;
        Ok(LinearSystem::new(matrix, rhs))
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Self {
        LinearSystem {
            matrix,
            rhs,
            tolerance: DEFAULT_TOLERANCE,
            policy: SolverPolicy::DirectLu,
            symmetrizer: None,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_policy(mut self, policy: SolverPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Lets the direct policy precondition with a symmetric factorization.
    pub fn with_symmetrizer(mut self, s: Arc<Symmetrizer>) -> Self {
        self.symmetrizer = Some(s);
        self
    }

    pub fn residual_vector(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.matrix.mul_vec(x);
        ax.iter().zip(&self.rhs).map(|(a, b)| a - b).collect()
    }

    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        norm2(&self.residual_vector(x)) / norm2(&self.rhs).max(1.0)
    }

    /// Solves without a reusable factorization cache.
    pub fn solve(&self) -> Result<Solution> {
        Solver::new().solve(self)
    }
}

/// Row permutation and scaling under which a system matrix is symmetric up
/// to a small nonsymmetric part, with the expected sign of every pivot.
///
/// Row `i` of the symmetric form is `scale(i)` times row `row(i)` of the
/// system. The direct solver factors the symmetric part of that form and uses
/// it to precondition GMRES on the original system.
#[derive(Clone, Debug, PartialEq)]
pub struct Symmetrizer {
    rows: Vec<usize>,
    scale: Vec<f64>,
    signs: Vec<i8>,
}

impl Symmetrizer {
    /// Identity rows with the given pivot signs: `1`, `-1`, or `0` when unknown.
    pub fn new(signs: Vec<i8>) -> Self {
        let n = signs.len();
        Symmetrizer {
            rows: (0..n).collect(),
            scale: vec![1.0; n],
            signs,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Takes `scale` times row `row` of the system as row `i`.
    pub fn set_row(&mut self, i: usize, row: usize, scale: f64) {
        self.rows[i] = row;
        self.scale[i] = scale;
    }

    pub fn row(&self, i: usize) -> usize {
        self.rows[i]
    }

    pub fn scale(&self, i: usize) -> f64 {
        self.scale[i]
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// True when the rows form a permutation and every scale is nonzero.
    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.rows.len()];
        for &r in &self.rows {
            if r >= seen.len() || seen[r] {
                return false;
            }
            seen[r] = true;
        }
        self.scale.iter().all(|s| s.is_finite() && *s != 0.0) && self.signs.len() == self.rows.len()
    }
}

/// Solver that caches the symbolic analysis between calls with the same
/// sparsity pattern. Every call refactors numerically and finishes with
/// GMRES preconditioned by the factors, which for a symmetrized system
/// absorbs convection and the regularized pivots.
#[derive(Default)]
pub struct Solver {
    factors: Option<Factors>,
    factorizations: usize,
    iterations: usize,
}

/// GMRES iterations allowed after a factorization.
const MAX_ITER: usize = 100;

impl Solver {
    pub fn new() -> Self {
        Solver::default()
    }

    /// Numeric factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    /// Preconditioned GMRES iterations performed so far.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn solve(&mut self, sys: &LinearSystem) -> Result<Solution> {
        if sys.matrix.nrows() != sys.matrix.ncols() || sys.rhs.len() != sys.matrix.nrows() {
            return Err(Error::InvalidParameter(format!(
                "system is {}x{} with a right-hand side of length {}",
                sys.matrix.nrows(),
                sys.matrix.ncols(),
                sys.rhs.len()
            )));
        }
        if sys.matrix.nrows() == 0 {
            return Ok(Solution {
                x: Vec::new(),
                residual: 0.0,
            });
        }
        let x = match sys.policy {
            SolverPolicy::DirectLu => self.direct(sys)?,
            SolverPolicy::Gmres { restart, max_iter } => gmres(sys, restart.max(1), max_iter),
        };
        let residual = sys.relative_residual(&x);
        if !(residual <= sys.tolerance) {
            return Err(Error::SolverFailure {
                residual,
                tolerance: sys.tolerance,
            });
        }
        Ok(Solution { x, residual })
    }

    fn direct(&mut self, sys: &LinearSystem) -> Result<Vec<f64>> {
        let a = &sys.matrix;
        let fail = || Error::SolverFailure {
            residual: f64::INFINITY,
            tolerance: sys.tolerance,
        };
        let usable = self.factors.as_ref().is_some_and(|f| f.matches(a, sys.symmetrizer.as_deref()));
        if !usable {
            let f = match &sys.symmetrizer {
                Some(s) if s.is_valid() => LdltFactors::analyze(a, s).map(Factors::Ldlt),
                Some(_) => return Err(Error::InvalidParameter("symmetrizer is not a scaled row permutation".into())),
                None => LuFactors::analyze(a).map(Factors::Lu),
            };
            self.factors = Some(f.ok_or_else(fail)?);
        }
        let f = self.factors.as_mut().expect("factors");
        f.refactor(a).ok_or_else(fail)?;
        self.factorizations += 1;
        let x0 = f.apply(&sys.rhs);
        let target = 1e-3 * sys.tolerance * norm2(&sys.rhs).max(1.0);
        let (x, iters) = gmres_with(a, &sys.rhs, x0, target, MAX_ITER, MAX_ITER, |v| f.apply(v));
        self.iterations += iters;
        Ok(x)
    }
}

fn gmres(sys: &LinearSystem, restart: usize, max_iter: usize) -> Vec<f64> {
    let a = &sys.matrix;
    let dinv: Vec<f64> = (0..a.nrows())
        .map(|i| {
            let d = a.get(i, i);
            if d.abs() > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let target = sys.tolerance * norm2(&sys.rhs).max(1.0);
    let x0 = vec![0.0; a.nrows()];
    let jacobi = |v: &[f64]| v.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    gmres_with(a, &sys.rhs, x0, target, restart, max_iter, jacobi).0
}

/// Restarted GMRES with right preconditioning, stopping once the residual
/// norm falls below `target`. Returns the iterate and the iteration count.
fn gmres_with(
    a: &SparseMatrix,
    rhs: &[f64],
    mut x: Vec<f64>,
    target: f64,
    restart: usize,
    max_iter: usize,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, usize) {
    let mut iters = 0;
    while iters < max_iter {
        let r: Vec<f64> = rhs.iter().zip(a.mul_vec(&x)).map(|(b, ax)| b - ax).collect();
        let beta = norm2(&r);
        if beta <= target || !beta.is_finite() {
            break;
        }
        let mut basis = vec![r.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            iters += 1;
            let mut w = a.mul_vec(&precond(&basis[k]));
            for (i, b) in basis.iter().enumerate() {
                h[i][k] = w.iter().zip(b).map(|(a, c)| a * c).sum();
                for (wj, bj) in w.iter_mut().zip(b) {
                    *wj -= h[i][k] * bj;
                }
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            cs[k] = if den > 0.0 { h[k][k] / den } else { 1.0 };
            sn[k] = if den > 0.0 { h[k + 1][k] / den } else { 0.0 };
            h[k][k] = den;
            let hk1 = h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || hk1 == 0.0 || iters >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        let mut z = vec![0.0; x.len()];
        for (i, yi) in y.iter().enumerate() {
            for (zr, b) in z.iter_mut().zip(&basis[i]) {
                *zr += yi * b;
            }
        }
        for (xi, ci) in x.iter_mut().zip(precond(&z)) {
            *xi += ci;
        }
    }
    (x, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_square_mesh, SquarePattern};

    #[test]
    fn empty_and_duplicates() {
        let sys = assemble(0, std::iter::empty(), std::iter::empty()).unwrap();
        assert_eq!(sys.matrix.nnz(), 0);
        let sys = assemble(2, [(0, 0, 1.0), (0, 0, 2.0), (1, 1, 0.0)], [(1, 1.0), (1, 2.0)]).unwrap();
        assert_eq!(sys.matrix.get(0, 0), 3.0);
        assert_eq!(sys.matrix.nnz(), 2, "explicit zeros stay structural");
        assert_eq!(sys.rhs, vec![0.0, 3.0]);
        assert!(matches!(
            assemble(2, [(2, 0, 1.0)], std::iter::empty()),
            Err(Error::IndexOutOfRange { row: 2, .. })
        ));
        assert!(assemble(2, std::iter::empty(), [(5, 1.0)]).is_err());
    }

    #[test]
    fn p1_stiffness_single_square() {
        // two reference right triangles: known 4x4 stiffness of the unit square
        let mesh = generate_square_mesh(1, SquarePattern::RightTriangle).unwrap();
        let mut t = Vec::new();
        for c in 0..mesh.num_cells() {
            let g = mesh.barycentric_gradients(c);
            let v = mesh.cell(c);
            for i in 0..3 {
                for j in 0..3 {
                    let val = mesh.cell_area(c) * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    t.push((v[i], v[j], val));
                }
            }
        }
        let sys = assemble(4, t, std::iter::empty()).unwrap();
        // vertices: 0=(-.5,-.5) 1=(.5,-.5) 2=(-.5,.5) 3=(.5,.5); diagonal 0-3
        let expected = [
            [1.0, -0.5, -0.5, 0.0],
            [-0.5, 1.0, 0.0, -0.5],
            [-0.5, 0.0, 1.0, -0.5],
            [0.0, -0.5, -0.5, 1.0],
        ];
        let dense = sys.matrix.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert!((dense[i][j] - expected[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
        assert!(sys.matrix.is_symmetric(1e-15));
    }

    #[test]
    fn identity_and_2x2() {
        let b = vec![1.0, -2.0, 3.5];
        let x = LinearSystem::new(SparseMatrix::identity(3), b.clone()).solve().unwrap();
        assert_eq!(x.x, b);
        let sys = assemble(2, [(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)], [(0, 3.0), (1, 3.0)]).unwrap();
        let s = sys.solve().unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 1.0).abs() < 1e-14);
        assert!(s.residual <= 1e-14);
    }

    #[test]
    fn singular_reports_failure() {
        let sys = assemble(2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)], [(0, 1.0), (1, 2.0)]).unwrap();
        assert!(matches!(sys.solve(), Err(Error::SolverFailure { .. })));
    }

    fn convection_diffusion(n: usize) -> LinearSystem {
        let idx = |i: usize, j: usize| i * n + j;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let r = idx(i, j);
                t.push((r, r, 4.0));
                if i > 0 {
                    t.push((r, idx(i - 1, j), -1.3));
                }
                if i + 1 < n {
                    t.push((r, idx(i + 1, j), -0.7));
                }
                if j > 0 {
                    t.push((r, idx(i, j - 1), -1.0));
                }
                if j + 1 < n {
                    t.push((r, idx(i, j + 1), -1.0));
                }
            }
        }
        assemble(n * n, t, (0..n * n).map(|i| (i, (i % 5) as f64))).unwrap()
    }

    #[test]
    fn cached_symbolic_reused() {
        let sys = convection_diffusion(20);
        let mut solver = Solver::new();
        let a = solver.solve(&sys).unwrap();
        assert!(a.residual <= 1e-10);
        let mut sys2 = sys.clone();
        for v in sys2.matrix.values.iter_mut() {
            *v *= 2.0;
        }
        let b = solver.solve(&sys2).unwrap();
        for (x, y) in a.x.iter().zip(&b.x) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_matches_direct() {
        let sys = convection_diffusion(15).with_policy(SolverPolicy::Gmres {
            restart: 50,
            max_iter: 2000,
        });
        let it = sys.solve().unwrap();
        let direct = sys.clone().with_policy(SolverPolicy::DirectLu).solve().unwrap();
        for (x, y) in it.x.iter().zip(&direct.x) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn builder_fixes_rows() {
        let mut b = SystemBuilder::new(2);
        b.add(0, 0, 2.0);
        b.add(0, 1, 1.0);
        b.add(1, 0, 5.0);
        b.add(1, 1, 7.0);
        b.add_rhs(0, 4.0);
        b.add_rhs(1, 100.0);
        b.fix(1, 2.0);
        let s = b.build().unwrap().solve().unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-15 && (s.x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_market_dump() {
        let sys = assemble(2, [(0, 1, 2.5), (1, 0, -1.0)], std::iter::empty()).unwrap();
        let s = sys.matrix.to_matrix_market();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 "));
        assert!(!sys.matrix.is_symmetric(1e-12));
    }
    /// Saddle-point system `[[K + N, B^T], [B, 0]]` stored with the first `m`
    /// rows of each block swapped and rescaled, plus the matching symmetrizer.
    fn permuted_saddle(n: usize, m: usize) -> (LinearSystem, Symmetrizer) {
        let mut rows = vec![Vec::new(); n + m];
        for i in 0..n {
            rows[i].push((i, 4.0));
            if i > 0 {
                rows[i].push((i - 1, -1.1));
            }
            if i + 1 < n {
                rows[i].push((i + 1, -0.9));
            }
        }
        for j in 0..m {
            for (c, v) in [(2 * j, 1.0), (2 * j + 1, -0.5)] {
                rows[n + j].push((c, v));
                rows[c].push((n + j, v));
            }
        }
        let mut signs = vec![1i8; n];
        signs.extend(std::iter::repeat_n(-1, m));
        let mut sym = Symmetrizer::new(signs);
        let mut stored = rows.clone();
        for j in 0..m {
            // stored row of symmetric row i is `row(i)`, scaled by 1/scale(i)
            let (i, r) = (j, n + j);
            stored[r] = rows[i].iter().map(|&(c, v)| (c, v / 2.0)).collect();
            stored[i] = rows[r].iter().map(|&(c, v)| (c, v / 0.5)).collect();
            sym.set_row(i, r, 2.0);
            sym.set_row(r, i, 0.5);
        }
        let t: Vec<_> = stored.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v))).collect();
        let sys = assemble(n + m, t, (0..n + m).map(|i| (i, 1.0 + (i % 3) as f64))).unwrap();
        (sys, sym)
    }

    #[test]
    fn symmetrized_factorization_matches_lu() {
        let (sys, sym) = permuted_saddle(40, 12);
        assert!(sym.is_valid());
        let lu = sys.solve().unwrap();
        let ldlt = sys.clone().with_symmetrizer(Arc::new(sym)).solve().unwrap();
        assert!(ldlt.residual <= 1e-12);
        for (x, y) in lu.x.iter().zip(&ldlt.x) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_symmetrizer_rejected() {
        let (sys, mut sym) = permuted_saddle(10, 3);
        sym.set_row(0, 1, 1.0);
        assert!(!sym.is_valid());
        let r = sys.with_symmetrizer(Arc::new(sym)).solve();
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
