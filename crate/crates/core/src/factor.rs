//! Sparse factorizations behind the direct solver.
//!
//! `LuFactors` is a plain sparse LU of the system matrix. `LdltFactors`
//! factors the symmetric part of a row-permuted and row-scaled copy of the
//! matrix, which is symmetric up to convection for the step systems. The
//! symmetric factorization orders the unknowns on the pattern of `A + A^T`
//! and fills in far less than a pivoted LU, but it is only a preconditioner.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par, Side};

use crate::linsolve::{SparseMatrix, Symmetrizer};

/// Pivots of the equilibrated matrix below this magnitude, or of the wrong
/// sign, are replaced by `REGULARIZATION` with the expected sign.
const REGULARIZATION: f64 = 1e-8;

pub(crate) enum Factors {
    Lu(LuFactors),
    Ldlt(LdltFactors),
}

impl Factors {
    /// True when the cached analysis applies to `a` with symmetrizer `sym`.
    pub fn matches(&self, a: &SparseMatrix, sym: Option<&Symmetrizer>) -> bool {
        let (ptr, idx) = match (self, sym) {
            (Factors::Lu(f), None) => (&f.row_ptr, &f.col_idx),
            (Factors::Ldlt(f), Some(s)) if f.sym == *s => (&f.row_ptr, &f.col_idx),
            _ => return false,
        };
        ptr.as_slice() == a.row_ptr() && idx.as_slice() == a.col_idx()
    }

    pub fn refactor(&mut self, a: &SparseMatrix) -> Option<()> {
        match self {
            Factors::Lu(f) => f.refactor(a),
            Factors::Ldlt(f) => f.refactor(a),
        }
    }

    pub fn apply(&mut self, r: &[f64]) -> Vec<f64> {
        match self {
            Factors::Lu(f) => f.apply(r),
            Factors::Ldlt(f) => f.apply(r),
        }
    }
}

pub(crate) struct LuFactors {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
    mem: MemBuffer,
}

impl LuFactors {
    pub fn analyze(a: &SparseMatrix) -> Option<Self> {
        let n = a.nrows();
        // The CSR arrays of A are the CSC arrays of A^T; transposing gives CSC of A.
        let t = a.transpose();
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, t.row_ptr(), None, t.col_idx());
        let symbolic = factorize_symbolic_lu(pattern, LuSymbolicParams::default()).ok()?;
        let req = symbolic
            .factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default())
            .or(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        Some(LuFactors {
            row_ptr: a.row_ptr().to_vec(),
            col_idx: a.col_idx().to_vec(),
            symbolic,
            numeric: NumericLu::new(),
            mem: MemBuffer::try_new(req).ok()?,
        })
    }

    fn refactor(&mut self, a: &SparseMatrix) -> Option<()> {
        let n = a.nrows();
        let t = a.transpose();
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, t.row_ptr(), None, t.col_idx());
        let mat = SparseColMatRef::new(pattern, t.values());
        self.symbolic
            .factorize_numeric_lu(&mut self.numeric, mat, Par::Seq, MemStack::new(&mut self.mem), Default::default())
            .ok()?;
        Some(())
    }

    fn apply(&mut self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let lu = LuRef::new_unchecked(&self.symbolic, &self.numeric);
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        lu.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut self.mem));
        (0..n).map(|i| rhs[(i, 0)]).collect()
    }
}

pub(crate) struct LdltFactors {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    sym: Symmetrizer,
    /// For every stored entry of A: slot in the lower triangle and weight, or `None` if dropped.
    scatter: Vec<Option<(usize, f64)>>,
    lower: SymbolicSparseColMat<usize>,
    values: Vec<f64>,
    equil: Vec<f64>,
    symbolic: SymbolicCholesky<usize>,
    l_values: Vec<f64>,
    mem: MemBuffer,
}

impl LdltFactors {
    pub fn analyze(a: &SparseMatrix, sym: &Symmetrizer) -> Option<Self> {
        let n = a.nrows();
        if sym.len() != n {
            return None;
        }
        // Identity rows left in place decouple; their columns are dropped.
        let mut fixed = vec![false; n];
        for i in 0..n {
            let r = sym.row(i);
            let (cols, vals) = a.row(r);
            fixed[i] = r == i && cols.len() == 1 && cols[0] == i && vals[0] == 1.0;
        }
        let mut pos_of_row = vec![usize::MAX; n];
        for i in 0..n {
            pos_of_row[sym.row(i)] = i;
        }
        // lower-triangle coordinates (row >= col) of every contribution
        let mut coords: Vec<(usize, usize)> = Vec::with_capacity(a.nnz() + n);
        let mut entry_coord: Vec<Option<(usize, f64)>> = vec![None; a.nnz()];
        for r in 0..n {
            let i = pos_of_row[r];
            let start = a.row_ptr()[r];
            for (off, &c) in a.col_idx()[start..a.row_ptr()[r + 1]].iter().enumerate() {
                if i != c && (fixed[i] || fixed[c]) {
                    continue;
                }
                let w = if i == c { sym.scale(i) } else { 0.5 * sym.scale(i) };
                entry_coord[start + off] = Some((coords.len(), w));
                coords.push((i.max(c), i.min(c)));
            }
        }
        // every pivot is stored, even when structurally zero
        for i in 0..n {
            coords.push((i, i));
        }
        // compress into CSC of the lower triangle
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_unstable_by_key(|&e| (coords[e].1, coords[e].0));
        let mut slot_of = vec![0usize; coords.len()];
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx: Vec<usize> = Vec::with_capacity(coords.len());
        let mut last = None;
        for &e in &order {
            let (row, col) = coords[e];
            if last != Some((row, col)) {
                row_idx.push(row);
                col_ptr[col + 1] += 1;
                last = Some((row, col));
            }
            slot_of[e] = row_idx.len() - 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let scatter = entry_coord.into_iter().map(|e| e.map(|(k, w)| (slot_of[k], w))).collect();
        let lower = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let symbolic = factorize_symbolic_cholesky(
            lower.as_ref(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .ok()?;
        let req = symbolic
            .factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default())
            .or(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let nnz = lower.row_idx().len();
        Some(LdltFactors {
            row_ptr: a.row_ptr().to_vec(),
            col_idx: a.col_idx().to_vec(),
            sym: sym.clone(),
            scatter,
            values: vec![0.0; nnz],
            equil: vec![1.0; n],
            l_values: vec![0.0; symbolic.len_val()],
            lower,
            symbolic,
            mem: MemBuffer::try_new(req).ok()?,
        })
    }

    fn refactor(&mut self, a: &SparseMatrix) -> Option<()> {
        let n = a.nrows();
        self.values.fill(0.0);
        for (e, s) in self.scatter.iter().enumerate() {
            if let Some((slot, w)) = *s {
                self.values[slot] += w * a.values()[e];
            }
        }
        // symmetric equilibration by the largest entry of each row
        let mut big = vec![0.0f64; n];
        let (ptr, idx) = (self.lower.col_ptr(), self.lower.row_idx());
        for c in 0..n {
            for k in ptr[c]..ptr[c + 1] {
                let v = self.values[k].abs();
                big[c] = big[c].max(v);
                big[idx[k]] = big[idx[k]].max(v);
            }
        }
        for (e, b) in self.equil.iter_mut().zip(&big) {
            *e = if *b > 0.0 { 1.0 / b.sqrt() } else { 1.0 };
        }
        for c in 0..n {
            for k in ptr[c]..ptr[c + 1] {
                self.values[k] *= self.equil[c] * self.equil[idx[k]];
            }
        }
        let mat = SparseColMatRef::new(self.lower.as_ref(), &self.values);
        let regularization = LdltRegularization {
            dynamic_regularization_signs: Some(self.sym.signs()),
            dynamic_regularization_delta: REGULARIZATION,
            dynamic_regularization_epsilon: REGULARIZATION,
        };
        self.symbolic
            .factorize_numeric_ldlt(
                &mut self.l_values,
                mat,
                Side::Lower,
                regularization,
                Par::Seq,
                MemStack::new(&mut self.mem),
                Default::default(),
            )
            .ok()?;
        Some(())
    }

    fn apply(&mut self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let s = &self.sym;
        let e = &self.equil;
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| e[i] * s.scale(i) * r[s.row(i)]);
        let ldlt = LdltRef::new(&self.symbolic, &self.l_values);
        ldlt.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut self.mem));
        (0..n).map(|i| e[i] * rhs[(i, 0)]).collect()
    }
}
