//! Pieces shared by the two coupled time steppers.

use crate::flow::FlowLayout;
use crate::linsolve::{SparseMatrix, Symmetrizer};

/// Unknown ranges of a coupled step: flow first, then the predictor
/// `d~` and its discrete Laplacian `L`, three components per node.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DirectorBlocks {
    pub n_vel: usize,
    pub dir: usize,
    pub lap: usize,
    pub nodes: usize,
}

impl DirectorBlocks {
    pub fn new(n_vel: usize, flow_len: usize, nodes: usize) -> Self {
        DirectorBlocks {
            n_vel,
            dir: flow_len,
            lap: flow_len + 3 * nodes,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.lap + 3 * self.nodes
    }

    pub fn dir(&self, node: usize, m: usize) -> usize {
        self.dir + 3 * node + m
    }

    pub fn lap(&self, node: usize, m: usize) -> usize {
        self.lap + 3 * node + m
    }

    /// With the predictor row scaled by `A` and the Laplacian row by `A/k`,
    /// swapping the two row blocks of a free node makes the director part
    /// symmetric and the coupling blocks transposes of each other. Nodes with
    /// prescribed values keep their identity rows.
    pub fn symmetrizer(&self, layout: &FlowLayout, free: impl Fn(usize) -> bool, a: f64, k: f64) -> Symmetrizer {
        let mut s = layout.symmetrizer(self.len());
        let mut signs = s.signs().to_vec();
        for z in (0..self.nodes).filter(|&z| free(z)) {
            for m in 0..3 {
                signs[self.lap(z, m)] = -1;
            }
        }
        s = Symmetrizer::new(signs);
        for z in (0..self.nodes).filter(|&z| free(z)) {
            for m in 0..3 {
                s.set_row(self.dir(z, m), self.lap(z, m), a / k);
                s.set_row(self.lap(z, m), self.dir(z, m), a);
            }
        }
        s
    }
}

/// Compares the Ericksen stress tested with the velocity against `A` times
/// the director transport tested with the Laplacian, both read off the
/// assembled matrix. Returns the mismatch relative to the summed magnitudes.
pub(crate) fn coupling_mismatch(matrix: &SparseMatrix, blocks: &DirectorBlocks, x: &[f64], a: f64) -> f64 {
    let lap_end = blocks.lap + 3 * blocks.nodes;
    let mut stress = 0.0;
    let mut transport = 0.0;
    let mut scale = 0.0;
    for r in 0..blocks.n_vel {
        let (cols, vals) = matrix.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= blocks.lap && c < lap_end {
                let term = x[r] * v * x[c];
                stress += term;
                scale += term.abs();
            }
        }
    }
    for r in blocks.dir..blocks.lap {
        let (cols, vals) = matrix.row(r);
        let l = x[r - blocks.dir + blocks.lap];
        for (&c, &v) in cols.iter().zip(vals) {
            if c < blocks.n_vel {
                let term = a * l * v * x[c];
                transport += term;
                scale += term.abs();
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        (stress - transport).abs() / scale
    }
}
