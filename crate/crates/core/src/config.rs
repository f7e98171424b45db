//! Run configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{SolverPolicy, DEFAULT_TOLERANCE};
use crate::mesh::{generate_annulus_mesh, generate_square_mesh, CenterPolicy, Mesh2D, SquarePattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Cg,
    Dg,
}

impl SchemeKind {
    pub fn tag(self) -> &'static str {
        match self {
            SchemeKind::Cg => "cg",
            SchemeKind::Dg => "dg",
        }
    }
}

/// How the discrete Laplacian of the continuous scheme treats boundary data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftKind {
    #[default]
    Variational,
    Analytic,
}

/// Which benchmark supplies initial and boundary data for `run`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    #[default]
    Spiral,
    Defects,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeshShape {
    Square {
        n: usize,
        #[serde(default = "default_pattern")]
        pattern: SquarePattern,
    },
    Annulus {
        n_radial: usize,
        n_angular: usize,
    },
    File {
        path: PathBuf,
    },
}

fn default_pattern() -> SquarePattern {
    SquarePattern::RightTriangle
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    #[serde(flatten)]
    pub shape: MeshShape,
    #[serde(default = "default_centers")]
    pub centers: CenterPolicy,
}

fn default_centers() -> CenterPolicy {
    CenterPolicy::Barycenter
}

impl MeshConfig {
    pub fn build(&self) -> Result<Mesh2D> {
        let mesh = match &self.shape {
            MeshShape::Square { n, pattern } => generate_square_mesh(*n, *pattern)?,
            MeshShape::Annulus { n_radial, n_angular } => generate_annulus_mesh(*n_radial, *n_angular)?,
            MeshShape::File { path } => Mesh2D::read(path)?,
        };
        Ok(if mesh.center_policy() == self.centers {
            mesh
        } else {
            mesh.set_cell_centers(self.centers)
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub vtk_dir: Option<PathBuf>,
    /// Write a VTK snapshot every `cadence` steps; 0 disables snapshots.
    #[serde(default)]
    pub cadence: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub mesh: MeshConfig,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(rename = "A", default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub v_el: f64,
    pub k: f64,
    #[serde(rename = "T_end")]
    pub t_end: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "yes")]
    pub projection: bool,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub solver: SolverPolicy,
    #[serde(default)]
    pub lift: LiftKind,
    #[serde(default)]
    pub problem: ProblemKind,
    /// Turn invariant violations into errors instead of recording them.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_alpha() -> f64 {
    0.005
}
fn default_tol() -> f64 {
    DEFAULT_TOLERANCE
}

impl RunConfig {
    pub fn new(scheme: SchemeKind, mesh: MeshConfig, k: f64, t_end: f64) -> Self {
        RunConfig {
            scheme,
            mesh,
            mu: 1.0,
            a: 1.0,
            v_el: 1.0,
            k,
            t_end,
            alpha: default_alpha(),
            projection: true,
            solver_tol: DEFAULT_TOLERANCE,
            solver: SolverPolicy::default(),
            lift: LiftKind::default(),
            problem: ProblemKind::default(),
            strict: false,
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, x: f64| Err(Error::InvalidParameter(format!("{what} = {x}")));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive, got mu", self.mu);
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad("time step must be positive, got k", self.k);
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("final time must be nonnegative, got T_end", self.t_end);
        }
        if !self.a.is_finite() || !self.v_el.is_finite() {
            return bad("coupling scales must be finite, got A", self.a);
        }
        if self.scheme == SchemeKind::Dg && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("dg penalty must be positive, got alpha", self.alpha);
        }
        if !(self.solver_tol > 0.0) {
            return bad("solver tolerance must be positive, got", self.solver_tol);
        }
        Ok(())
    }

    /// Number of steps of length `k` that fit into `[0, T_end]`.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.k * (1.0 + 1e-12)).floor() as usize
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_applies_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"scheme": "dg", "mesh": {"kind": "annulus", "n_radial": 4, "n_angular": 24}, "k": 0.01, "T_end": 1.5}"#,
        )
        .unwrap();
        assert_eq!(cfg.scheme, SchemeKind::Dg);
        assert_eq!((cfg.mu, cfg.a, cfg.v_el, cfg.alpha), (1.0, 1.0, 1.0, 0.005));
        assert!(cfg.projection);
        assert_eq!(cfg.mesh.centers, CenterPolicy::Barycenter);
        assert_eq!(cfg.num_steps(), 150);
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.mesh.build().unwrap().num_cells(), 2 * 4 * 24);
    }

    #[test]
    fn full_keys() {
        let cfg = RunConfig::from_json(
            r#"{"scheme": "cg", "mesh": {"kind": "square", "n": 4, "pattern": "crisscross", "centers": "circumcenter"},
                "mu": 0.5, "A": 2.0, "v_el": 0.25, "k": 0.1, "T_end": 0.05, "alpha": 0.1, "projection": false,
                "solver_tol": 1e-9, "output": {"csv_path": "e.csv", "vtk_dir": "vtk", "cadence": 5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.a, 2.0);
        assert_eq!(cfg.num_steps(), 0);
        assert_eq!(cfg.output.cadence, 5);
        assert_eq!(cfg.mesh.build().unwrap().center_policy(), CenterPolicy::Circumcenter);
    }

    #[test]
    fn rejects_invalid() {
        let base = |extra: &str| {
            format!(r#"{{"scheme": "dg", "mesh": {{"kind": "square", "n": 2}}, "k": 0.1, "T_end": 1.0 {extra}}}"#)
        };
        assert!(RunConfig::from_json(&base("")).is_ok());
        for extra in [r#", "mu": 0"#, r#", "alpha": 0"#, r#", "alpha": -1"#] {
            assert!(matches!(RunConfig::from_json(&base(extra)), Err(Error::InvalidParameter(_))), "{extra}");
        }
        assert!(matches!(RunConfig::from_json("{"), Err(Error::Json(_))));
    }
}
