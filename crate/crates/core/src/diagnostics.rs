//! Per-step diagnostics and their CSV form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const CSV_HEADER: &str = "t,E_kin,E_ela,E_total,visc_diss,dir_diss,norm_dev,orth_res,proj_err_l1,solver_res";

/// Energies, dissipation terms and constraint residuals after one step.
///
/// Energies are those of the projected state. `E_total` weighs the director
/// energy by the coupling scale `A`; the DG energy also carries `alpha E_J`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub e_kin: f64,
    pub e_ela: f64,
    pub e_total: f64,
    /// `k mu ||grad v||^2`
    pub visc_diss: f64,
    /// `k A^2 ||d x Lap d~||^2`
    pub dir_diss: f64,
    /// `A/2` times the squared energy seminorm of `d~ - d_old`.
    pub incr_diss: f64,
    /// `1/2 ||v - v_old||^2`
    pub kin_incr: f64,
    /// Left side of the energy inequality minus the previous total energy.
    pub energy_excess: f64,
    /// Director energy lost by the projection (nonnegative on suitable meshes).
    pub projection_gain: f64,
    pub norm_dev: f64,
    pub orth_res: f64,
    pub proj_err_l1: f64,
    pub solver_res: f64,
    /// Relative mismatch of the Ericksen and transport couplings.
    pub coupling_res: f64,
    pub e_j: Option<f64>,
    pub alpha: Option<f64>,
}

impl StepDiagnostics {
    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{:.6},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.6e},{:.6e},{:.16e},{:.6e}",
            self.t,
            self.e_kin,
            self.e_ela,
            self.e_total,
            self.visc_diss,
            self.dir_diss,
            self.norm_dev,
            self.orth_res,
            self.proj_err_l1,
            self.solver_res
        );
        if let (Some(ej), Some(a)) = (self.e_j, self.alpha) {
            s.push_str(&format!(",{ej:.16e},{a}"));
        }
        s
    }

    /// Sum of the dissipation terms on the left of the energy inequality.
    pub fn dissipation(&self) -> f64 {
        self.visc_diss + self.dir_diss + self.incr_diss + self.kin_incr
    }
}

pub fn csv_header(dg: bool) -> String {
    if dg {
        format!("{CSV_HEADER},E_J,alpha")
    } else {
        CSV_HEADER.to_string()
    }
}

/// Streams diagnostics rows to a CSV file.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>, dg: bool) -> Result<Self> {
        if let Some(dir) = path.as_ref().parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", csv_header(dg))?;
        Ok(CsvWriter { out })
    }

    pub fn write(&mut self, d: &StepDiagnostics) -> Result<()> {
        writeln!(self.out, "{}", d.csv_row())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Largest violation of the per-step energy inequality relative to `e0`,
/// and whether the total energy ever increased by more than `slack * e0`.
pub fn energy_law_violation(rows: &[StepDiagnostics], e0: f64) -> (f64, bool) {
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    let worst = rows.iter().skip(1).map(|r| r.energy_excess / scale).fold(f64::NEG_INFINITY, f64::max);
    let monotone = rows.windows(2).all(|w| w[1].e_total <= w[0].e_total + 1e-9 * scale);
    (worst, monotone)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns_match_header() {
        let mut d = StepDiagnostics {
            t: 0.5,
            ..Default::default()
        };
        assert_eq!(d.csv_row().split(',').count(), CSV_HEADER.split(',').count());
        d.e_j = Some(1.0);
        d.alpha = Some(0.005);
        assert_eq!(d.csv_row().split(',').count(), csv_header(true).split(',').count());
        assert!(d.csv_row().ends_with(",0.005"));
    }

    #[test]
    fn energy_law_summary() {
        let rows: Vec<StepDiagnostics> = [3.0, 2.0, 2.0]
            .iter()
            .map(|&e| StepDiagnostics {
                e_total: e,
                energy_excess: -0.1,
                ..Default::default()
            })
            .collect();
        let (worst, mono) = energy_law_violation(&rows, 3.0);
        assert!(mono && (worst + 0.1 / 3.0).abs() < 1e-15);
    }
}
