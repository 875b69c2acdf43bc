use std::io::Write;

use rayon::prelude::*;
use serde::Deserialize;
use thermoshield::numeric::{geomspace, linspace, unit_ball_volume};
use thermoshield::radial::{best_radius, general_radial_energy};
use thermoshield::{DissipationLaw, EnergyBreakdown, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Beta,
    #[serde(rename = "R")]
    R,
    Lambda,
    Gamma,
    #[serde(rename = "M")]
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// One-parameter family of concentric configurations.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Law for the `R`, `lambda` and `M` axes.
    pub law: Option<DissipationLaw>,
    #[serde(rename = "R")]
    pub outer_radius: Option<f64>,
    #[serde(default)]
    pub lambda: f64,
}

fn default_n() -> usize {
    2
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || self.count < 2 {
            return Err(Error::InvalidParameter(format!(
                "sweep needs lo < hi and count ≥ 2, got [{}, {}] × {}",
                self.lo, self.hi, self.count
            )));
        }
        if self.scale == Scale::Log && !(self.lo > 0.0) {
            return Err(Error::InvalidParameter("log sweeps need lo > 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        match self.scale {
            Scale::Linear => linspace(self.lo, self.hi, self.count),
            Scale::Log => geomspace(self.lo, self.hi, self.count),
        }
    }

    fn law(&self) -> Result<&DissipationLaw> {
        self.law
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("axis {:?} needs a law", self.axis)))
    }

    fn radius(&self) -> Result<f64> {
        self.outer_radius
            .ok_or_else(|| Error::InvalidParameter(format!("axis {:?} needs a fixed R", self.axis)))
    }

    pub fn evaluate(&self, x: f64) -> Result<EnergyBreakdown> {
        match self.axis {
            Axis::Beta => general_radial_energy(self.n, &DissipationLaw::convection(x)?, self.radius()?, self.lambda),
            Axis::Gamma => general_radial_energy(self.n, &DissipationLaw::radiation(x)?, self.radius()?, self.lambda),
            Axis::R => general_radial_energy(self.n, self.law()?, x, self.lambda),
            Axis::Lambda => general_radial_energy(self.n, self.law()?, self.radius()?, x),
            Axis::M => {
                let r_max = (x / unit_ball_volume(self.n)).powf(1.0 / self.n as f64);
                Ok(best_radius(self.n, self.law()?, r_max, self.lambda)?.energy)
            }
        }
    }
}

pub const HEADER: &str = "x,total,dirichlet,boundary,penalty,trace";

/// Evaluates the grid in parallel; rows keep grid order.
pub fn run<W: Write>(spec: &SweepSpec, mut out: W) -> anyhow::Result<()> {
    spec.validate()?;
    let grid = spec.grid();
    let rows: Vec<Result<EnergyBreakdown>> = grid.par_iter().map(|&x| spec.evaluate(x)).collect();
    writeln!(out, "{HEADER}")?;
    for (x, row) in grid.iter().zip(rows) {
        let e = row?;
        writeln!(out, "{x},{},{},{},{},{}", e.total, e.dirichlet, e.boundary, e.penalty, e.trace)?;
    }
    Ok(())
}
