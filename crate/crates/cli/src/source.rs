use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use barrierkit_core::domains::{sample_submanifold, SampleKind};
use barrierkit_core::varifold::DiscreteVarifold;
use barrierkit_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleName {
    /// Flat disk without boundary flags.
    Plane,
    /// Flat disk with its outer ring flagged as boundary.
    Disk,
    Sphere,
    Catenoid2d,
    Catenoid3d,
}

/// A varifold file or a sampled test submanifold.
#[derive(Args, Debug, Serialize)]
pub struct Source {
    #[arg(long, conflicts_with = "sample", required_unless_present = "sample")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sample: Option<SampleName>,
    /// Sampler resolution; per-kind default when absent.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Radius of planes and spheres.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Neck radius of catenoids.
    #[arg(long, default_value_t = 1.0)]
    pub neck: f64,
    /// Truncation radius of catenoids; 10, or 5% beyond the largest radius
    /// of a growth query.
    #[arg(long)]
    pub extent: Option<f64>,
}

impl Source {
    pub fn load(&self, largest_radius: Option<f64>) -> Result<DiscreteVarifold> {
        if let Some(path) = &self.input {
            return barrierkit_core::io::read_file(path);
        }
        let name = self.sample.expect("clap enforces input or sample");
        let extent = self
            .extent
            .unwrap_or_else(|| largest_radius.map_or(10.0, |r| 1.05 * r));
        let (kind, default_res) = match name {
            SampleName::Plane => (
                SampleKind::Plane {
                    radius: largest_radius.map_or(self.radius, |r| self.radius.max(1.05 * r)),
                    with_boundary: false,
                },
                60,
            ),
            SampleName::Disk => (
                SampleKind::Plane {
                    radius: self.radius,
                    with_boundary: true,
                },
                60,
            ),
            SampleName::Sphere => (SampleKind::RoundSphere { rho: self.radius }, 10_000),
            SampleName::Catenoid2d => (SampleKind::Catenoid2d { a: self.neck, extent }, 200),
            SampleName::Catenoid3d => (SampleKind::Catenoid3d { a: self.neck, extent }, 40),
        };
        let s = sample_submanifold(&kind, self.resolution.unwrap_or(default_res))?;
        DiscreteVarifold::from_sample(&s)
    }
}

fn bad(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// `start:stop:step` (inclusive, within rounding) or a comma list.
pub fn parse_radii(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("radii", format!("bad number `{t}`")));
    let radii: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("radii", "range must be start:stop:step"));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(bad("radii", "need step > 0 and stop >= start"));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        (0..=n).map(|i| a + h * i as f64).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(bad("radii", "must be positive and increasing"));
    }
    Ok(radii)
}

pub fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad("center", format!("bad number `{t}`"))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(v))
}
