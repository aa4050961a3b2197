use serde::{Deserialize, Serialize};

use crate::model::{proposed_evaluate, Branch, Config, ModelParams, DEFAULT_K_MAX};
use crate::{Error, Result};

/// Which variable runs along each curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Cores,
    Phi,
}

/// Parameter grids for a sweep. Every combination of the grids other than the axis
/// variable yields one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub f: Vec<f64>,
    pub k: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub p: Vec<u32>,
    pub phi: Vec<f64>,
    pub k_max: f64,
}

impl SweepSpec {
    /// Speedup against core count at `f = 0.99`, `phi = 3`.
    pub fn cores_default() -> Self {
        SweepSpec {
            axis: SweepAxis::Cores,
            f: vec![0.99],
            k: vec![0.1, 1.0, 10.0],
            m1: vec![0.0, 0.05, 0.2],
            m2: vec![0.0, 0.5, 1.0],
            p: vec![2, 4, 8, 12, 16, 32, 64],
            phi: vec![3.0],
            k_max: DEFAULT_K_MAX,
        }
    }

    /// Speedup against frequency ratio at `f = 0.99`, `p = 32`.
    pub fn phi_default() -> Self {
        SweepSpec {
            axis: SweepAxis::Phi,
            p: vec![32],
            phi: vec![1.0, 1.4, 1.8, 2.2, 2.4, 3.0],
            ..Self::cores_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grids: [(&str, &[f64], f64); 4] =
            [("f", &self.f, 1.0), ("k", &self.k, self.k_max), ("m1", &self.m1, 1.0), ("m2", &self.m2, 1.0)];
        for (name, grid, upper) in grids {
            if grid.is_empty() {
                return Err(Error::InvalidConfig(format!("sweep grid '{name}' is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !(0.0..=upper).contains(*v)) {
                return Err(Error::domain(format!("sweep value {name} = {v} outside [0, {upper}]")));
            }
        }
        if self.p.is_empty() || self.phi.is_empty() {
            return Err(Error::InvalidConfig("sweep grids for p and phi must be non-empty".into()));
        }
        if self.p.contains(&0) {
            return Err(Error::domain("sweep core counts must be at least 1"));
        }
        if let Some(v) = self.phi.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("sweep value phi = {v} must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: u32,
    pub phi: f64,
    pub speedup: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub axis: SweepAxis,
    pub params: ModelParams,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn label(&self) -> String {
        let p = &self.params;
        let fixed = match (self.axis, self.points.first()) {
            (SweepAxis::Cores, Some(pt)) => format!(" phi={}", pt.phi),
            (SweepAxis::Phi, Some(pt)) => format!(" p={}", pt.p),
            _ => String::new(),
        };
        format!("f={} k={} m1={} m2={}{}", p.f, p.k, p.m1, p.m2, fixed)
    }
}

/// Evaluates the model over the sweep grids. Curves are ordered lexicographically by
/// grid index over `(f, k, m1, m2, fixed variable)`; points follow the axis grid.
pub fn parametric_sweep(spec: &SweepSpec) -> Result<Vec<Curve>> {
    spec.validate()?;
    let mut curves = Vec::new();
    for &f in &spec.f {
        for &k in &spec.k {
            for &m1 in &spec.m1 {
                for &m2 in &spec.m2 {
                    let params = ModelParams { f, k, m1, m2 };
                    let configs: Vec<Vec<Config>> = match spec.axis {
                        SweepAxis::Cores => {
                            spec.phi.iter().map(|&phi| spec.p.iter().map(|&p| Config { p, phi }).collect()).collect()
                        }
                        SweepAxis::Phi => {
                            spec.p.iter().map(|&p| spec.phi.iter().map(|&phi| Config { p, phi }).collect()).collect()
                        }
                    };
                    for curve in configs {
                        let points = curve
                            .into_iter()
                            .map(|config| {
                                let e = proposed_evaluate(&params, config)?;
                                Ok(CurvePoint { p: config.p, phi: config.phi, speedup: e.speedup, branch: e.branch })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        curves.push(Curve { axis: spec.axis, params, points });
                    }
                }
            }
        }
    }
    Ok(curves)
}

/// Long-format CSV, one row per point, with a `curve` index column for plotting tools.
pub fn curves_to_csv(curves: &[Curve]) -> Vec<u8> {
    let mut out = String::from("curve,f,k,m1,m2,p,phi,speedup,branch\n");
    for (i, c) in curves.iter().enumerate() {
        for pt in &c.points {
            let branch = match pt.branch {
                Branch::Compute => "compute",
                Branch::Memory => "memory",
            };
            out.push_str(&format!(
                "{i},{},{},{},{},{},{},{},{branch}\n",
                c.params.f, c.params.k, c.params.m1, c.params.m2, pt.p, pt.phi, pt.speedup
            ));
        }
    }
    out.into_bytes()
}
