use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{estimate_pfail, fit_threshold, Axis, PfailEstimate, SamplingConfig, ThresholdFit};
use crate::code_layout::build_layout;
use crate::error::{invalid, Result};
use crate::noise::{NoiseParams, Scheme};
use crate::pauli_sim::Simulator;

/// A grid of noise points. For every scheme and every value in `fixed`
/// (the rate not on `axis`), each distance is sampled at every value in
/// `values` and the resulting line is fitted for its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub schemes: Vec<Scheme>,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub fixed: Vec<f64>,
    pub distances: Vec<usize>,
    /// Measurement flip rate; `2p/3` when absent.
    pub p_m: Option<f64>,
    pub sampling: SamplingConfig,
    pub seed: u64,
}

/// A point on the threshold boundary in the (p, e) plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub scheme: Scheme,
    pub p: f64,
    pub e: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepLine {
    pub scheme: Scheme,
    pub fixed: f64,
    pub estimates: Vec<PfailEstimate>,
    /// Fit failures are reported per line rather than aborting the sweep.
    pub fit: std::result::Result<ThresholdFit, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub lines: Vec<SweepLine>,
}

impl SweepResult {
    pub fn estimates(&self) -> impl Iterator<Item = &PfailEstimate> {
        self.lines.iter().flat_map(|l| &l.estimates)
    }

    pub fn boundary(&self) -> Vec<BoundaryPoint> {
        self.lines
            .iter()
            .filter_map(|l| {
                let t = l.fit.as_ref().ok()?.threshold;
                let (p, e) = match self.axis {
                    Axis::P => (t, l.fixed),
                    Axis::E => (l.fixed, t),
                };
                Some(BoundaryPoint { scheme: l.scheme, p, e })
            })
            .collect()
    }
}

fn monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if spec.values.is_empty() || spec.fixed.is_empty() || spec.distances.is_empty() || spec.schemes.is_empty() {
        return Err(invalid("sweep grid must be non-empty"));
    }
    if !monotone(&spec.values) || !monotone(&spec.fixed) {
        return Err(invalid("sweep grids must be strictly increasing"));
    }
    let mut sims = BTreeMap::new();
    for &d in &spec.distances {
        sims.insert(d, Simulator::new(build_layout(d)?, d)?);
    }
    let mut lines = Vec::new();
    for &scheme in &spec.schemes {
        for &fixed in &spec.fixed {
            let mut estimates = Vec::new();
            for &d in &spec.distances {
                for &v in &spec.values {
                    let (p, e) = match spec.axis {
                        Axis::P => (v, fixed),
                        Axis::E => (fixed, v),
                    };
                    let mut params = NoiseParams::new(p, e, scheme);
                    if let Some(p_m) = spec.p_m {
                        params = params.with_p_m(p_m);
                    }
                    estimates.push(estimate_pfail(&sims[&d], &params, &spec.sampling, spec.seed)?);
                }
            }
            let fit = fit_threshold(&estimates, spec.axis).map_err(|e| e.to_string());
            lines.push(SweepLine {
                scheme,
                fixed,
                estimates,
                fit,
            });
        }
    }
    Ok(SweepResult { axis: spec.axis, lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_monotone_grid() {
        let spec = SweepSpec {
            schemes: vec![Scheme::Erasure],
            axis: Axis::P,
            values: vec![0.002, 0.001],
            fixed: vec![0.01],
            distances: vec![3],
            p_m: None,
            sampling: SamplingConfig::shots(10),
            seed: 0,
        };
        assert!(sweep(&spec).is_err());
    }

    #[test]
    fn small_sweep_reports_fit_failure_per_line() {
        let spec = SweepSpec {
            schemes: vec![Scheme::Standard],
            axis: Axis::P,
            values: vec![0.001, 0.002],
            fixed: vec![0.0],
            distances: vec![3, 5],
            p_m: None,
            sampling: SamplingConfig::shots(50),
            seed: 4,
        };
        let res = sweep(&spec).unwrap();
        assert_eq!(res.estimates().count(), 4);
        assert!(res.lines[0].fit.is_err());
        assert!(res.boundary().is_empty());
    }
}
