use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code_layout::SurfaceCodeLayout;
use crate::error::{invalid, Result};
use crate::matcher::{DecodingGraph, Matcher};
use crate::noise::{imperfect_detection_adjust, NoiseParams, Scheme};
use crate::pauli_sim::{code_capacity_shot, CapacityNoise, Simulator};
use crate::rng::{stream, Domain};

/// Logical failure rate at one noise point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfailEstimate {
    pub scheme: Scheme,
    pub d: usize,
    pub p: f64,
    pub p_m: f64,
    pub e: f64,
    pub shots: u64,
    pub failures: u64,
    pub p_fail: f64,
    pub stderr: f64,
}

/// Reuse count of each erasure realization used when none is configured.
pub fn default_n_rep(d: usize) -> usize {
    match d {
        0..=7 => 100,
        8..=9 => 50,
        _ => 25,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Total shot budget. Rounded up to whole realizations in the erasure
    /// scheme.
    pub shots: u64,
    /// Number of erasure realizations; overrides `shots` when set.
    pub realizations: Option<u64>,
    /// Pauli repetitions per realization; defaults by distance.
    pub n_rep: Option<u64>,
}

impl SamplingConfig {
    pub fn shots(shots: u64) -> Self {
        SamplingConfig {
            shots,
            realizations: None,
            n_rep: None,
        }
    }

    /// `(realizations, repetitions)` for a code of distance `d`.
    pub fn layout(&self, scheme: Scheme, d: usize) -> (u64, u64) {
        if scheme != Scheme::Erasure {
            return (self.realizations.unwrap_or(self.shots), 1);
        }
        let n_rep = self.n_rep.unwrap_or(default_n_rep(d) as u64).max(1);
        let real = self.realizations.unwrap_or_else(|| self.shots.div_ceil(n_rep));
        (real, n_rep)
    }
}

fn summarize(params: &NoiseParams, d: usize, per_real: &[u64], n_rep: u64) -> PfailEstimate {
    let r = per_real.len() as u64;
    let shots = r * n_rep;
    let failures: u64 = per_real.iter().sum();
    let p_fail = failures as f64 / shots as f64;
    let stderr = if n_rep == 1 || r < 2 {
        (p_fail * (1.0 - p_fail) / shots as f64).sqrt()
    } else {
        // Clustered over realizations.
        let mean = p_fail;
        let var = per_real
            .iter()
            .map(|&f| {
                let x = f as f64 / n_rep as f64 - mean;
                x * x
            })
            .sum::<f64>()
            / (r - 1) as f64;
        (var / r as f64).sqrt()
    };
    PfailEstimate {
        scheme: params.scheme,
        d,
        p: params.p,
        p_m: params.p_m,
        e: params.e,
        shots,
        failures,
        p_fail,
        stderr,
    }
}

/// Circuit-level memory experiment with `d` noisy rounds. In the erasure
/// scheme each erasure realization is reused for `n_rep` fresh draws of the
/// Pauli and measurement noise.
pub fn estimate_pfail(sim: &Simulator, params: &NoiseParams, config: &SamplingConfig, seed: u64) -> Result<PfailEstimate> {
    params.validate()?;
    if config.shots == 0 && config.realizations.unwrap_or(0) == 0 {
        return Err(invalid("shots must be positive"));
    }
    if params.scheme == Scheme::CodeCapacity {
        return estimate_code_capacity(&sim.layout, params, config, seed);
    }
    let effective = if params.scheme == Scheme::Erasure && (params.q_plus > 0.0 || params.q_minus > 0.0) {
        imperfect_detection_adjust(params)?
    } else {
        *params
    };
    let graph = DecodingGraph::from_circuit(sim, &effective)?;
    let (real, n_rep) = config.layout(params.scheme, sim.distance());

    let per_real: Vec<u64> = (0..real)
        .into_par_iter()
        .map_init(
            || Matcher::new(&graph),
            |matcher, r| -> Result<u64> {
                let erased = sim.sample_realization(&effective, seed, r);
                let mut fails = 0;
                for rep in 0..n_rep {
                    let faults = sim.sample_with_erasures(&effective, &erased, seed, r, rep);
                    let record = sim.fast_record(&faults);
                    if !matcher.decode_shot(&record)? {
                        fails += 1;
                    }
                }
                Ok(fails)
            },
        )
        .collect::<Result<_>>()?;
    let mut est = summarize(params, sim.distance(), &per_real, n_rep);
    est.p = params.p;
    est.e = params.e;
    Ok(est)
}

/// One perfect round of checks with independent data-qubit noise: erasure
/// at rate `e` and Pauli noise at rate `p` on the rest.
pub fn estimate_code_capacity(layout: &SurfaceCodeLayout, params: &NoiseParams, config: &SamplingConfig, seed: u64) -> Result<PfailEstimate> {
    let graph = DecodingGraph::code_capacity(layout, params.p);
    let shots = config.realizations.unwrap_or(config.shots);
    if shots == 0 {
        return Err(invalid("shots must be positive"));
    }
    let noise = CapacityNoise {
        erasure: params.e,
        pauli: params.p,
    };
    let fails: Vec<u64> = (0..shots)
        .into_par_iter()
        .map_init(
            || Matcher::new(&graph),
            |matcher, s| -> Result<u64> {
                let mut rng = stream(seed, Domain::CodeCapacity, s, 0);
                let rec = code_capacity_shot(layout, noise, &mut rng);
                Ok(!matcher.decode(&rec.defects, &rec.erased_data, rec.logical_flip)? as u64)
            },
        )
        .collect::<Result<_>>()?;
    Ok(summarize(params, layout.distance, &fails, 1))
}
