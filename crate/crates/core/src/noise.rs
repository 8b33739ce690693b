//! Heralded-erasure-plus-Pauli circuit noise.
//!
//! Every preparation and idle location in a noisy round is followed by a
//! uniform single-qubit Pauli channel of total rate `p`, every CNOT by a
//! uniform two-qubit Pauli channel of rate `p`, and every ancilla measurement
//! is flipped with probability `p_m`. Idling is applied per timestep to each
//! qubit without an operation. In the erasure scheme each CNOT is also erased
//! with probability `e`; an erased CNOT is followed by one of the 16
//! two-qubit Paulis drawn uniformly and its location is reported to the
//! decoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::code_layout::{Circuit, Op};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Erasure,
    Standard,
    CodeCapacity,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Erasure => "erasure",
            Scheme::Standard => "standard",
            Scheme::CodeCapacity => "code_capacity",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erasure" => Ok(Scheme::Erasure),
            "standard" => Ok(Scheme::Standard),
            "code_capacity" => Ok(Scheme::CodeCapacity),
            other => Err(invalid(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p: f64,
    pub p_m: f64,
    pub e: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    pub scheme: Scheme,
}

impl NoiseParams {
    /// Noise with the measurement flip rate defaulted to `2p/3`.
    pub fn new(p: f64, e: f64, scheme: Scheme) -> Self {
        NoiseParams {
            p,
            p_m: 2.0 * p / 3.0,
            e,
            q_plus: 0.0,
            q_minus: 0.0,
            scheme,
        }
    }

    pub fn with_p_m(mut self, p_m: f64) -> Self {
        self.p_m = p_m;
        self
    }

    pub fn with_detection(mut self, q_plus: f64, q_minus: f64) -> Self {
        self.q_plus = q_plus;
        self.q_minus = q_minus;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", self.p),
            ("p_m", self.p_m),
            ("e", self.e),
            ("q_plus", self.q_plus),
            ("q_minus", self.q_minus),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Rate of the two-qubit Pauli channel actually applied after each CNOT.
    pub fn cnot_pauli_rate(&self) -> f64 {
        match self.scheme {
            Scheme::Standard => standard_equivalent_rate(self.p, self.e).unwrap_or(1.0),
            _ => self.p,
        }
    }

    pub fn erasure_rate(&self) -> f64 {
        match self.scheme {
            Scheme::Erasure => self.e,
            _ => 0.0,
        }
    }
}

/// CNOT error rate of a scheme that cannot see erasures: `p + 15e/16 - ep`.
pub fn standard_equivalent_rate(p: f64, e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&e) {
        return Err(invalid(format!("rates must lie in [0, 1], got p={p}, e={e}")));
    }
    Ok(p + 15.0 * e / 16.0 - e * p)
}

/// Fold imperfect erasure detection into the Pauli and erasure rates.
/// Missed erasures act as Pauli noise (`p + e q_-`) and false alarms as extra
/// erasures (`e + q_+`).
pub fn imperfect_detection_adjust(params: &NoiseParams) -> Result<NoiseParams> {
    if params.scheme != Scheme::Erasure {
        return Err(invalid("imperfect detection applies to the erasure scheme only"));
    }
    let p = params.p + params.e * params.q_minus;
    let e = params.e + params.q_plus;
    if p > 1.0 || e > 1.0 {
        return Err(invalid(format!("adjusted rates exceed 1 (p={p}, e={e})")));
    }
    Ok(NoiseParams {
        p,
        e,
        q_plus: 0.0,
        q_minus: 0.0,
        ..*params
    })
}

/// Position of an operation inside a circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Location {
    pub timestep: u32,
    pub op: u32,
}

/// A Pauli on one or two qubits packed as bits: bit 0 X and bit 1 Z on the
/// first qubit (the control for CNOTs), bit 2 X and bit 3 Z on the second.
pub type PauliCode = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SiteKind {
    Single,
    Cnot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PauliFault {
    pub kind: SiteKind,
    /// Index into [`NoiseSites::single`] or [`NoiseSites::cnots`].
    pub site: u32,
    pub pauli: PauliCode,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FaultSample {
    pub pauli_faults: Vec<PauliFault>,
    /// Indices into [`NoiseSites::cnots`], ascending.
    pub erased_cnots: Vec<u32>,
    /// Indices into the circuit's measurement list, ascending.
    pub flipped_measurements: Vec<u32>,
}

impl FaultSample {
    pub fn is_empty(&self) -> bool {
        self.pauli_faults.is_empty() && self.erased_cnots.is_empty() && self.flipped_measurements.is_empty()
    }
}

/// Noisy locations of a circuit, grouped by channel.
#[derive(Clone, Debug)]
pub struct NoiseSites {
    pub single: Vec<Location>,
    pub cnots: Vec<Location>,
    pub measurements: Vec<u32>,
}

impl NoiseSites {
    pub fn new(circuit: &Circuit) -> Self {
        let mut single = Vec::new();
        let mut cnots = Vec::new();
        let mut measurements = Vec::new();
        let mut m = 0u32;
        for (t, step) in circuit.timesteps.iter().enumerate() {
            for (i, op) in step.ops.iter().enumerate() {
                let loc = Location { timestep: t as u32, op: i as u32 };
                match op {
                    Op::PrepZ(_) | Op::PrepX(_) | Op::Idle(_) if step.noisy => single.push(loc),
                    Op::Cnot { .. } if step.noisy => cnots.push(loc),
                    Op::MeasZ(_) | Op::MeasX(_) => {
                        if step.noisy {
                            measurements.push(m);
                        }
                        m += 1;
                    }
                    _ => {}
                }
            }
        }
        NoiseSites { single, cnots, measurements }
    }
}

/// Call `f` with the index of every success among `n` Bernoulli(`prob`)
/// trials, skipping ahead geometrically between successes.
pub fn for_each_bernoulli<R: Rng + ?Sized>(rng: &mut R, n: usize, prob: f64, mut f: impl FnMut(usize)) {
    if prob <= 0.0 || n == 0 {
        return;
    }
    if prob >= 1.0 {
        (0..n).for_each(f);
        return;
    }
    let log_q = (-prob).ln_1p();
    let mut i = 0usize;
    loop {
        let u: f64 = rng.gen::<f64>();
        // 1 - u lies in (0, 1], so the log is finite.
        let skip = ((1.0 - u).ln() / log_q).floor();
        if skip >= (n - i) as f64 {
            return;
        }
        i += skip as usize;
        f(i);
        i += 1;
        if i >= n {
            return;
        }
    }
}

/// Erased CNOTs for one realization.
pub fn sample_erasures<R: Rng + ?Sized>(sites: &NoiseSites, e: f64, rng: &mut R) -> Vec<u32> {
    let mut out = Vec::new();
    for_each_bernoulli(rng, sites.cnots.len(), e, |i| out.push(i as u32));
    out
}

/// Pauli and measurement faults, with a uniform 16-Pauli draw on every
/// erased CNOT replacing whatever the ordinary channel produced there.
pub fn sample_pauli_faults<R: Rng + ?Sized>(
    sites: &NoiseSites,
    params: &NoiseParams,
    erased: &[u32],
    rng: &mut R,
) -> FaultSample {
    let mut sample = FaultSample::default();
    let p1 = params.p;
    for_each_bernoulli(rng, sites.single.len(), p1, |i| {
        sample.pauli_faults.push(PauliFault {
            kind: SiteKind::Single,
            site: i as u32,
            pauli: 0,
        });
    });
    for f in &mut sample.pauli_faults {
        f.pauli = rng.gen_range(1..4);
    }

    let start = sample.pauli_faults.len();
    let p2 = params.cnot_pauli_rate();
    let mut hits = Vec::new();
    for_each_bernoulli(rng, sites.cnots.len(), p2, |i| hits.push(i as u32));
    let mut e_iter = erased.iter().peekable();
    let mut h_iter = hits.into_iter().peekable();
    loop {
        let next_e = e_iter.peek().copied().copied();
        let next_h = h_iter.peek().copied();
        match (next_e, next_h) {
            (None, None) => break,
            (Some(a), b) if b.map_or(true, |b| a <= b) => {
                e_iter.next();
                if b == Some(a) {
                    h_iter.next();
                }
                let pauli: PauliCode = rng.gen_range(0..16);
                if pauli != 0 {
                    sample.pauli_faults.push(PauliFault { kind: SiteKind::Cnot, site: a, pauli });
                }
            }
            (_, Some(b)) => {
                h_iter.next();
                sample.pauli_faults.push(PauliFault {
                    kind: SiteKind::Cnot,
                    site: b,
                    pauli: rng.gen_range(1..16),
                });
            }
            (Some(_), None) => unreachable!(),
        }
    }
    debug_assert!(sample.pauli_faults[start..].windows(2).all(|w| w[0].site < w[1].site));

    for_each_bernoulli(rng, sites.measurements.len(), params.p_m, |i| {
        sample.flipped_measurements.push(sites.measurements[i]);
    });
    sample.erased_cnots = erased.to_vec();
    sample
}

/// Draw a full fault sample from independent erasure and Pauli streams.
pub fn sample_faults<R: Rng + ?Sized>(
    sites: &NoiseSites,
    params: &NoiseParams,
    erasure_rng: &mut R,
    pauli_rng: &mut R,
) -> FaultSample {
    let erased = sample_erasures(sites, params.erasure_rate(), erasure_rng);
    sample_pauli_faults(sites, params, &erased, pauli_rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_layout::{build_layout, syndrome_circuit};
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;

    fn sites(d: usize, r: usize) -> NoiseSites {
        let l = build_layout(d).unwrap();
        NoiseSites::new(&syndrome_circuit(&l, r).unwrap())
    }

    #[test]
    fn equivalent_rate_examples() {
        assert_relative_eq!(standard_equivalent_rate(0.001, 0.0).unwrap(), 0.001);
        assert_relative_eq!(standard_equivalent_rate(0.0, 0.016).unwrap(), 0.015);
        assert_relative_eq!(standard_equivalent_rate(0.001, 0.01).unwrap(), 0.010365, max_relative = 1e-12);
        assert!(standard_equivalent_rate(-0.1, 0.0).is_err());
        assert!(standard_equivalent_rate(0.1, 1.5).is_err());
    }

    #[test]
    fn detection_adjustment() {
        let base = NoiseParams::new(0.001, 0.01, Scheme::Erasure).with_detection(0.0, 0.1);
        let adj = imperfect_detection_adjust(&base).unwrap();
        assert_relative_eq!(adj.p, 0.002, max_relative = 1e-12);
        assert_relative_eq!(adj.e, 0.01);
        assert_eq!(adj.q_minus, 0.0);

        let clean = NoiseParams::new(0.001, 0.01, Scheme::Erasure);
        assert_eq!(imperfect_detection_adjust(&clean).unwrap(), clean);

        let budget = NoiseParams::new(0.001, 0.006, Scheme::Erasure).with_detection(0.0, 1e-3);
        let adj = imperfect_detection_adjust(&budget).unwrap();
        assert_relative_eq!(adj.p - 0.001, 6e-6, max_relative = 1e-9);

        let over = NoiseParams::new(0.9, 0.9, Scheme::Erasure).with_detection(0.2, 0.5);
        assert!(imperfect_detection_adjust(&over).is_err());
        assert!(imperfect_detection_adjust(&NoiseParams::new(0.1, 0.0, Scheme::Standard)).is_err());
    }

    #[test]
    fn default_measurement_rate() {
        let n = NoiseParams::new(0.003, 0.0, Scheme::Erasure);
        assert_relative_eq!(n.p_m, 0.002);
        assert!(n.validate().is_ok());
        assert!(NoiseParams::new(1.2, 0.0, Scheme::Erasure).validate().is_err());
    }

    #[test]
    fn zero_rates_give_nothing() {
        let s = sites(3, 3);
        let params = NoiseParams::new(0.0, 0.0, Scheme::Erasure);
        let mut a = stream(1, Domain::Erasure, 0, 0);
        let mut b = stream(1, Domain::Pauli, 0, 0);
        assert!(sample_faults(&s, &params, &mut a, &mut b).is_empty());
    }

    #[test]
    fn certain_erasure_hits_every_noisy_cnot() {
        let s = sites(3, 3);
        let params = NoiseParams::new(0.0, 1.0, Scheme::Erasure).with_p_m(0.0);
        let mut a = stream(1, Domain::Erasure, 0, 0);
        let mut b = stream(1, Domain::Pauli, 0, 0);
        let f = sample_faults(&s, &params, &mut a, &mut b);
        assert_eq!(f.erased_cnots.len(), s.cnots.len());
        assert_eq!(s.cnots.len(), 3 * 40);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = sites(3, 3);
        let params = NoiseParams::new(0.01, 0.01, Scheme::Erasure);
        let run = || {
            let mut a = stream(9, Domain::Erasure, 4, 2);
            let mut b = stream(9, Domain::Pauli, 4, 2);
            sample_faults(&s, &params, &mut a, &mut b)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bernoulli_skipping_rate() {
        let mut rng = stream(3, Domain::Sampling, 0, 0);
        let n = 1000;
        let mut count = 0usize;
        for _ in 0..1000 {
            for_each_bernoulli(&mut rng, n, 0.01, |_| count += 1);
        }
        let mean = 1e4;
        assert!((count as f64 - mean).abs() < 5.0 * (mean * 0.99f64).sqrt());
    }
}
