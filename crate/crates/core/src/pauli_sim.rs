//! Pauli-frame propagation of sampled faults.
//!
//! Frames are bit-sliced: each `u64` carries 64 independent frames, one per
//! bit. The same propagation routine runs a single sampled shot (lane 0) and
//! builds the table of single-fault effects used by the fast sampler, so the
//! two paths share their gate semantics and can be checked against each other.
//!
//! Detector layout: the `(R+1) * n_z` Z-check detectors come first, indexed
//! `round * n_z + check`, followed by `R * n_x` X-check detectors for rounds
//! `1..=R`. Z detectors in round 0 compare against the deterministic `|0>`
//! preparation; every later detector is the XOR of consecutive outcomes.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::code_layout::{Circuit, Op, StabilizerKind, SurfaceCodeLayout};
use crate::error::{invalid, Result};
use crate::noise::{sample_erasures, sample_pauli_faults, FaultSample, NoiseParams, NoiseSites, PauliCode, SiteKind};
use crate::rng::{stream, Domain};

/// Compact bit set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn toggle(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn set(&mut self, i: usize, value: bool) {
        if self.get(i) != value {
            self.toggle(i);
        }
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits below `limit`, ascending.
    pub fn ones_below(&self, limit: usize) -> Vec<u32> {
        let mut out = Vec::new();
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let i = wi * 64 + w.trailing_zeros() as usize;
                if i >= limit {
                    return out;
                }
                out.push(i as u32);
                w &= w - 1;
            }
        }
        out
    }

    pub fn ones(&self) -> Vec<u32> {
        self.ones_below(self.len)
    }

    fn to_bytes(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8))
            .map(|b| (self.words[b / 8] >> ((b % 8) * 8)) as u8)
            .collect()
    }

    fn from_bytes(len: usize, bytes: &[u8]) -> Self {
        let mut v = BitVec::zeros(len);
        for (b, &byte) in bytes.iter().enumerate() {
            v.words[b / 8] |= (byte as u64) << ((b % 8) * 8);
        }
        v
    }
}

/// Result of one shot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShotRecord {
    pub detection_events: BitVec,
    pub erased_cnots: Vec<u32>,
    /// Whether the logical Z observable was flipped before correction.
    pub logical_flip: bool,
}

/// Mapping from measurements to detectors and the logical observable.
#[derive(Clone, Debug)]
pub struct DetectorModel {
    pub n_z: usize,
    pub n_x: usize,
    pub total_rounds: usize,
    pub num_detectors: usize,
    /// Measurement indices combined by each detector.
    pub detectors: Vec<Vec<u32>>,
    /// Data qubits whose X frame flips the logical Z observable.
    pub observable: Vec<usize>,
}

impl DetectorModel {
    pub fn new(layout: &SurfaceCodeLayout, circuit: &Circuit) -> Self {
        let n_z = layout.z_stabilizers.len();
        let n_x = layout.x_stabilizers.len();
        let total_rounds = circuit.total_rounds();
        let per_round = n_z + n_x;
        let meas = |kind: StabilizerKind, s: usize, k: usize| -> u32 {
            let idx = k * per_round + if kind == StabilizerKind::Z { s } else { n_z + s };
            debug_assert_eq!(circuit.measurements[idx].stabilizer, s);
            idx as u32
        };
        let mut detectors = Vec::with_capacity(total_rounds * per_round);
        for k in 0..total_rounds {
            for s in 0..n_z {
                let mut d = vec![meas(StabilizerKind::Z, s, k)];
                if k > 0 {
                    d.push(meas(StabilizerKind::Z, s, k - 1));
                }
                detectors.push(d);
            }
        }
        for k in 1..total_rounds {
            for s in 0..n_x {
                detectors.push(vec![meas(StabilizerKind::X, s, k), meas(StabilizerKind::X, s, k - 1)]);
            }
        }
        DetectorModel {
            n_z,
            n_x,
            total_rounds,
            num_detectors: detectors.len(),
            detectors,
            observable: layout.logical_z.clone(),
        }
    }

    pub fn num_z_detectors(&self) -> usize {
        self.n_z * self.total_rounds
    }

    /// `(check, round)` of a Z detector.
    pub fn z_coords(&self, det: usize) -> (usize, usize) {
        (det % self.n_z, det / self.n_z)
    }
}

/// Bit-sliced frame state for 64 lanes.
struct Frames {
    x: Vec<u64>,
    z: Vec<u64>,
    meas: Vec<u64>,
}

/// One injected Pauli: lane mask for X and Z components on a qubit.
#[derive(Clone, Copy)]
struct Injection {
    qubit: u32,
    x: u64,
    z: u64,
}

/// Propagate frames through the circuit. `inject[t]` is applied after the
/// operations of timestep `t`; `meas_flips` are XORed into the records.
fn propagate(circuit: &Circuit, inject: &[Vec<Injection>], meas_flips: &[(u32, u64)]) -> Frames {
    let mut f = Frames {
        x: vec![0; circuit.num_qubits],
        z: vec![0; circuit.num_qubits],
        meas: vec![0; circuit.measurements.len()],
    };
    let mut m = 0usize;
    for (t, step) in circuit.timesteps.iter().enumerate() {
        for op in &step.ops {
            match *op {
                Op::PrepZ(q) | Op::PrepX(q) => {
                    f.x[q] = 0;
                    f.z[q] = 0;
                }
                Op::Idle(_) => {}
                Op::Cnot { control, target } => {
                    f.x[target] ^= f.x[control];
                    f.z[control] ^= f.z[target];
                }
                Op::MeasZ(q) => {
                    f.meas[m] ^= f.x[q];
                    m += 1;
                }
                Op::MeasX(q) => {
                    f.meas[m] ^= f.z[q];
                    m += 1;
                }
            }
        }
        if let Some(list) = inject.get(t) {
            for inj in list {
                f.x[inj.qubit as usize] ^= inj.x;
                f.z[inj.qubit as usize] ^= inj.z;
            }
        }
    }
    for &(mi, mask) in meas_flips {
        f.meas[mi as usize] ^= mask;
    }
    f
}

/// Sparse detector set plus logical bit of a fault.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effect {
    pub detectors: Vec<u32>,
    pub logical: bool,
}

impl Effect {
    fn xor(&self, other: &Effect) -> Effect {
        let mut detectors = Vec::with_capacity(self.detectors.len() + other.detectors.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.detectors, &other.detectors);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                detectors.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                detectors.push(b[j]);
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        Effect {
            detectors,
            logical: self.logical ^ other.logical,
        }
    }
}

/// Effects of every Pauli at every noisy site: 3 per single-qubit site,
/// 15 per CNOT site, and one per noisy measurement.
#[derive(Clone, Debug)]
pub struct EffectTable {
    single: Vec<Effect>,
    cnot: Vec<Effect>,
    measurement: Vec<Effect>,
}

impl EffectTable {
    pub fn single(&self, site: usize, pauli: PauliCode) -> &Effect {
        &self.single[site * 3 + pauli as usize - 1]
    }

    pub fn cnot(&self, site: usize, pauli: PauliCode) -> &Effect {
        &self.cnot[site * 15 + pauli as usize - 1]
    }

    /// Effect of flipping the `i`-th noisy measurement.
    pub fn measurement(&self, i: usize) -> &Effect {
        &self.measurement[i]
    }
}

/// Layout, circuit and the derived tables needed to simulate shots.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub layout: SurfaceCodeLayout,
    pub circuit: Circuit,
    pub sites: NoiseSites,
    pub detectors: DetectorModel,
    pub effects: EffectTable,
    /// Qubits of each single-qubit site.
    single_qubit: Vec<u32>,
    /// `(control, target)` of each CNOT site.
    cnot_qubits: Vec<(u32, u32)>,
    /// Position of each measurement index among the noisy measurements.
    noisy_meas_pos: Vec<u32>,
}

impl Simulator {
    pub fn new(layout: SurfaceCodeLayout, rounds: usize) -> Result<Self> {
        let circuit = crate::code_layout::syndrome_circuit(&layout, rounds)?;
        let sites = NoiseSites::new(&circuit);
        let detectors = DetectorModel::new(&layout, &circuit);
        let op_at = |loc: crate::noise::Location| circuit.timesteps[loc.timestep as usize].ops[loc.op as usize];
        let single_qubit = sites
            .single
            .iter()
            .map(|&l| match op_at(l) {
                Op::PrepZ(q) | Op::PrepX(q) | Op::Idle(q) => q as u32,
                _ => unreachable!(),
            })
            .collect();
        let cnot_qubits = sites
            .cnots
            .iter()
            .map(|&l| match op_at(l) {
                Op::Cnot { control, target } => (control as u32, target as u32),
                _ => unreachable!(),
            })
            .collect();
        let mut noisy_meas_pos = vec![u32::MAX; circuit.measurements.len()];
        for (i, &m) in sites.measurements.iter().enumerate() {
            noisy_meas_pos[m as usize] = i as u32;
        }
        let mut sim = Simulator {
            layout,
            circuit,
            sites,
            detectors,
            effects: EffectTable {
                single: Vec::new(),
                cnot: Vec::new(),
                measurement: Vec::new(),
            },
            single_qubit,
            cnot_qubits,
            noisy_meas_pos,
        };
        sim.effects = sim.build_effects();
        Ok(sim)
    }

    pub fn distance(&self) -> usize {
        self.layout.distance
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.num_detectors
    }

    fn effects_from_frames(&self, frames: &Frames, lanes: usize) -> Vec<Effect> {
        let mut out = vec![Effect::default(); lanes];
        for (d, meas) in self.detectors.detectors.iter().enumerate() {
            let mut bits = 0u64;
            for &m in meas {
                bits ^= frames.meas[m as usize];
            }
            while bits != 0 {
                let lane = bits.trailing_zeros() as usize;
                if lane < lanes {
                    out[lane].detectors.push(d as u32);
                }
                bits &= bits - 1;
            }
        }
        let mut obs = 0u64;
        for &q in &self.detectors.observable {
            obs ^= frames.x[q];
        }
        for (lane, e) in out.iter_mut().enumerate() {
            e.logical = obs >> lane & 1 == 1;
        }
        out
    }

    fn build_effects(&self) -> EffectTable {
        // Elementary faults: X or Z on one qubit after an operation, or a
        // measurement flip. Everything else is a product of these.
        #[derive(Clone, Copy)]
        enum Elem {
            Pauli { t: u32, q: u32, z: bool },
            Meas(u32),
        }
        let mut elems = Vec::new();
        for (i, loc) in self.sites.single.iter().enumerate() {
            let q = self.single_qubit[i];
            elems.push(Elem::Pauli { t: loc.timestep, q, z: false });
            elems.push(Elem::Pauli { t: loc.timestep, q, z: true });
        }
        for (i, loc) in self.sites.cnots.iter().enumerate() {
            let (c, t) = self.cnot_qubits[i];
            for (q, z) in [(c, false), (c, true), (t, false), (t, true)] {
                elems.push(Elem::Pauli { t: loc.timestep, q, z });
            }
        }
        for &m in &self.sites.measurements {
            elems.push(Elem::Meas(m));
        }

        let elementary: Vec<Effect> = elems
            .par_chunks(64)
            .flat_map_iter(|chunk| {
                let mut inject = vec![Vec::new(); self.circuit.timesteps.len()];
                let mut flips = Vec::new();
                for (lane, e) in chunk.iter().enumerate() {
                    let bit = 1u64 << lane;
                    match *e {
                        Elem::Pauli { t, q, z } => inject[t as usize].push(Injection {
                            qubit: q,
                            x: if z { 0 } else { bit },
                            z: if z { bit } else { 0 },
                        }),
                        Elem::Meas(m) => flips.push((m, bit)),
                    }
                }
                let frames = propagate(&self.circuit, &inject, &flips);
                self.effects_from_frames(&frames, chunk.len())
            })
            .collect();

        let n1 = self.sites.single.len();
        let n2 = self.sites.cnots.len();
        let mut single = Vec::with_capacity(3 * n1);
        for i in 0..n1 {
            let (x, z) = (&elementary[2 * i], &elementary[2 * i + 1]);
            single.push(x.clone());
            single.push(z.clone());
            single.push(x.xor(z));
        }
        let base = 2 * n1;
        let mut cnot = Vec::with_capacity(15 * n2);
        for i in 0..n2 {
            let parts = &elementary[base + 4 * i..base + 4 * i + 4];
            for code in 1u8..16 {
                let mut e = Effect::default();
                for (b, part) in parts.iter().enumerate() {
                    if code >> b & 1 == 1 {
                        e = e.xor(part);
                    }
                }
                cnot.push(e);
            }
        }
        let measurement = elementary[base + 4 * n2..].to_vec();
        EffectTable { single, cnot, measurement }
    }

    /// Draw the faults of repetition `rep` within erasure realization
    /// `realization`.
    pub fn sample(&self, params: &NoiseParams, seed: u64, realization: u64, rep: u64) -> FaultSample {
        let erased = self.sample_realization(params, seed, realization);
        self.sample_with_erasures(params, &erased, seed, realization, rep)
    }

    pub fn sample_realization(&self, params: &NoiseParams, seed: u64, realization: u64) -> Vec<u32> {
        let mut rng = stream(seed, Domain::Erasure, realization, 0);
        sample_erasures(&self.sites, params.erasure_rate(), &mut rng)
    }

    pub fn sample_with_erasures(
        &self,
        params: &NoiseParams,
        erased: &[u32],
        seed: u64,
        realization: u64,
        rep: u64,
    ) -> FaultSample {
        let mut rng = stream(seed, Domain::Pauli, realization, rep);
        sample_pauli_faults(&self.sites, params, erased, &mut rng)
    }

    /// Propagate a fault sample through the circuit gate by gate.
    pub fn propagate_faults(&self, faults: &FaultSample) -> ShotRecord {
        let mut inject = vec![Vec::new(); self.circuit.timesteps.len()];
        for f in &faults.pauli_faults {
            let push = |inject: &mut Vec<Vec<Injection>>, t: u32, q: u32, bits: u8| {
                if bits != 0 {
                    inject[t as usize].push(Injection {
                        qubit: q,
                        x: (bits & 1) as u64,
                        z: (bits >> 1 & 1) as u64,
                    });
                }
            };
            match f.kind {
                SiteKind::Single => {
                    let t = self.sites.single[f.site as usize].timestep;
                    push(&mut inject, t, self.single_qubit[f.site as usize], f.pauli & 3);
                }
                SiteKind::Cnot => {
                    let t = self.sites.cnots[f.site as usize].timestep;
                    let (c, tq) = self.cnot_qubits[f.site as usize];
                    push(&mut inject, t, c, f.pauli & 3);
                    push(&mut inject, t, tq, f.pauli >> 2 & 3);
                }
            }
        }
        let flips: Vec<(u32, u64)> = faults.flipped_measurements.iter().map(|&m| (m, 1)).collect();
        let frames = propagate(&self.circuit, &inject, &flips);
        let effect = self.effects_from_frames(&frames, 1).pop().unwrap_or_default();
        self.record_from_effect(&effect, faults)
    }

    /// Combine tabulated single-fault effects.
    pub fn apply_effects(&self, faults: &FaultSample, events: &mut BitVec) -> bool {
        events.clear();
        let mut logical = false;
        let mut apply = |e: &Effect| {
            for &d in &e.detectors {
                events.toggle(d as usize);
            }
            logical ^= e.logical;
        };
        for f in &faults.pauli_faults {
            match f.kind {
                SiteKind::Single => apply(self.effects.single(f.site as usize, f.pauli)),
                SiteKind::Cnot => apply(self.effects.cnot(f.site as usize, f.pauli)),
            }
        }
        for &m in &faults.flipped_measurements {
            apply(self.effects.measurement(self.noisy_meas_pos[m as usize] as usize));
        }
        logical
    }

    pub fn fast_record(&self, faults: &FaultSample) -> ShotRecord {
        let mut events = BitVec::zeros(self.num_detectors());
        let logical_flip = self.apply_effects(faults, &mut events);
        ShotRecord {
            detection_events: events,
            erased_cnots: faults.erased_cnots.clone(),
            logical_flip,
        }
    }

    fn record_from_effect(&self, effect: &Effect, faults: &FaultSample) -> ShotRecord {
        let mut events = BitVec::zeros(self.num_detectors());
        for &d in &effect.detectors {
            events.toggle(d as usize);
        }
        ShotRecord {
            detection_events: events,
            erased_cnots: faults.erased_cnots.clone(),
            logical_flip: effect.logical,
        }
    }

    /// Sample and propagate one shot with explicit frame simulation.
    pub fn run_shot(&self, params: &NoiseParams, seed: u64, shot_index: u64) -> ShotRecord {
        self.propagate_faults(&self.sample(params, seed, shot_index, 0))
    }

    /// Shots `0..shots`, each with its own keyed stream. The output does not
    /// depend on the rayon pool size.
    pub fn run_batch(&self, params: &NoiseParams, shots: usize, seed: u64) -> Vec<ShotRecord> {
        (0..shots as u64)
            .into_par_iter()
            .map(|s| self.fast_record(&self.sample(params, seed, s, 0)))
            .collect()
    }
}

/// One round of perfect Z-check syndrome with independent data noise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CapacityRecord {
    pub defects: Vec<u32>,
    pub erased_data: Vec<u32>,
    pub logical_flip: bool,
}

/// Independent data-qubit noise for code-capacity shots. Each qubit is
/// erased with probability `erasure` and then receives I, X, Y or Z
/// uniformly; otherwise X, Y and Z each occur with probability `pauli / 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapacityNoise {
    pub erasure: f64,
    pub pauli: f64,
}

pub fn code_capacity_shot<R: Rng + ?Sized>(layout: &SurfaceCodeLayout, noise: CapacityNoise, rng: &mut R) -> CapacityRecord {
    let n = layout.num_data();
    let mut x_err = vec![false; n];
    let mut erased_data = Vec::new();
    crate::noise::for_each_bernoulli(rng, n, noise.erasure, |q| erased_data.push(q as u32));
    for &q in &erased_data {
        // X component of a uniform draw over {I, X, Y, Z}.
        x_err[q as usize] = rng.gen::<bool>();
    }
    if noise.pauli > 0.0 {
        let mut hit = Vec::new();
        crate::noise::for_each_bernoulli(rng, n, noise.pauli, |q| hit.push(q));
        let mut erased = erased_data.iter().peekable();
        for q in hit {
            while erased.next_if(|&&e| (e as usize) < q).is_some() {}
            if erased.peek().is_some_and(|&&e| e as usize == q) {
                continue;
            }
            let pauli: u8 = rng.gen_range(1..4);
            x_err[q] = pauli & 1 == 1;
        }
    }
    capacity_record(layout, &x_err, erased_data)
}

/// Syndrome and logical parity of a fixed X-error pattern on the data.
pub fn capacity_record(layout: &SurfaceCodeLayout, x_err: &[bool], erased_data: Vec<u32>) -> CapacityRecord {
    let defects = layout
        .z_stabilizers
        .iter()
        .enumerate()
        .filter(|(_, s)| s.support.iter().filter(|&&q| x_err[q]).count() % 2 == 1)
        .map(|(i, _)| i as u32)
        .collect();
    let logical_flip = layout.logical_z.iter().filter(|&&q| x_err[q]).count() % 2 == 1;
    CapacityRecord {
        defects,
        erased_data,
        logical_flip,
    }
}

const DUMP_MAGIC: &[u8; 4] = b"EQSH";

/// Fixed-size binary records: a header with the code distance, round count,
/// detector count and CNOT-site count, then per shot the detector bitmap,
/// the erased-CNOT bitmap and one byte for the logical flip.
pub fn write_shot_dump<W: Write>(mut w: W, sim: &Simulator, records: &[ShotRecord]) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    let n_cnot = sim.sites.cnots.len();
    for v in [1u32, sim.distance() as u32, sim.circuit.rounds as u32, sim.num_detectors() as u32, n_cnot as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut erased = BitVec::zeros(n_cnot);
    for r in records {
        w.write_all(&r.detection_events.to_bytes())?;
        erased.clear();
        for &c in &r.erased_cnots {
            erased.toggle(c as usize);
        }
        w.write_all(&erased.to_bytes())?;
        w.write_all(&[r.logical_flip as u8])?;
    }
    Ok(())
}

pub fn read_shot_dump<R: Read>(mut r: R) -> Result<(u32, Vec<ShotRecord>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(invalid("not a shot dump"));
    }
    let mut header = [0u32; 5];
    for h in &mut header {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *h = u32::from_le_bytes(b);
    }
    let [_, d, _, n_det, n_cnot] = header;
    let (det_bytes, cnot_bytes) = ((n_det as usize).div_ceil(8), (n_cnot as usize).div_ceil(8));
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let rec_len = det_bytes + cnot_bytes + 1;
    if body.len() % rec_len != 0 {
        return Err(invalid("truncated shot dump"));
    }
    let records = body
        .chunks(rec_len)
        .map(|c| ShotRecord {
            detection_events: BitVec::from_bytes(n_det as usize, &c[..det_bytes]),
            erased_cnots: BitVec::from_bytes(n_cnot as usize, &c[det_bytes..det_bytes + cnot_bytes]).ones(),
            logical_flip: c[rec_len - 1] == 1,
        })
        .collect();
    Ok((d, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_layout::build_layout;
    use crate::noise::{PauliFault, Scheme};

    fn sim(d: usize, r: usize) -> Simulator {
        Simulator::new(build_layout(d).unwrap(), r).unwrap()
    }

    #[test]
    fn detector_counts() {
        let s = sim(3, 3);
        assert_eq!(s.detectors.num_z_detectors(), 4 * 6);
        assert_eq!(s.num_detectors(), 4 * 6 + 3 * 6);
    }

    #[test]
    fn noiseless_shot_is_trivial() {
        let s = sim(3, 1);
        let rec = s.run_shot(&NoiseParams::new(0.0, 0.0, Scheme::Erasure), 1, 0);
        assert_eq!(rec.detection_events.count_ones(), 0);
        assert!(!rec.logical_flip);
    }

    #[test]
    fn data_x_fault_flips_neighbouring_z_checks() {
        let s = sim(3, 3);
        // Every single-qubit X fault flips at most two Z detectors and no X detector.
        let nz = s.detectors.num_z_detectors() as u32;
        for i in 0..s.sites.single.len() {
            let e = s.effects.single(i, 1);
            assert!(e.detectors.len() <= 2);
            assert!(e.detectors.iter().all(|&d| d < nz));
            let ez = s.effects.single(i, 2);
            assert!(ez.detectors.iter().all(|&d| d >= nz));
            assert!(!ez.logical);
        }
    }

    #[test]
    fn measurement_flip_pairs_consecutive_rounds() {
        let s = sim(3, 3);
        let n_z = s.detectors.n_z;
        for (i, &m) in s.sites.measurements.iter().enumerate() {
            let tag = s.circuit.measurements[m as usize];
            let e = s.effects.measurement(i);
            if tag.kind == StabilizerKind::Z {
                let want = [(tag.round * n_z + tag.stabilizer) as u32, ((tag.round + 1) * n_z + tag.stabilizer) as u32];
                assert_eq!(e.detectors, want);
            }
        }
    }

    #[test]
    fn fast_path_matches_propagation() {
        let s = sim(5, 5);
        let params = NoiseParams::new(0.01, 0.05, Scheme::Erasure);
        for shot in 0..200 {
            let f = s.sample(&params, 5, shot, 0);
            assert_eq!(s.fast_record(&f), s.propagate_faults(&f));
        }
    }

    #[test]
    fn union_of_faults_xors_events() {
        let s = sim(3, 3);
        let params = NoiseParams::new(0.02, 0.02, Scheme::Erasure);
        let a = s.sample(&params, 1, 0, 0);
        let b = s.sample(&params, 1, 1, 0);
        let mut both = a.clone();
        both.pauli_faults.extend(b.pauli_faults.iter().copied());
        both.flipped_measurements.extend(b.flipped_measurements.iter().copied());
        let (ra, rb, rab) = (s.propagate_faults(&a), s.propagate_faults(&b), s.propagate_faults(&both));
        for d in 0..s.num_detectors() {
            assert_eq!(rab.detection_events.get(d), ra.detection_events.get(d) ^ rb.detection_events.get(d));
        }
        assert_eq!(rab.logical_flip, ra.logical_flip ^ rb.logical_flip);
    }

    #[test]
    fn batch_is_reproducible() {
        let s = sim(3, 3);
        let params = NoiseParams::new(0.01, 0.01, Scheme::Erasure);
        assert!(s.run_batch(&params, 0, 3).is_empty());
        let a = s.run_batch(&params, 50, 3);
        assert_eq!(a, s.run_batch(&params, 50, 3));
        assert_ne!(a, s.run_batch(&params, 50, 4));
    }

    #[test]
    fn logical_x_string_is_undetected() {
        let s = sim(3, 1);
        let layout = &s.layout;
        // X on column 0 right after data preparation.
        let faults = FaultSample {
            pauli_faults: s
                .sites
                .single
                .iter()
                .enumerate()
                .filter(|(i, loc)| loc.timestep == 0 && layout.logical_x.contains(&(s.single_qubit[*i] as usize)))
                .map(|(i, _)| PauliFault { kind: SiteKind::Single, site: i as u32, pauli: 1 })
                .collect(),
            ..Default::default()
        };
        assert_eq!(faults.pauli_faults.len(), 3);
        let rec = s.propagate_faults(&faults);
        assert_eq!(rec.detection_events.count_ones(), 0);
        assert!(rec.logical_flip);
    }

    #[test]
    fn capacity_zero_rate() {
        let layout = build_layout(5).unwrap();
        let mut rng = stream(1, Domain::CodeCapacity, 0, 0);
        let rec = code_capacity_shot(&layout, CapacityNoise { erasure: 0.0, pauli: 0.0 }, &mut rng);
        assert!(rec.defects.is_empty() && rec.erased_data.is_empty() && !rec.logical_flip);
    }

    #[test]
    fn shot_dump_round_trip() {
        let s = sim(3, 2);
        let params = NoiseParams::new(0.02, 0.05, Scheme::Erasure);
        let recs = s.run_batch(&params, 20, 8);
        let mut buf = Vec::new();
        write_shot_dump(&mut buf, &s, &recs).unwrap();
        let (d, back) = read_shot_dump(&buf[..]).unwrap();
        assert_eq!(d, 3);
        assert_eq!(back, recs);
        assert!(read_shot_dump(&b"XXXX"[..]).is_err());
    }
}
