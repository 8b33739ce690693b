//! Schrödinger-equation simulation of the dual-rail √iSWAP gate on four
//! coupled Kerr oscillators, its gauge-minimized infidelity and leakage, and
//! a two-level testbed for diabatic transitions during a coupling ramp.

pub mod ode;
pub mod simplex;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device_physics::{dual_rail_eff_params, DeviceParams};
use crate::error::{invalid, Error, Result};
use ode::Dopri5;

pub type StateVector = Vec<Complex64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "form")]
pub enum PulseForm {
    /// g_max {1 − [1 − sin(πt/T)]⁴}².
    SineQuartic,
    /// g_max · min(t/T_ramp, 1).
    LinearRamp { t_ramp: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub g_max: f64,
    pub t_gate: f64,
    pub form: PulseForm,
}

impl PulseShape {
    pub fn sine_quartic(g_max: f64, t_gate: f64) -> Self {
        PulseShape {
            g_max,
            t_gate,
            form: PulseForm::SineQuartic,
        }
    }

    /// Coupling at time `t`; zero outside `[0, T_g]`.
    pub fn value(&self, t: f64) -> f64 {
        if !(0.0..=self.t_gate).contains(&t) {
            return 0.0;
        }
        match self.form {
            PulseForm::SineQuartic => {
                let s = (PI * t / self.t_gate).sin();
                self.g_max * (1.0 - (1.0 - s).powi(4)).powi(2)
            }
            PulseForm::LinearRamp { t_ramp } => self.g_max * (t / t_ramp).min(1.0),
        }
    }

    /// ∫ g(t)² dt over the pulse.
    pub fn integral_of_square(&self) -> f64 {
        let n = 20_000;
        let h = self.t_gate / n as f64;
        let f = |t: f64| self.value(t).powi(2);
        let inner: f64 = (1..n).map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
        (f(0.0) + f(self.t_gate) + inner) * h / 3.0
    }

    /// Length of the linear ramp with the same 10%–90% rise time as the
    /// first half of the pulse.
    pub fn equivalent_ramp_time(&self) -> f64 {
        let n = 100_000;
        let half = self.t_gate / 2.0;
        let crossing = |level: f64| {
            (0..=n).map(|i| half * i as f64 / n as f64).find(|&t| self.value(t) >= level * self.g_max).unwrap_or(half)
        };
        (crossing(0.9) - crossing(0.1)) / 0.8
    }
}

pub fn pulse_value(shape: &PulseShape, t: f64) -> f64 {
    shape.value(t)
}

/// Number-conserving coupling between two modes, scaled by a pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivenCoupling {
    pub modes: (usize, usize),
    pub pulse: PulseShape,
}

/// Frequency shift `per_g2 · g(t)²` on one mode, following the driven
/// coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyShift {
    pub mode: usize,
    pub per_g2: f64,
}

/// Rotating-wave Hamiltonian of coupled Kerr oscillators,
/// Σ ω_i n_i + (η/2) a_i†a_i†a_i a_i + Σ g_ij (a_i†a_j + h.c.), with one
/// pulsed coupling and pulse-tracking frequency shifts.
#[derive(Clone, Debug)]
pub struct LadderHamiltonian {
    levels: usize,
    frequencies: Vec<f64>,
    anharmonicity: f64,
    drive: Option<DrivenCoupling>,
    shifts: Vec<FrequencyShift>,
    diag: Vec<f64>,
    hops: Vec<(u32, u32, f64)>,
    driven_hops: Vec<(u32, u32, f64)>,
    occupation: Vec<Vec<u8>>,
}

impl LadderHamiltonian {
    pub fn new(
        levels: usize,
        frequencies: Vec<f64>,
        anharmonicity: f64,
        static_couplings: &[(usize, usize, f64)],
        drive: Option<DrivenCoupling>,
        shifts: Vec<FrequencyShift>,
    ) -> Result<Self> {
        let modes = frequencies.len();
        if levels < 2 || modes == 0 {
            return Err(invalid("need at least one mode with two levels"));
        }
        let dim = levels.checked_pow(modes as u32).filter(|&d| d <= 1 << 16).ok_or_else(|| invalid("Hilbert space too large"))?;
        let mode_ok = |m: usize| m < modes;
        if static_couplings.iter().any(|&(i, j, _)| !mode_ok(i) || !mode_ok(j) || i == j)
            || drive.is_some_and(|d| !mode_ok(d.modes.0) || !mode_ok(d.modes.1) || d.modes.0 == d.modes.1)
            || shifts.iter().any(|s| !mode_ok(s.mode))
        {
            return Err(invalid("coupling refers to a missing mode"));
        }
        let occupation: Vec<Vec<u8>> = (0..dim)
            .map(|mut idx| {
                let mut n = vec![0u8; modes];
                for k in (0..modes).rev() {
                    n[k] = (idx % levels) as u8;
                    idx /= levels;
                }
                n
            })
            .collect();
        let index = |n: &[u8]| n.iter().fold(0usize, |acc, &x| acc * levels + x as usize);
        let diag = occupation
            .iter()
            .map(|n| {
                n.iter()
                    .enumerate()
                    .map(|(k, &x)| {
                        let x = f64::from(x);
                        frequencies[k] * x + anharmonicity / 2.0 * x * (x - 1.0)
                    })
                    .sum()
            })
            .collect();
        let hopping = |i: usize, j: usize, g: f64| -> Vec<(u32, u32, f64)> {
            let mut out = Vec::new();
            for (src, n) in occupation.iter().enumerate() {
                if n[j] > 0 && (n[i] as usize) < levels - 1 {
                    let mut m = n.clone();
                    m[i] += 1;
                    m[j] -= 1;
                    let amp = g * (f64::from(n[i] + 1) * f64::from(n[j])).sqrt();
                    out.push((src as u32, index(&m) as u32, amp));
                }
            }
            out
        };
        let hops = static_couplings.iter().flat_map(|&(i, j, g)| hopping(i, j, g)).collect();
        let driven_hops = drive.map(|d| hopping(d.modes.0, d.modes.1, 1.0)).unwrap_or_default();
        Ok(LadderHamiltonian {
            levels,
            frequencies,
            anharmonicity,
            drive,
            shifts,
            diag,
            hops,
            driven_hops,
            occupation,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn mode_count(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn anharmonicity(&self) -> f64 {
        self.anharmonicity
    }

    pub fn drive(&self) -> Option<&DrivenCoupling> {
        self.drive.as_ref()
    }

    /// Occupation numbers of basis state `index`.
    pub fn occupation(&self, index: usize) -> &[u8] {
        &self.occupation[index]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        if occupation.len() != self.mode_count() || occupation.iter().any(|&x| x as usize >= self.levels) {
            return None;
        }
        Some(occupation.iter().fold(0usize, |acc, &x| acc * self.levels + x as usize))
    }

    pub fn excitations(&self, index: usize) -> usize {
        self.occupation[index].iter().map(|&x| x as usize).sum()
    }

    fn coupling_at(&self, t: f64) -> f64 {
        self.drive.map_or(0.0, |d| d.pulse.value(t))
    }

    /// `out = −i H(t) ψ`.
    pub fn apply(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let g = self.coupling_at(t);
        for (k, o) in out.iter_mut().enumerate() {
            *o = psi[k] * self.diag[k];
        }
        for s in &self.shifts {
            let w = s.per_g2 * g * g;
            if w != 0.0 {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += psi[k] * (w * f64::from(self.occupation[k][s.mode]));
                }
            }
        }
        for &(a, b, amp) in &self.hops {
            out[b as usize] += psi[a as usize] * amp;
            out[a as usize] += psi[b as usize] * amp;
        }
        if g != 0.0 {
            for &(a, b, amp) in &self.driven_hops {
                out[b as usize] += psi[a as usize] * (g * amp);
                out[a as usize] += psi[b as usize] * (g * amp);
            }
        }
        for o in out.iter_mut() {
            *o = Complex64::new(o.im, -o.re);
        }
    }

    /// Dense real-symmetric H(t).
    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut col = vec![Complex64::default(); n];
        let mut e = vec![Complex64::default(); n];
        for j in 0..n {
            e[j] = Complex64::from(1.0);
            self.apply(t, &e, &mut col);
            for i in 0..n {
                m[(i, j)] = -col[i].im;
            }
            e[j] = Complex64::default();
        }
        m
    }
}

fn check_state(psi: &[Complex64], dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(invalid("state dimension does not match the Hamiltonian"));
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(invalid("initial state must be normalized"));
    }
    Ok(())
}

/// Solve iψ̇ = H(t)ψ from 0 to `t_final`.
pub fn evolve(h: &LadderHamiltonian, psi0: &[Complex64], t_final: f64, tol: f64) -> Result<StateVector> {
    let mut out = Vec::new();
    evolve_sampled(h, psi0, &[t_final], tol, |_, psi| out = psi.to_vec())?;
    Ok(out)
}

/// Ratio between the requested tolerance and the local tolerance handed to
/// the integrator, which keeps the accumulated norm drift under `10·tol`
/// for gate-length runs.
const LOCAL_TOLERANCE_RATIO: f64 = 1e3;

/// Like [`evolve`], observing the state at each of `times`. Fails if the
/// norm drifts by more than `10·tol` at any observation.
pub fn evolve_sampled(h: &LadderHamiltonian, psi0: &[Complex64], times: &[f64], tol: f64, mut observe: impl FnMut(f64, &[Complex64])) -> Result<ode::Stats> {
    check_state(psi0, h.dim())?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let mut psi = psi0.to_vec();
    let mut drift: Option<(f64, f64)> = None;
    let stats = Dopri5::new(tol / LOCAL_TOLERANCE_RATIO).solve(|t, y, dy| h.apply(t, y, dy), 0.0, &mut psi, times, |t, y| {
        let err = (y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs();
        if err >= 10.0 * tol && drift.is_none() {
            drift = Some((t, err));
        }
        observe(t, y)
    })?;
    if let Some((time, err)) = drift {
        return Err(Error::Integration {
            time,
            reason: format!("norm drifted by {err:e}"),
        });
    }
    Ok(stats)
}

/// The ideal √iSWAP on `|b c⟩`, indexed `2b + c`.
pub fn ideal_sqrt_iswap() -> Matrix4<Complex64> {
    let s = Complex64::from(FRAC_1_SQRT_2);
    let is = Complex64::new(0.0, FRAC_1_SQRT_2);
    let one = Complex64::from(1.0);
    let o = Complex64::default();
    Matrix4::new(one, o, o, o, o, s, is, o, o, is, s, o, o, o, o, one)
}

const Z1: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
const Z2: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

fn z_phases(a1: f64, a2: f64) -> [Complex64; 4] {
    std::array::from_fn(|k| Complex64::new(0.0, -(a1 * Z1[k] + a2 * Z2[k])).exp())
}

/// `exp(−iδ Z₁Z₂)` applied on the right of `u`.
pub fn with_zz(u: &Matrix4<Complex64>, delta_zz: f64) -> Matrix4<Complex64> {
    let mut out = *u;
    for j in 0..4 {
        let ph = Complex64::new(0.0, -delta_zz * Z1[j] * Z2[j]).exp();
        for i in 0..4 {
            out[(i, j)] *= ph;
        }
    }
    out
}

/// Single-qubit Z rotations `(δ₁, δ₂)` before and `(δ′₁, δ′₂)` after, plus a
/// Z₁Z₂ rotation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub before: [f64; 2],
    pub after: [f64; 2],
    pub zz: f64,
}

impl Gauge {
    fn from_slice(x: &[f64]) -> Self {
        Gauge {
            before: [x[0], x[1]],
            after: [x[2], x[3]],
            zz: x[4],
        }
    }

    /// U_Z(δ) · target · U_Z(δ′) · exp(−iδ_ZZ Z₁Z₂).
    pub fn dress(&self, target: &Matrix4<Complex64>) -> Matrix4<Complex64> {
        let l = z_phases(self.before[0], self.before[1]);
        let r = z_phases(self.after[0], self.after[1]);
        let mut out = *target;
        for i in 0..4 {
            for j in 0..4 {
                out[(i, j)] *= l[i] * r[j];
            }
        }
        with_zz(&out, self.zz)
    }
}

fn overlap_infidelity(u: &Matrix4<Complex64>, g: &Matrix4<Complex64>) -> f64 {
    let tr: Complex64 = u.iter().zip(g.iter()).map(|(a, b)| a.conj() * b).sum();
    1.0 - tr.norm_sqr() / 16.0
}

/// Minimum over the Z gauge of 1 − |Tr[U† U_Z(δ) √iSWAP U_Z(δ′) e^{−iδ_ZZ Z₁Z₂}]|²/16,
/// by a coarse grid followed by simplex refinement of the best cells.
pub fn gauge_infidelity(u: &Matrix4<Complex64>) -> Result<(f64, Gauge)> {
    let target = ideal_sqrt_iswap();
    let objective = |x: &[f64]| overlap_infidelity(u, &Gauge::from_slice(x).dress(&target));
    let steps: usize = 8;
    let mut cells: Vec<(f64, [f64; 5])> = Vec::with_capacity(steps.pow(5));
    for code in 0..steps.pow(5) {
        let mut x = [0.0; 5];
        let mut c = code;
        for v in x.iter_mut() {
            *v = (c % steps) as f64 * 2.0 * PI / steps as f64;
            c /= steps;
        }
        cells.push((objective(&x), x));
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<simplex::Minimum> = None;
    for (_, x0) in cells.iter().take(4) {
        let m = simplex::nelder_mead(objective, x0, PI / 16.0, 1e-14, 50_000);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("grid is nonempty");
    if !best.converged {
        return Err(Error::Optimizer { best: best.value });
    }
    Ok((best.value.max(0.0), Gauge::from_slice(&best.x)))
}

fn bit_flip(mask: usize) -> Matrix4<Complex64> {
    let mut m = Matrix4::<Complex64>::zeros();
    for k in 0..4 {
        m[(k ^ mask, k)] = Complex64::from(1.0);
    }
    m
}

/// Infidelity of `U X₁ U` with exp(−iπX₁X₂/4), minimized over single-qubit
/// Z rotations on either side and a single-qubit Pauli frame on the output.
/// For the ideal √iSWAP, `U X₁ U = −iY₁ exp(−iπX₁X₂/4) Z₁`.
pub fn cx_composition_infidelity(u: &Matrix4<Complex64>) -> f64 {
    let composed = u * bit_flip(2) * u;
    let target = (Matrix4::identity() - bit_flip(3) * Complex64::i()) * Complex64::from(FRAC_1_SQRT_2);
    let mut best = f64::INFINITY;
    for frame in 0..4 {
        let framed = bit_flip(frame) * target;
        let objective = |x: &[f64]| {
            let g = Gauge {
                before: [x[0], x[1]],
                after: [x[2], x[3]],
                zz: 0.0,
            };
            overlap_infidelity(&composed, &g.dress(&framed))
        };
        for start in [[0.0; 4], [PI / 4.0, 0.0, 0.0, 0.0], [0.0, PI / 4.0, 0.0, 0.0], [PI / 4.0, PI / 4.0, 0.0, 0.0]] {
            best = best.min(simplex::nelder_mead(objective, &start, PI / 16.0, 1e-15, 50_000).value);
        }
    }
    best.max(0.0)
}

/// The four-transmon model: dual rail 1 on modes 0–1 at frequency Δ, dual
/// rail 2 on modes 2–3 at 0, pulsed coupling between modes 1 and 2, and
/// pulse-tracking shifts that cancel the single-qubit X terms.
#[derive(Clone, Debug)]
pub struct GateModel {
    pub hamiltonian: LadderHamiltonian,
    /// Dressed computational states `|b c⟩` in the order `2b + c`.
    pub computational: [StateVector; 4],
    pub params: DeviceParams,
}

impl GateModel {
    pub fn new(params: &DeviceParams, levels: usize) -> Result<Self> {
        let c = dual_rail_eff_params(1.0, params.delta, params.eta, params.omega0)?;
        let pulse = PulseShape::sine_quartic(params.g_c, params.t_gate);
        let half = params.omega0 / 2.0;
        let hamiltonian = LadderHamiltonian::new(
            levels,
            vec![params.delta, params.delta, 0.0, 0.0],
            params.eta,
            &[(0, 1, half), (2, 3, half)],
            Some(DrivenCoupling { modes: (1, 2), pulse }),
            vec![FrequencyShift { mode: 1, per_g2: c.h_x1 }, FrequencyShift { mode: 2, per_g2: -c.h_x2 }],
        )?;
        let computational = dressed_computational_states(&hamiltonian)?;
        Ok(GateModel {
            hamiltonian,
            computational,
            params: *params,
        })
    }
}

/// Bare `|b c⟩ = ½[|ge⟩ − (−1)^b|eg⟩] ⊗ [|ge⟩ − (−1)^c|eg⟩]` projected onto the
/// eigenspace of the static Hamiltonian that contains it.
fn dressed_computational_states(h: &LadderHamiltonian) -> Result<[StateVector; 4]> {
    let dim = h.dim();
    let eig = SymmetricEigen::new(h.matrix_at(-1.0));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut out: [StateVector; 4] = Default::default();
    for (k, slot) in out.iter_mut().enumerate() {
        let (b, c) = (k >> 1, k & 1);
        let pair = |bit: usize| [(0u8, 1u8, 0.5f64.sqrt()), (1u8, 0u8, -(if bit == 0 { 1.0 } else { -1.0 }) * 0.5f64.sqrt())];
        let mut bare = vec![0.0; dim];
        for (a0, a1, x) in pair(b) {
            for (b0, b1, y) in pair(c) {
                let idx = h.index_of(&[a0, a1, b0, b1]).ok_or_else(|| invalid("truncation too small"))?;
                bare[idx] += x * y;
            }
        }
        let overlaps: Vec<f64> = (0..dim).map(|col| eig.eigenvectors.column(col).iter().zip(&bare).map(|(u, v)| u * v).sum()).collect();
        let lead = (0..dim).max_by(|&a, &b| overlaps[a].abs().total_cmp(&overlaps[b].abs())).unwrap_or(0);
        let energy = eig.eigenvalues[lead];
        let mut v = vec![0.0; dim];
        for col in 0..dim {
            if (eig.eigenvalues[col] - energy).abs() <= 1e-9 * scale {
                for (i, x) in v.iter_mut().enumerate() {
                    *x += overlaps[col] * eig.eigenvectors[(i, col)];
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 0.9 {
            return Err(Error::LevelIdentification(format!("computational state {k} is not an eigenstate of the static Hamiltonian")));
        }
        *slot = v.iter().map(|x| Complex64::from(x / norm)).collect();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqrtIswapResult {
    /// ⟨i|U|j⟩ over the dressed computational states, row-major.
    pub unitary: [[[f64; 2]; 4]; 4],
    pub infidelity: f64,
    pub gauge: Gauge,
    /// Mean final population outside the computational subspace.
    pub leakage: f64,
    pub leakage_per_state: [f64; 4],
    /// ∫ g_XX dt of the effective model.
    pub theta: f64,
    pub g_max: f64,
    pub levels: usize,
    pub tol: f64,
}

impl SqrtIswapResult {
    pub fn unitary_matrix(&self) -> Matrix4<Complex64> {
        Matrix4::from_fn(|i, j| Complex64::new(self.unitary[i][j][0], self.unitary[i][j][1]))
    }
}

/// θ = ∫ η g(t)²/Δ² dt for the sine-quartic pulse.
pub fn effective_theta(params: &DeviceParams) -> Result<f64> {
    let c = dual_rail_eff_params(1.0, params.delta, params.eta, params.omega0)?;
    Ok(c.g_xx * PulseShape::sine_quartic(params.g_c, params.t_gate).integral_of_square())
}

/// Peak coupling for which |θ| = π/4 at the given gate time.
pub fn tuned_g_max(params: &DeviceParams) -> Result<f64> {
    let unit = DeviceParams { g_c: 1.0, ..*params };
    let per_g2 = effective_theta(&unit)?.abs();
    if per_g2 == 0.0 {
        return Err(invalid("coupling has no effect at these parameters"));
    }
    Ok((PI / 4.0 / per_g2).sqrt())
}

/// Evolve the four computational states through the pulse and extract the
/// codespace unitary, its gauge-minimized infidelity and the leakage.
pub fn sqrt_iswap_sim(params: &DeviceParams, levels: usize, tol: f64) -> Result<SqrtIswapResult> {
    let model = GateModel::new(params, levels)?;
    let finals: Vec<StateVector> = model.computational.par_iter().map(|psi| evolve(&model.hamiltonian, psi, params.t_gate, tol)).collect::<Result<_>>()?;
    let u = Matrix4::from_fn(|i, j| model.computational[i].iter().zip(&finals[j]).map(|(a, b)| a.conj() * b).sum::<Complex64>());
    let leakage_per_state: [f64; 4] = std::array::from_fn(|j| 1.0 - (0..4).map(|i| u[(i, j)].norm_sqr()).sum::<f64>());
    let (infidelity, gauge) = gauge_infidelity(&u)?;
    Ok(SqrtIswapResult {
        unitary: std::array::from_fn(|i| std::array::from_fn(|j| [u[(i, j)].re, u[(i, j)].im])),
        infidelity,
        gauge,
        leakage: leakage_per_state.iter().sum::<f64>() / 4.0,
        leakage_per_state,
        theta: effective_theta(params)?,
        g_max: params.g_c,
        levels,
        tol,
    })
}

/// Golden-section search for the peak coupling within `±span` (relative) of
/// `params.g_c` that minimizes the gauge infidelity.
pub fn calibrate_g_max(params: &DeviceParams, levels: usize, tol: f64, span: f64) -> Result<SqrtIswapResult> {
    if !(span > 0.0 && span < 1.0) {
        return Err(invalid("calibration span must lie in (0, 1)"));
    }
    let run = |g: f64| sqrt_iswap_sim(&DeviceParams { g_c: g, ..*params }, levels, tol);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (params.g_c * (1.0 - span), params.g_c * (1.0 + span));
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut rc, mut rd) = (run(c)?, run(d)?);
    while (b - a) > 1e-5 * params.g_c.abs() {
        if rc.infidelity < rd.infidelity {
            b = d;
            d = c;
            rd = rc;
            c = b - ratio * (b - a);
            rc = run(c)?;
        } else {
            a = c;
            c = d;
            rc = rd;
            d = a + ratio * (b - a);
            rd = run(d)?;
        }
    }
    Ok(if rc.infidelity < rd.infidelity { rc } else { rd })
}

/// Composition `√iSWAP X₁ √iSWAP` of the simulated gate after removing its
/// single-qubit Z gauge; any Z₁Z₂ rotation is left in place.
pub fn cx_composition_check(result: &SqrtIswapResult) -> f64 {
    let u = result.unitary_matrix();
    let g = result.gauge;
    let l = z_phases(-g.before[0], -g.before[1]);
    let r = z_phases(-g.after[0], -g.after[1]);
    let stripped = Matrix4::from_fn(|i, j| u[(i, j)] * l[i] * r[j]);
    cx_composition_infidelity(&stripped)
}

/// Populations of the computational states and everything else over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub labels: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>)>,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for (t, pops) in &self.rows {
            let mut rec = vec![format!("{t:e}")];
            rec.extend(pops.iter().map(|p| format!("{p:e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Trace of the gate starting from computational state `initial` (`2b + c`).
pub fn gate_trace(params: &DeviceParams, levels: usize, tol: f64, initial: usize, samples: usize) -> Result<Trace> {
    if initial > 3 || samples == 0 {
        return Err(invalid("initial state must be 0..=3 and samples positive"));
    }
    let model = GateModel::new(params, levels)?;
    let times: Vec<f64> = (1..=samples).map(|k| params.t_gate * k as f64 / samples as f64).collect();
    let mut rows = vec![(0.0, {
        let mut p = vec![0.0; 5];
        p[initial] = 1.0;
        p
    })];
    evolve_sampled(&model.hamiltonian, &model.computational[initial], &times, tol, |t, psi| {
        let mut p: Vec<f64> = model.computational.iter().map(|c| c.iter().zip(psi).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()).collect();
        let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        p.push(total - p.iter().sum::<f64>());
        rows.push((t, p));
    })?;
    Ok(Trace {
        labels: ["|00>", "|01>", "|10>", "|11>", "other"].iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

/// Probability of leaving the adiabatically continued state of
/// H = ½Δτᶻ + ½g(t)τˣ, starting in the upper state at g = 0, sampled at
/// `samples` evenly spaced times up to `t_final`.
pub fn two_level_diabatic_sim(delta: f64, g: impl Fn(f64) -> f64, t_final: f64, samples: usize, tol: f64) -> Result<Vec<(f64, f64)>> {
    if delta == 0.0 || !(t_final > 0.0) || samples == 0 {
        return Err(invalid("need nonzero detuning, positive duration and samples"));
    }
    let times: Vec<f64> = (1..=samples).map(|k| t_final * k as f64 / samples as f64).collect();
    let mut psi = vec![Complex64::from(1.0), Complex64::default()];
    let mut out = vec![(0.0, 0.0)];
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let gt = g(t);
        let h0 = y[0] * (delta / 2.0) + y[1] * (gt / 2.0);
        let h1 = y[0] * (gt / 2.0) - y[1] * (delta / 2.0);
        dy[0] = Complex64::new(h0.im, -h0.re);
        dy[1] = Complex64::new(h1.im, -h1.re);
    };
    Dopri5::new(tol).solve(rhs, 0.0, &mut psi, &times, |t, y| {
        let half = (g(t) / delta).atan() / 2.0;
        let amp = -y[0] * half.sin() + y[1] * half.cos();
        out.push((t, amp.norm_sqr()));
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device_physics::{diabatic_probability, ghz, mhz};

    #[test]
    fn pulse_endpoints_and_peak() {
        let p = PulseShape::sine_quartic(2.0, 110e-9);
        assert_eq!(p.value(0.0), 0.0);
        assert!(p.value(110e-9).abs() < 1e-12);
        assert!((p.value(55e-9) - 2.0).abs() < 1e-12);
        assert_eq!(p.value(-1e-9), 0.0);
        assert_eq!(p.value(120e-9), 0.0);
        let ramp = p.equivalent_ramp_time();
        assert!((ramp - 20e-9).abs() < 2e-9, "{ramp}");
    }

    fn two_modes() -> LadderHamiltonian {
        LadderHamiltonian::new(3, vec![1.0, 1.3], -0.2, &[(0, 1, 0.05)], None, vec![]).unwrap()
    }

    #[test]
    fn diagonal_eigenstate_picks_up_a_phase() {
        let h = LadderHamiltonian::new(3, vec![2.0, 0.5], -0.3, &[], None, vec![]).unwrap();
        let idx = h.index_of(&[2, 1]).unwrap();
        let mut psi = vec![Complex64::default(); h.dim()];
        psi[idx] = Complex64::from(1.0);
        let e = 2.0 * 2.0 + 0.5 + (-0.3);
        let out = evolve(&h, &psi, 3.0, 1e-12).unwrap();
        assert!((out[idx] - Complex64::new(0.0, -e * 3.0).exp()).norm() < 1e-9);
        for (k, z) in out.iter().enumerate() {
            if k != idx {
                assert_eq!(z.norm(), 0.0);
            }
        }
    }

    #[test]
    fn hamiltonian_is_symmetric_and_conserves_excitations() {
        let h = two_modes();
        let m = h.matrix_at(0.0);
        assert!((&m - m.transpose()).abs().max() == 0.0);
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                if m[(i, j)] != 0.0 {
                    assert_eq!(h.excitations(i), h.excitations(j));
                }
            }
        }
    }

    #[test]
    fn norm_is_conserved() {
        let h = two_modes();
        let mut psi = vec![Complex64::default(); h.dim()];
        psi[h.index_of(&[1, 0]).unwrap()] = Complex64::from(1.0);
        let tol = 1e-9;
        let times: Vec<f64> = (1..=50).map(|k| k as f64).collect();
        evolve_sampled(&h, &psi, &times, tol, |_, y| {
            let n: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 10.0 * tol, "{n}");
        })
        .unwrap();
        assert!(evolve(&h, &vec![Complex64::from(0.5); h.dim()], 1.0, 1e-9).is_err());
    }

    #[test]
    fn no_coupling_keeps_computational_populations() {
        let params = DeviceParams { g_c: 0.0, ..DeviceParams::fig3() };
        let model = GateModel::new(&params, 3).unwrap();
        for (k, psi) in model.computational.iter().enumerate() {
            let out = evolve(&model.hamiltonian, psi, params.t_gate, 1e-10).unwrap();
            let p: f64 = model.computational[k].iter().zip(&out).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr();
            assert!((p - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn gauge_fit_of_a_dressed_ideal_gate() {
        let g = Gauge {
            before: [0.3, -1.1],
            after: [0.7, 0.2],
            zz: 0.05,
        };
        let u = g.dress(&ideal_sqrt_iswap()) * Complex64::new(0.0, 1.0).exp();
        let (inf, _) = gauge_infidelity(&u).unwrap();
        assert!(inf < 1e-12, "{inf}");
    }

    #[test]
    fn composition_ignores_zz() {
        let ideal = ideal_sqrt_iswap();
        assert!(cx_composition_infidelity(&ideal) < 1e-12);
        let a = cx_composition_infidelity(&with_zz(&ideal, 0.1));
        assert!(a < 1e-12, "{a}");
    }

    #[test]
    fn theta_of_tuned_pulse() {
        let mut p = DeviceParams::fig3();
        p.g_c = tuned_g_max(&p).unwrap();
        assert!((effective_theta(&p).unwrap().abs() - PI / 4.0).abs() < 1e-9);
        // The leading-order coupling at 34 MHz reaches about three quarters of π/4.
        let theta = effective_theta(&DeviceParams::fig3()).unwrap().abs();
        assert!(theta > 0.7 * PI / 4.0 && theta < PI / 4.0, "{theta}");
    }

    #[test]
    fn zero_coupling_has_no_diabatic_transition() {
        let trace = two_level_diabatic_sim(ghz(0.5), |_| 0.0, 20e-9, 50, 1e-10).unwrap();
        assert!(trace.iter().all(|&(_, p)| p == 0.0));
    }

    #[test]
    fn diabatic_envelope_scales_as_inverse_fourth_power() {
        let envelope = |delta: f64| {
            let (g, tr) = (mhz(34.0), 20e-9);
            let trace = two_level_diabatic_sim(delta, |t| g * (t / tr).min(1.0), tr, 2000, 1e-11).unwrap();
            trace.iter().filter(|(t, _)| *t > 0.5 * tr).map(|x| x.1).fold(0.0, f64::max)
        };
        let ratio = envelope(ghz(0.5)) / envelope(ghz(1.0));
        assert!((ratio - 16.0).abs() < 0.1 * 16.0, "{ratio}");
    }

    #[test]
    fn diabatic_trace_matches_second_frame_formula() {
        let (g, delta, tr) = (mhz(34.0), ghz(0.5), 20e-9);
        let trace = two_level_diabatic_sim(delta, |t| g * t / tr, tr, 4000, 1e-11).unwrap();
        let scale = (g / (delta * delta * tr)).powi(2);
        for &(t, p) in trace.iter().step_by(40) {
            let cf = diabatic_probability(g, delta, tr, t).unwrap();
            assert!((p - cf).abs() < 0.05 * scale, "t={t} numeric={p} closed={cf}");
        }
    }
}
