use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Statistics of a Gaussian frequency-noise process δ(t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingNoiseSpec {
    /// ⟨δ²⟩ in (rad/s)².
    pub mean_sq_delta: f64,
    /// S_δ(0) in (rad/s)²·s.
    pub spectral_density_zero: f64,
    /// Correlation time τ_c, needed only for the long-time regime.
    pub correlation_time: Option<f64>,
}

impl DephasingNoiseSpec {
    pub fn new(mean_sq_delta: f64, spectral_density_zero: f64, correlation_time: Option<f64>) -> Result<Self> {
        let s = DephasingNoiseSpec {
            mean_sq_delta,
            spectral_density_zero,
            correlation_time,
        };
        s.validate()?;
        Ok(s)
    }

    /// Quasi-static noise of one transmon with Gaussian dephasing time
    /// `t_trans`, so that ⟨δ_j²⟩ = 2/T².
    pub fn transmon_quasi_static(t_trans: f64) -> Result<Self> {
        if !(t_trans > 0.0) {
            return Err(invalid("transmon dephasing time must be positive"));
        }
        Self::new(2.0 / (t_trans * t_trans), 0.0, None)
    }

    /// Noise on δ = δ₁ − δ₂ for independent δ₁ and δ₂.
    pub fn composite(a: &Self, b: &Self) -> Self {
        let correlation_time = match (a.correlation_time, b.correlation_time) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, y) => x.or(y),
        };
        DephasingNoiseSpec {
            mean_sq_delta: a.mean_sq_delta + b.mean_sq_delta,
            spectral_density_zero: a.spectral_density_zero + b.spectral_density_zero,
            correlation_time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.mean_sq_delta) || !ok(self.spectral_density_zero) || !self.correlation_time.is_none_or(ok) {
            return Err(invalid("noise statistics must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Dual rail, t ≪ τ_c.
    Short,
    /// Dual rail, t ≫ τ_c.
    Long,
    SingleTransmonShort,
    SingleTransmonLong,
}

/// Decoherence function W(t) of the dual-rail qubit, or of a single transmon
/// for comparison.
pub fn decoherence_w(t: f64, spec: &DephasingNoiseSpec, omega0: f64, regime: Regime) -> Result<f64> {
    spec.validate()?;
    if !(t >= 0.0) {
        return Err(invalid("time must be nonnegative"));
    }
    let dual_rail = matches!(regime, Regime::Short | Regime::Long);
    if dual_rail && omega0 == 0.0 {
        return Err(invalid("qubit splitting must be nonzero"));
    }
    Ok(match regime {
        Regime::Short => {
            let x = spec.mean_sq_delta * t / omega0;
            (1.0 + x * x).powf(-0.25)
        }
        Regime::Long => {
            let tau = spec.correlation_time.filter(|&c| c > 0.0).ok_or_else(|| invalid("long-time regime needs a positive correlation time"))?;
            let s = spec.spectral_density_zero;
            (-s * s * t / (4.0 * PI * omega0 * omega0 * tau)).exp()
        }
        Regime::SingleTransmonShort => (-spec.mean_sq_delta * t * t / 2.0).exp(),
        Regime::SingleTransmonLong => (-spec.spectral_density_zero * t / 2.0).exp(),
    })
}

/// Dephasing times of the dual-rail qubit and their ratio to the bare
/// transmon time. Vanishing noise gives `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TphiSummary {
    pub t_phi_short: f64,
    /// Present only when the spectrum has a correlation time.
    pub t_phi_long: Option<f64>,
    pub ratio_short: f64,
    pub ratio_long: Option<f64>,
}

pub fn tphi_summary(spec: &DephasingNoiseSpec, omega0: f64, t_trans: f64) -> Result<TphiSummary> {
    spec.validate()?;
    if !(t_trans > 0.0) {
        return Err(invalid("transmon dephasing time must be positive"));
    }
    let omega0 = omega0.abs();
    let t_phi_short = if spec.mean_sq_delta == 0.0 { f64::INFINITY } else { 2.0 * omega0 / spec.mean_sq_delta };
    let tau = spec.correlation_time;
    let t_phi_long = tau.map(|tau| {
        if spec.spectral_density_zero == 0.0 {
            f64::INFINITY
        } else {
            4.0 * PI * (omega0 / spec.spectral_density_zero).powi(2) * tau
        }
    });
    Ok(TphiSummary {
        t_phi_short,
        t_phi_long,
        ratio_short: omega0 * t_trans / 2.0,
        ratio_long: tau.map(|tau| 2.0 * PI * omega0 * omega0 * t_trans * tau),
    })
}

/// Effective two-qubit Hamiltonian of two capacitively coupled dual-rail
/// qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualRailCoupling {
    /// Dressed splitting Ω.
    pub omega: f64,
    /// ηg_c²/Δ², the default.
    pub g_xx: f64,
    /// The alternative closed form 4g_c²η/(Δ²−η²); `None` at the pole.
    pub g_xx_alt: Option<f64>,
    pub h_x1: f64,
    pub h_x2: f64,
    /// False when |Δ| ≤ 5|g_c|.
    pub perturbative: bool,
}

pub fn dual_rail_eff_params(g_c: f64, delta: f64, eta: f64, omega0: f64) -> Result<DualRailCoupling> {
    if delta == 0.0 {
        return Err(invalid("detuning must be nonzero"));
    }
    let r2 = (g_c / delta).powi(2);
    let h = |j: i32| -g_c * g_c / (2.0 * delta) * (1.0 + f64::from((-1i32).pow(j as u32)) * (omega0 / 2.0 - eta) / delta);
    let pole = delta * delta - eta * eta;
    Ok(DualRailCoupling {
        omega: omega0 * (1.0 + 6.0 * r2),
        g_xx: eta * r2,
        g_xx_alt: (pole.abs() > 1e-12 * delta * delta).then(|| 4.0 * g_c * g_c * eta / pole),
        h_x1: h(1),
        h_x2: h(2),
        perturbative: delta.abs() > 5.0 * g_c.abs(),
    })
}

/// Effective coupling of two spin-locked g-f qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GfCoupling {
    pub g_xx: f64,
    pub h_x1: f64,
    pub h_x2: f64,
    pub perturbative: bool,
}

pub fn gf_eff_params(g_c: f64, delta: f64, eta: f64) -> Result<GfCoupling> {
    let pole = delta * delta - eta * eta;
    if pole.abs() <= 1e-12 * (delta * delta).max(eta * eta) || (delta == 0.0 && eta == 0.0) {
        return Err(invalid("|Δ| = |η| is a resonance of the g-f coupling"));
    }
    let g2 = g_c * g_c;
    Ok(GfCoupling {
        g_xx: 4.0 * g2 * eta / pole,
        h_x1: 2.0 * g2 * (delta - 3.0 * eta) / pole,
        h_x2: -2.0 * g2 * (delta + 3.0 * eta) / pole,
        perturbative: delta.abs() > 5.0 * g_c.abs(),
    })
}

/// Leading-order dispersive shifts of a dual-rail qubit coupled to a
/// readout cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveShifts {
    pub chi0: f64,
    pub chi1: f64,
    pub chi_prime: f64,
    pub perturbative: bool,
}

pub fn dispersive_shifts(g_rt1: f64, g_rt2: f64, delta: f64, eta: f64) -> Result<DispersiveShifts> {
    if delta == 0.0 {
        return Err(invalid("detuning must be nonzero"));
    }
    let scale = eta / (delta * delta);
    let chi = (g_rt1 * g_rt1 + g_rt2 * g_rt2) * scale;
    Ok(DispersiveShifts {
        chi0: chi,
        chi1: chi,
        chi_prime: (g_rt1 * g_rt1 - g_rt2 * g_rt2) * scale,
        perturbative: delta.abs() > 5.0 * g_rt1.abs().max(g_rt2.abs()),
    })
}

/// Whether to add the symmetric-coupling fourth-order photon slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FourthOrder {
    Off,
    On { g_rt: f64, g_12: f64, delta: f64, eta: f64 },
}

/// −4ηg⁴/Δ⁴ − 4η²g²g₁₂/Δ⁴, the photon-number slope of Ω for symmetric
/// cavity couplings.
pub fn fourth_order_slope(g_rt: f64, g_12: f64, delta: f64, eta: f64) -> f64 {
    let d4 = delta.powi(4);
    -4.0 * eta * g_rt.powi(4) / d4 - 4.0 * eta * eta * g_rt * g_rt * g_12 / d4
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonDependence {
    pub omega: f64,
    /// dΩ/dn_c including every enabled term.
    pub slope: f64,
    /// Contribution of the χ terms alone.
    pub slope_dispersive: f64,
    /// Contribution of the fourth-order term alone (zero when off).
    pub slope_fourth_order: f64,
    /// |slope_dispersive| + |slope_fourth_order|, the magnitude estimate
    /// that treats the two mechanisms as independent.
    pub slope_magnitude_sum: f64,
}

pub fn qubit_freq_vs_photons(n_c: f64, omega0: f64, shifts: &DispersiveShifts, fourth_order: FourthOrder) -> Result<PhotonDependence> {
    if !(n_c >= 0.0) {
        return Err(invalid("photon number must be nonnegative"));
    }
    let a = omega0 + (shifts.chi1 - shifts.chi0) * n_c;
    let b = shifts.chi_prime * n_c;
    let root = (a * a + b * b).sqrt();
    let slope_dispersive = if root == 0.0 {
        0.0
    } else {
        (a * (shifts.chi1 - shifts.chi0) + b * shifts.chi_prime) / root
    };
    let slope_fourth_order = match fourth_order {
        FourthOrder::Off => 0.0,
        FourthOrder::On { g_rt, g_12, delta, eta } => {
            if delta == 0.0 {
                return Err(invalid("detuning must be nonzero"));
            }
            fourth_order_slope(g_rt, g_12, delta, eta)
        }
    };
    Ok(PhotonDependence {
        omega: root + slope_fourth_order * n_c,
        slope: slope_dispersive + slope_fourth_order,
        slope_dispersive,
        slope_fourth_order,
        slope_magnitude_sum: slope_dispersive.abs() + slope_fourth_order.abs(),
    })
}

/// Γ_φ = (2/κ)(∂Ω/∂n_c)² n̄_c.
pub fn measurement_dephasing_rate(kappa: f64, d_omega_dn: f64, n_bar: f64) -> Result<f64> {
    if kappa == 0.0 {
        return Err(invalid("cavity damping must be nonzero"));
    }
    Ok(2.0 * d_omega_dn * d_omega_dn * n_bar / kappa.abs())
}

/// The dephasing rate with κ read either as an angular frequency
/// (κ = 2π·`kappa_hz`) or as a plain rate (κ = `kappa_hz` s⁻¹).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDephasing {
    pub angular_kappa: f64,
    pub linear_kappa: f64,
}

pub fn measurement_dephasing_conventions(kappa_hz: f64, d_omega_dn: f64, n_bar: f64) -> Result<MeasurementDephasing> {
    Ok(MeasurementDephasing {
        angular_kappa: measurement_dephasing_rate(2.0 * PI * kappa_hz, d_omega_dn, n_bar)?,
        linear_kappa: measurement_dephasing_rate(kappa_hz, d_omega_dn, n_bar)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageEstimate {
    /// 2g_max²/(Δ⁴T_ramp²).
    pub p_leak: f64,
    /// Diabatic transition probability at the requested time.
    pub p_d: Option<f64>,
}

pub fn leakage_estimate(g_max: f64, delta: f64, t_ramp: f64, t: Option<f64>) -> Result<LeakageEstimate> {
    if delta == 0.0 || !(t_ramp > 0.0) {
        return Err(invalid("detuning must be nonzero and ramp time positive"));
    }
    let p_leak = 2.0 * (g_max / (delta * delta * t_ramp)).powi(2);
    let p_d = t.map(|t| diabatic_probability(g_max, delta, t_ramp, t)).transpose()?;
    Ok(LeakageEstimate { p_leak, p_d })
}

/// Probability of a diabatic transition out of the lower-coupled state of
/// H = ½Δτᶻ + ½g(t)τˣ at time `t` ∈ [0, T_ramp] of a linear ramp
/// g(t) = g_max t/T_ramp, from the second adiabatic frame.
pub fn diabatic_probability(g_max: f64, delta: f64, t_ramp: f64, t: f64) -> Result<f64> {
    if delta == 0.0 || !(t_ramp > 0.0) {
        return Err(invalid("detuning must be nonzero and ramp time positive"));
    }
    if !(0.0..=t_ramp * (1.0 + 1e-12)).contains(&t) {
        return Err(invalid("time must lie within the ramp"));
    }
    let rate = g_max / t_ramp;
    let g = |s: f64| rate * s;
    let eps = |s: f64| (delta * delta + g(s) * g(s)).sqrt();
    let theta_dot = |s: f64| rate * delta / (delta * delta + g(s) * g(s));
    let phi = |s: f64| (theta_dot(s) / eps(s)).atan();
    let nu = |s: f64| (eps(s).powi(2) + theta_dot(s).powi(2)).sqrt();
    let xi = simpson(nu, 0.0, t, 4096);
    let (p0, pt) = (phi(0.0), phi(t));
    Ok((xi / 2.0).cos().powi(2) * ((pt - p0) / 2.0).sin().powi(2) + (xi / 2.0).sin().powi(2) * ((pt + p0) / 2.0).sin().powi(2))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Spin-locking of a g-f qubit by a two-photon drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinLock {
    pub omega0: f64,
    /// Time-averaged population of |e⟩.
    pub p_e: f64,
    /// Time-averaged population of |h⟩.
    pub p_h: f64,
    /// False unless |ε_d| < |η|/5.
    pub perturbative: bool,
}

pub fn spinlock_params(eps_d: f64, eta: f64) -> Result<SpinLock> {
    if eta == 0.0 {
        return Err(invalid("anharmonicity must be nonzero"));
    }
    let r2 = (eps_d / eta).powi(2);
    Ok(SpinLock {
        omega0: 4.0 * 2f64.sqrt() * eps_d * eps_d / eta,
        p_e: 6.0 * r2,
        p_h: 4.0 * r2 / 3.0,
        perturbative: eps_d.abs() < eta.abs() / 5.0,
    })
}

/// Erasure and Pauli rates implied by gate, readout and coherence times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub e: f64,
    pub p: f64,
    /// T_meas/T_φ^meas alone.
    pub dephasing: f64,
}

pub fn error_budget(t_gate: f64, t_meas: f64, t1: f64, t_phi_meas: f64, q_minus: f64) -> Result<ErrorBudget> {
    if !(t_gate > 0.0 && t_meas > 0.0 && t1 > 0.0 && t_phi_meas > 0.0) {
        return Err(invalid("times must be positive"));
    }
    if !(0.0..=1.0).contains(&q_minus) {
        return Err(invalid("q_minus must lie in [0, 1]"));
    }
    let e = t_gate / t1 + t_meas / t1;
    let dephasing = t_meas / t_phi_meas;
    Ok(ErrorBudget { e, p: dephasing + e * q_minus, dephasing })
}
