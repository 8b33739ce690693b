use nalgebra::{Matrix3, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gate_evolve::ode::Dopri5;

/// Density matrix over `{g, e, f}` of one transmon.
pub type DensityMatrix3 = Matrix3<Complex64>;
/// Density matrix over `{gg, ge, eg, ee}` of a transmon pair.
pub type DensityMatrix4 = Matrix4<Complex64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErasureKind {
    DualRail,
    Gf,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DensityMatrix {
    DualRail(DensityMatrix4),
    Gf(DensityMatrix3),
}

const TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn kind(&self) -> ErasureKind {
        match self {
            DensityMatrix::DualRail(_) => ErasureKind::DualRail,
            DensityMatrix::Gf(_) => ErasureKind::Gf,
        }
    }

    /// Check Hermiticity, unit trace and positivity within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        match self {
            DensityMatrix::DualRail(m) => check_state(m.as_slice(), 4, m.symmetric_eigenvalues().as_slice(), tol),
            DensityMatrix::Gf(m) => check_state(m.as_slice(), 3, m.symmetric_eigenvalues().as_slice(), tol),
        }
    }

    /// Population and coherences outside the qubit subspace.
    fn leaves_codespace(&self, tol: f64) -> bool {
        let (data, n, outside): (&[Complex64], usize, &[usize]) = match self {
            DensityMatrix::DualRail(m) => (m.as_slice(), 4, &[0, 3]),
            DensityMatrix::Gf(m) => (m.as_slice(), 3, &[1]),
        };
        (0..n).any(|i| outside.iter().any(|&o| data[i + o * n].norm() > tol || data[o + i * n].norm() > tol))
    }
}

fn check_state(data: &[Complex64], n: usize, eigenvalues: &[f64], tol: f64) -> Result<()> {
    for i in 0..n {
        for j in 0..n {
            if (data[i + j * n] - data[j + i * n].conj()).norm() > tol {
                return Err(invalid("density matrix is not Hermitian"));
            }
        }
    }
    let trace: Complex64 = (0..n).map(|i| data[i + i * n]).sum();
    if (trace - 1.0).norm() > tol {
        return Err(invalid(format!("density matrix trace is {trace}")));
    }
    if eigenvalues.iter().any(|&l| l < -tol) {
        return Err(invalid("density matrix is not positive semidefinite"));
    }
    Ok(())
}

/// Heralded erasure channel: `(1−γ)ρ + γ|gg⟩⟨gg|` for the dual rail,
/// `(1−γ)ρ + γ|e⟩⟨e|` for the g-f qubit. The input must lie in the qubit
/// subspace.
pub fn erasure_channel_apply(rho: &DensityMatrix, gamma: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid("erasure probability must lie in [0, 1]"));
    }
    rho.validate(TOL)?;
    if rho.leaves_codespace(TOL) {
        return Err(invalid("state has support outside the qubit subspace"));
    }
    let keep = Complex64::from(1.0 - gamma);
    Ok(match rho {
        DensityMatrix::DualRail(m) => {
            let mut out = m * keep;
            out[(0, 0)] += gamma;
            DensityMatrix::DualRail(out)
        }
        DensityMatrix::Gf(m) => {
            let mut out = m * keep;
            out[(1, 1)] += gamma;
            DensityMatrix::Gf(out)
        }
    })
}

fn drive(omega0: f64) -> DensityMatrix3 {
    let mut h = DensityMatrix3::zeros();
    h[(0, 2)] = Complex64::from(omega0 / 2.0);
    h[(2, 0)] = Complex64::from(omega0 / 2.0);
    h
}

/// Transform a state from the frame of the bare transmon to the frame that
/// also rotates with the spin-locking drive, at time `t`.
pub fn spin_lock_frame(rho: &DensityMatrix3, omega0: f64, t: f64) -> DensityMatrix3 {
    let (s, c) = (omega0 * t / 2.0).sin_cos();
    let mut u = DensityMatrix3::zeros();
    u[(0, 0)] = Complex64::from(c);
    u[(2, 2)] = Complex64::from(c);
    u[(1, 1)] = Complex64::from(1.0);
    u[(0, 2)] = Complex64::new(0.0, -s);
    u[(2, 0)] = Complex64::new(0.0, -s);
    u.adjoint() * rho * u
}

/// Integrate the spin-locked master equation
/// `dρ/dt = −i(Ω₀/2)[|g⟩⟨f| + |f⟩⟨g|, ρ] + Γ₁𝒟[a]ρ` over `dt`. The trace is
/// checked at 64 intermediate times.
pub fn lindblad_gf_oracle(omega0: f64, gamma1: f64, dt: f64, rho0: &DensityMatrix3) -> Result<DensityMatrix3> {
    if !(gamma1 >= 0.0 && dt >= 0.0) {
        return Err(invalid("decay rate and duration must be nonnegative"));
    }
    DensityMatrix::Gf(*rho0).validate(TOL)?;
    let h = drive(omega0);
    let mut a = DensityMatrix3::zeros();
    a[(0, 1)] = Complex64::from(1.0);
    a[(1, 2)] = Complex64::from(2f64.sqrt());
    let ad = a.adjoint();
    let ada = ad * a;
    let i = Complex64::i();

    let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let r = DensityMatrix3::from_column_slice(y);
        let d = (h * r - r * h) * (-i) + (a * r * ad - (ada * r + r * ada) * Complex64::from(0.5)) * Complex64::from(gamma1);
        dy.copy_from_slice(d.as_slice());
    };
    let mut y: Vec<Complex64> = rho0.as_slice().to_vec();
    let stops: Vec<f64> = (1..=64).map(|k| dt * k as f64 / 64.0).collect();
    let mut drift: Option<(f64, f64)> = None;
    Dopri5::new(1e-13).solve(rhs, 0.0, &mut y, &stops, |t, y| {
        let tr: Complex64 = y[0] + y[4] + y[8];
        let err = (tr - 1.0).norm();
        if err > TOL && drift.is_none() {
            drift = Some((t, err));
        }
    })?;
    if let Some((time, err)) = drift {
        return Err(Error::Integration {
            time,
            reason: format!("trace drifted by {err:e}"),
        });
    }
    Ok(DensityMatrix3::from_column_slice(&y))
}
