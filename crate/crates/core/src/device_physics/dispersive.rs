use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dressed energies of one photon-number manifold, in a frame where the
/// cavity sits at zero frequency and both transmons at Δ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveLevels {
    pub n_c: usize,
    /// |1_a, 0_b, n_c⟩, continued from (|10⟩ + |01⟩)/√2 ⊗ |n_c⟩.
    pub e10: f64,
    /// |0_a, 1_b, n_c⟩, continued from (|10⟩ − |01⟩)/√2 ⊗ |n_c⟩.
    pub e01: f64,
    /// |0_a, 0_b, n_c⟩.
    pub e00: f64,
    /// Ω(n_c) = e10 − e01.
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveTable {
    pub levels: usize,
    pub rows: Vec<DispersiveLevels>,
}

impl DispersiveTable {
    /// Ω(n_c) − Ω(0) divided by n_c, the mean photon slope up to `n_c`.
    pub fn mean_slope(&self, n_c: usize) -> Option<f64> {
        let first = self.rows.first()?;
        let row = self.rows.iter().find(|r| r.n_c == n_c && n_c > 0)?;
        Some((row.omega - first.omega) / n_c as f64)
    }

    /// Shift per photon of the qubit-averaged energy relative to the empty
    /// qubit, which the dispersive χ describes.
    pub fn mean_chi(&self, n_c: usize) -> Option<f64> {
        let first = self.rows.first()?;
        let row = self.rows.iter().find(|r| r.n_c == n_c && n_c > 0)?;
        let level = |r: &DispersiveLevels| (r.e10 + r.e01) / 2.0 - r.e00;
        Some((level(row) - level(first)) / n_c as f64)
    }
}

struct Sector {
    states: Vec<(usize, usize, usize)>,
}

impl Sector {
    fn new(excitations: usize, levels: usize) -> Self {
        let mut states = Vec::new();
        for i in 0..levels.min(excitations + 1) {
            for j in 0..levels.min(excitations + 1 - i) {
                states.push((i, j, excitations - i - j));
            }
        }
        Sector { states }
    }

    fn index(&self, s: (usize, usize, usize)) -> Option<usize> {
        self.states.iter().position(|&t| t == s)
    }

    fn hamiltonian(&self, g1: f64, g2: f64, g12: f64, delta: f64, eta: f64) -> DMatrix<f64> {
        let n = self.states.len();
        let mut h = DMatrix::zeros(n, n);
        for (a, &(i, j, k)) in self.states.iter().enumerate() {
            let (fi, fj) = (i as f64, j as f64);
            h[(a, a)] = delta * (fi + fj) + eta / 2.0 * (fi * (fi - 1.0) + fj * (fj - 1.0));
            let mut link = |to: (usize, usize, usize), amp: f64| {
                if let Some(b) = self.index(to) {
                    h[(a, b)] += amp;
                    h[(b, a)] += amp;
                }
            };
            if i > 0 {
                link((i - 1, j + 1, k), g12 * (fi * (fj + 1.0)).sqrt());
                link((i - 1, j, k + 1), g1 * (fi * (k as f64 + 1.0)).sqrt());
            }
            if j > 0 {
                link((i, j - 1, k + 1), g2 * (fj * (k as f64 + 1.0)).sqrt());
            }
        }
        h
    }
}

const CONTINUATION_STEPS: usize = 24;

/// Follow the eigenvector that starts as `start` at zero cavity coupling
/// while the coupling is raised to its final value.
fn continued_energy(sector: &Sector, start: DVector<f64>, g1: f64, g2: f64, g12: f64, delta: f64, eta: f64) -> Result<f64> {
    let mut tracked = start;
    let mut energy = f64::NAN;
    for step in 0..=CONTINUATION_STEPS {
        let s = step as f64 / CONTINUATION_STEPS as f64;
        let eig = SymmetricEigen::new(sector.hamiltonian(s * g1, s * g2, g12, delta, eta));
        let mut overlaps: Vec<(f64, usize)> = (0..eig.eigenvalues.len()).map(|c| (eig.eigenvectors.column(c).dot(&tracked).powi(2), c)).collect();
        overlaps.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (best, col) = overlaps[0];
        let runner_up = overlaps.get(1).map_or(0.0, |o| o.0);
        if best < 0.9 || runner_up > 0.1 {
            return Err(Error::LevelIdentification(format!("overlap {best:.3} vs {runner_up:.3} at coupling fraction {s:.3}")));
        }
        let mut v = eig.eigenvectors.column(col).into_owned();
        if v.dot(&tracked) < 0.0 {
            v = -v;
        }
        tracked = v;
        energy = eig.eigenvalues[col];
    }
    Ok(energy)
}

/// Exact diagonalization of two Kerr transmons (`levels` each) coupled to
/// each other and to a readout cavity, for every photon number up to
/// `n_c_max`. Total excitation number is conserved, so each manifold is a
/// small block and the cavity needs no truncation.
pub fn dispersive_numeric_oracle(g_rt1: f64, g_rt2: f64, g_12: f64, delta: f64, eta: f64, n_c_max: usize, levels: usize) -> Result<DispersiveTable> {
    if levels < 4 {
        return Err(invalid("need at least 4 levels per transmon"));
    }
    if delta == 0.0 {
        return Err(invalid("detuning must be nonzero"));
    }
    let rows = (0..=n_c_max)
        .into_par_iter()
        .map(|n| -> Result<DispersiveLevels> {
            let single = Sector::new(n + 1, levels);
            let empty = Sector::new(n, levels);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let start = |sign: f64| {
                let mut v = DVector::zeros(single.states.len());
                v[single.index((1, 0, n)).expect("state in sector")] = h;
                v[single.index((0, 1, n)).expect("state in sector")] = sign * h;
                v
            };
            let e10 = continued_energy(&single, start(1.0), g_rt1, g_rt2, g_12, delta, eta)?;
            let e01 = continued_energy(&single, start(-1.0), g_rt1, g_rt2, g_12, delta, eta)?;
            let mut vac = DVector::zeros(empty.states.len());
            vac[empty.index((0, 0, n)).expect("state in sector")] = 1.0;
            let e00 = continued_energy(&empty, vac, g_rt1, g_rt2, g_12, delta, eta)?;
            Ok(DispersiveLevels {
                n_c: n,
                e10,
                e01,
                e00,
                omega: e10 - e01,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DispersiveTable { levels, rows })
}
