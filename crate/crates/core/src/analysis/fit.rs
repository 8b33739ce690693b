use nalgebra::{SMatrix, SVector};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::PfailEstimate;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

type Mat5 = SMatrix<f64, 5, 5>;
type Vec5 = SVector<f64, 5>;

/// Which noise rate is swept while the other stays fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    P,
    E,
}

impl Axis {
    pub fn value(self, est: &PfailEstimate) -> f64 {
        match self {
            Axis::P => est.p,
            Axis::E => est.e,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(Axis::P),
            "e" => Ok(Axis::E),
            _ => Err(Error::InvalidParameter(format!("unknown axis `{s}`, expected p or e"))),
        }
    }
}

/// Finite-size scaling fit `p_fail = a x² + b x + c` with
/// `x = (v - threshold) d^mu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub threshold: f64,
    pub mu: f64,
    /// Parameter covariance in the order a, b, c, threshold, mu.
    pub covariance: Vec<Vec<f64>>,
    /// Weighted chi-square per degree of freedom.
    pub residual: f64,
}

impl ThresholdFit {
    pub fn threshold_stderr(&self) -> f64 {
        self.covariance[3][3].sqrt()
    }

    pub fn mu_stderr(&self) -> f64 {
        self.covariance[4][4].sqrt()
    }

    pub fn predict(&self, v: f64, d: usize) -> f64 {
        let x = (v - self.threshold) * (d as f64).powf(self.mu);
        self.a * x * x + self.b * x + self.c
    }
}

pub const MU_STARTS: [f64; 3] = [0.5, 1.0, 1.5];
pub const WINDOW: (f64, f64) = (0.2, 1.8);
const MIN_DISTANCES: usize = 3;
const MIN_POINTS: usize = 4;
const MAX_ITER: usize = 500;

#[derive(Clone, Copy, Debug)]
struct Point {
    v: f64,
    ln_d: f64,
    y: f64,
    w: f64,
}

fn points(data: &[PfailEstimate], axis: Axis) -> Vec<Point> {
    data.iter()
        .map(|est| {
            // Zero-failure points still carry information; give them the
            // error of a single failure.
            let floor = 1.0 / est.shots.max(1) as f64;
            let sigma = est.stderr.max(floor);
            Point {
                v: axis.value(est),
                ln_d: (est.d as f64).ln(),
                y: est.p_fail,
                w: 1.0 / (sigma * sigma),
            }
        })
        .collect()
}

fn check_coverage(data: &[PfailEstimate], axis: Axis) -> Result<()> {
    let mut ds: Vec<usize> = data.iter().map(|e| e.d).collect();
    ds.sort_unstable();
    ds.dedup();
    if ds.len() < MIN_DISTANCES {
        return Err(Error::FitFailed(format!("need at least {MIN_DISTANCES} distances, got {ds:?}")));
    }
    for d in ds {
        let mut vs: Vec<f64> = data.iter().filter(|e| e.d == d).map(|e| axis.value(e)).collect();
        vs.sort_by(f64::total_cmp);
        vs.dedup();
        if vs.len() < MIN_POINTS {
            return Err(Error::FitFailed(format!(
                "distance {d} has {} axis points in the window, need {MIN_POINTS}",
                vs.len()
            )));
        }
    }
    Ok(())
}

/// Axis value where the smallest and largest distance curves cross, by
/// linear interpolation between shared grid points. Falls back to the
/// median axis value.
pub fn crossing_guess(data: &[PfailEstimate], axis: Axis) -> f64 {
    let dmin = data.iter().map(|e| e.d).min().unwrap_or(0);
    let dmax = data.iter().map(|e| e.d).max().unwrap_or(0);
    let curve = |d: usize| {
        let mut c: Vec<(f64, f64)> = data.iter().filter(|e| e.d == d).map(|e| (axis.value(e), e.p_fail)).collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    };
    let small = curve(dmin);
    let large = curve(dmax);
    let diff: Vec<(f64, f64)> = small
        .iter()
        .filter_map(|&(v, y)| large.iter().find(|l| l.0 == v).map(|l| (v, l.1 - y)))
        .collect();
    for w in diff.windows(2) {
        let ((v0, g0), (v1, g1)) = (w[0], w[1]);
        if g0 < 0.0 && g1 >= 0.0 {
            return v0 + (v1 - v0) * (-g0) / (g1 - g0);
        }
    }
    let mut vs: Vec<f64> = data.iter().map(|e| axis.value(e)).collect();
    vs.sort_by(f64::total_cmp);
    vs[vs.len() / 2]
}

fn eval(theta: &Vec5, pt: &Point) -> (f64, Vec5) {
    let [a, b, c, t, mu] = [theta[0], theta[1], theta[2], theta[3], theta[4]];
    let scale = (mu * pt.ln_d).exp();
    let x = (pt.v - t) * scale;
    let f = a * x * x + b * x + c;
    let slope = 2.0 * a * x + b;
    (f, Vec5::new(x * x, x, 1.0, -slope * scale, slope * x * pt.ln_d))
}

fn chi2(theta: &Vec5, pts: &[Point]) -> f64 {
    pts.iter()
        .map(|p| {
            let r = p.y - eval(theta, p).0;
            p.w * r * r
        })
        .sum()
}

fn normal_equations(theta: &Vec5, pts: &[Point]) -> (Mat5, Vec5) {
    let mut jtj = Mat5::zeros();
    let mut jtr = Vec5::zeros();
    for p in pts {
        let (f, g) = eval(theta, p);
        jtj += g * g.transpose() * p.w;
        jtr += g * (p.w * (p.y - f));
    }
    (jtj, jtr)
}

/// Weighted linear fit of `a, b, c` with threshold and exponent fixed.
fn linear_init(t: f64, mu: f64, pts: &[Point]) -> Option<Vec5> {
    let mut m = SMatrix::<f64, 3, 3>::zeros();
    let mut rhs = SVector::<f64, 3>::zeros();
    for p in pts {
        let x = (p.v - t) * (mu * p.ln_d).exp();
        let g = SVector::<f64, 3>::new(x * x, x, 1.0);
        m += g * g.transpose() * p.w;
        rhs += g * (p.w * p.y);
    }
    let abc = m.lu().solve(&rhs)?;
    Some(Vec5::new(abc[0], abc[1], abc[2], t, mu))
}

fn levenberg_marquardt(mut theta: Vec5, pts: &[Point]) -> Result<(Vec5, f64)> {
    let mut cost = chi2(&theta, pts);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        let (jtj, jtr) = normal_equations(&theta, pts);
        let mut damped = jtj;
        for i in 0..5 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
            lambda *= 10.0;
            if lambda > 1e16 {
                return Err(Error::FitFailed(format!("singular normal equations at {theta:?}")));
            }
            continue;
        };
        let trial = theta + step;
        let trial_cost = chi2(&trial, pts);
        if trial_cost.is_finite() && trial_cost <= cost {
            let converged = step.iter().zip(theta.iter()).all(|(s, t)| s.abs() <= 1e-13 * (t.abs() + 1e-13))
                || cost - trial_cost <= 1e-15 * cost.max(1e-300);
            theta = trial;
            cost = trial_cost;
            lambda = (lambda * 0.3).max(1e-12);
            if converged {
                return Ok((theta, cost));
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                return Ok((theta, cost));
            }
        }
    }
    Ok((theta, cost))
}

fn fit_points(pts: &[Point], guess: f64) -> Result<ThresholdFit> {
    let mut best: Option<(Vec5, f64)> = None;
    let mut last_err = None;
    for mu in MU_STARTS {
        let Some(init) = linear_init(guess, mu, pts) else {
            last_err = Some(Error::FitFailed(format!("singular linear initializer at mu={mu}")));
            continue;
        };
        match levenberg_marquardt(init, pts) {
            Ok((theta, cost)) if best.as_ref().is_none_or(|b| cost < b.1) => best = Some((theta, cost)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let Some((theta, cost)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::FitFailed("no start converged".into())));
    };
    let (jtj, _) = normal_equations(&theta, pts);
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::FitFailed(format!("singular Jacobian at the optimum {theta:?}")))?;
    let dof = pts.len().saturating_sub(5).max(1);
    Ok(ThresholdFit {
        a: theta[0],
        b: theta[1],
        c: theta[2],
        threshold: theta[3],
        mu: theta[4],
        covariance: (0..5).map(|i| (0..5).map(|j| cov[(i, j)]).collect()).collect(),
        residual: cost / dof as f64,
    })
}

fn window(data: &[PfailEstimate], axis: Axis, center: f64) -> Vec<PfailEstimate> {
    let (lo, hi) = (WINDOW.0 * center, WINDOW.1 * center);
    data.iter()
        .filter(|e| {
            let v = axis.value(e);
            v >= lo && v <= hi
        })
        .cloned()
        .collect()
}

/// Fit the scaling ansatz to estimates at several distances. Points outside
/// 0.2 to 1.8 times the threshold guess are dropped, and the window is
/// recentred once on the preliminary fit.
pub fn fit_threshold(data: &[PfailEstimate], axis: Axis) -> Result<ThresholdFit> {
    if data.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let guess = crossing_guess(data, axis);
    let first = window(data, axis, guess);
    check_coverage(&first, axis)?;
    let prelim = fit_points(&points(&first, axis), guess)?;
    if !(prelim.threshold > 0.0) {
        return Err(Error::FitFailed(format!("preliminary threshold {} is not positive", prelim.threshold)));
    }
    let second = window(data, axis, prelim.threshold);
    check_coverage(&second, axis)?;
    fit_points(&points(&second, axis), prelim.threshold)
}

/// Spread of the refitted threshold and exponent over parametric bootstrap
/// replicas drawn from `Binomial(shots, p_fail)` at every point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicas: usize,
    pub failed: usize,
    pub threshold_mean: f64,
    pub threshold_std: f64,
    pub mu_mean: f64,
    pub mu_std: f64,
}

pub fn bootstrap_threshold(data: &[PfailEstimate], axis: Axis, replicas: usize, seed: u64) -> Result<BootstrapSummary> {
    let mut ts = Vec::with_capacity(replicas);
    let mut mus = Vec::with_capacity(replicas);
    let mut failed = 0;
    for r in 0..replicas {
        let mut rng = stream(seed, Domain::Bootstrap, r as u64, 0);
        let resampled: Vec<PfailEstimate> = data
            .iter()
            .map(|est| {
                let mut e = est.clone();
                let p = est.p_fail.clamp(0.0, 1.0);
                e.failures = Binomial::new(est.shots, p).map(|b| b.sample(&mut rng)).unwrap_or(est.failures);
                e.p_fail = e.failures as f64 / e.shots as f64;
                // Keep the clustered error ratio of the original point.
                let binom = (est.p_fail * (1.0 - est.p_fail) / est.shots as f64).sqrt();
                let ratio = if binom > 0.0 { est.stderr / binom } else { 1.0 };
                e.stderr = ratio * (e.p_fail * (1.0 - e.p_fail) / e.shots as f64).sqrt();
                e
            })
            .collect();
        match fit_threshold(&resampled, axis) {
            Ok(f) => {
                ts.push(f.threshold);
                mus.push(f.mu);
            }
            Err(_) => failed += 1,
        }
    }
    if ts.len() < 2 {
        return Err(Error::FitFailed(format!("only {} of {replicas} bootstrap fits succeeded", ts.len())));
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, var.sqrt())
    };
    let (tm, tsd) = stats(&ts);
    let (mm, msd) = stats(&mus);
    Ok(BootstrapSummary {
        replicas,
        failed,
        threshold_mean: tm,
        threshold_std: tsd,
        mu_mean: mm,
        mu_std: msd,
    })
}
