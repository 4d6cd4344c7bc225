//! First and second moment propagation, Gaussian steady states and purity,
//! quasi-steady-state means, random-ensemble transients, relaxation times and
//! cat-state parity of decoupled damped modes.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{AssembledSystem, BoundaryCondition};
use crate::linalg::{self, c, CMat, C, I, ZERO};
use crate::modes::{ModeKind, NoetherMode};
use crate::nambu::{self, Pauli};

/// Relative Lyapunov residual accepted for a steady state.
pub const LYAPUNOV_TOL: f64 = 1e-10;

/// Mean ⟨Φ⟩ and second moment ⟨ΦΦ†⟩.
#[derive(Debug, Clone)]
pub struct MomentState {
    pub mean: Vec<C>,
    pub second: CMat,
}

impl MomentState {
    /// Vacuum of `modes` bosons: zero mean, 𝓑(Q) = 1/2.
    pub fn vacuum(modes: usize) -> Result<Self> {
        let n = 2 * modes;
        let t3 = nambu::pauli(Pauli::Tau3, n)?;
        let second = linalg::scale(&(&linalg::eye(n) + &t3), c(0.5, 0.0));
        Ok(Self { mean: vec![ZERO; n], second })
    }

    /// Symmetrized covariance 𝓑(⟨ΦΦ†⟩) − 𝓑(mm†).
    pub fn covariance(&self) -> Result<CMat> {
        let mm = linalg::outer(&self.mean, &self.mean);
        nambu::bosonic_project(&(&self.second - &mm))
    }
}

#[derive(Debug, Clone)]
pub struct GaussianSteadyState {
    /// 𝓑(Q_ss).
    pub covariance: CMat,
    /// Q_ss = 𝓑(Q_ss) + τ3/2.
    pub second: CMat,
    pub purity: f64,
    /// ‖A X + X A† + C‖_F / ‖C‖_F.
    pub residual: f64,
}

/// A = −iG and C = τ3𝓑(M)τ3 of the covariance equation Ẋ = AX + XA† + C.
fn covariance_generator(system: &AssembledSystem) -> Result<(CMat, CMat)> {
    let a = linalg::scale(&system.g, -I);
    let b = nambu::bosonic_project(&system.m)?;
    Ok((a, nambu::tau3_sandwich(&b)))
}

fn lyapunov_residual(a: &CMat, x: &CMat, q: &CMat) -> f64 {
    let r = &(&(a * x) + &(x * a.adjoint())) + q;
    linalg::fro(&r) / linalg::fro(q).max(f64::MIN_POSITIVE)
}

/// Largest real part of the rapidities σ(−iG).
pub fn spectral_abscissa(system: &AssembledSystem) -> Result<f64> {
    let ev = linalg::eigvals(&system.rapidity_matrix())?;
    Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// m(t) = e^{−iGt} m0 for every t in `t_grid`.
pub fn propagate_mean(system: &AssembledSystem, m0: &[C], t_grid: &[f64]) -> Result<Vec<Vec<C>>> {
    if m0.len() != system.dim() {
        return Err(Error::Dimension(format!("mean has length {}, expected {}", m0.len(), system.dim())));
    }
    let a = system.rapidity_matrix();
    t_grid
        .par_iter()
        .map(|&t| {
            let p = linalg::expm(&linalg::scale(&a, c(t, 0.0)))?;
            let m = linalg::matvec(&p, m0);
            if m.iter().any(|z| !z.is_finite()) {
                return Err(Error::Numerical(format!("mean overflows at t = {t}")));
            }
            Ok(m)
        })
        .collect()
}

/// Moments at time t. The covariance integral ∫₀ᵗ e^{As} C e^{A†s} ds comes
/// from a single block exponential, so unstable systems are handled for finite t.
pub fn propagate_moments(system: &AssembledSystem, state: &MomentState, t: f64) -> Result<MomentState> {
    let n = system.dim();
    let (a, q) = covariance_generator(system)?;
    let mut block = linalg::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = a[(i, j)] * t;
            block[(i, n + j)] = q[(i, j)] * t;
            block[(n + i, n + j)] = -a[(j, i)].conj() * t;
        }
    }
    let f = linalg::expm(&block)?;
    let f11 = Mat::from_fn(n, n, |i, j| f[(i, j)]);
    let f12 = Mat::from_fn(n, n, |i, j| f[(i, n + j)]);
    let integral = &f12 * f11.adjoint();
    let b0 = nambu::bosonic_project(&state.second)?;
    let b = &(&(&f11 * &b0) * f11.adjoint()) + &integral;
    let mean = linalg::matvec(&f11, &state.mean);
    let t3 = nambu::pauli(Pauli::Tau3, n)?;
    let second = &b + &linalg::scale(&t3, c(0.5, 0.0));
    if !linalg::is_finite(&second) {
        return Err(Error::Numerical(format!("moments overflow at t = {t}")));
    }
    Ok(MomentState { mean, second })
}

/// Unique Gaussian steady state of a dynamically stable system.
pub fn steady_covariance(system: &AssembledSystem) -> Result<GaussianSteadyState> {
    let gap = spectral_abscissa(system)?;
    if !(gap < 0.0) {
        return Err(Error::Precondition(format!(
            "no unique steady state: largest rapidity real part is {gap:.6e} >= 0"
        )));
    }
    let (a, q) = covariance_generator(system)?;
    let n = system.dim();
    let mut x = linalg::lyapunov(&a, &q)?;
    let mut residual = lyapunov_residual(&a, &x, &q);
    if residual > LYAPUNOV_TOL && n <= 80 {
        let alt = linalg::lyapunov_kron(&a, &q)?;
        let r = lyapunov_residual(&a, &alt, &q);
        if r < residual {
            x = alt;
            residual = r;
        }
    }
    if residual > LYAPUNOV_TOL {
        return Err(Error::Numerical(format!("Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_TOL:e}")));
    }
    let (hi, lo) = linalg::lyapunov_refined(&a, &q, x, 2)?;
    let hermitian = |m: &CMat| Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let (covariance, cov_lo) = (hermitian(&hi), hermitian(&lo));
    let r = linalg::lyapunov_residual_compensated(&a, &covariance, &cov_lo, &q);
    let residual = linalg::fro(&r) / linalg::fro(&q).max(f64::MIN_POSITIVE);
    let t3 = nambu::pauli(Pauli::Tau3, n)?;
    let second = &covariance + &linalg::scale(&t3, c(0.5, 0.0));
    let purity = purity_of_parts(&covariance, &cov_lo)?;
    Ok(GaussianSteadyState { covariance, second, purity, residual })
}

/// Quadrature covariance V_kl = ½⟨{r_k, r_l}⟩ − ⟨r_k⟩⟨r_l⟩ for
/// r = (x_1, p_1, x_2, p_2, …), from 𝓑(Q).
pub fn quadrature_covariance(cov: &CMat) -> Result<Mat<f64>> {
    quadrature_covariance_of_parts(cov, &linalg::zeros(cov.nrows(), cov.ncols()))
}

/// As [`quadrature_covariance`] for 𝓑(Q) = hi + lo. Each entry is a short
/// signed sum of covariance entries with weight ½, accumulated with
/// compensated arithmetic, so squeezed quadratures keep full relative accuracy.
pub fn quadrature_covariance_of_parts(hi: &CMat, lo: &CMat) -> Result<Mat<f64>> {
    let n = hi.nrows();
    if n % 2 != 0 || hi.ncols() != n || lo.nrows() != n || lo.ncols() != n {
        return Err(Error::Dimension(format!("covariance is {}x{}, expected even square", n, hi.ncols())));
    }
    // x = (a + a†)/√2, p = (−ia + ia†)/√2
    let row = |k: usize| -> [(usize, C); 2] {
        let j = 2 * (k / 2);
        if k % 2 == 0 {
            [(j, c(1.0, 0.0)), (j + 1, c(1.0, 0.0))]
        } else {
            [(j, c(0.0, -1.0)), (j + 1, c(0.0, 1.0))]
        }
    };
    let entry = |k: usize, l: usize| -> f64 {
        let mut acc = linalg::CompensatedSum::default();
        for (m, um) in row(k) {
            for (p, up) in row(l) {
                let w = um * up.conj();
                acc.add_prod(w, hi[(m, p)]);
                acc.add_prod(w, lo[(m, p)]);
            }
        }
        0.5 * acc.value().re
    };
    let v = Mat::from_fn(n, n, |k, l| entry(k, l));
    Ok(Mat::from_fn(n, n, |k, l| 0.5 * (v[(k, l)] + v[(l, k)])))
}

/// Symplectic eigenvalues of a positive-definite quadrature covariance,
/// ascending. With V = LLᵀ they are the positive eigenvalues of the Hermitian
/// matrix iLᵀΩL, which is similar to iΩV.
pub fn symplectic_eigenvalues(v: &Mat<f64>) -> Result<Vec<f64>> {
    let n = v.nrows();
    let llt = v
        .llt(faer::Side::Lower)
        .map_err(|_| Error::Validation("unphysical covariance: V is not positive definite".into()))?;
    let l = llt.L();
    let mut omega = Mat::<f64>::zeros(n, n);
    for j in 0..n / 2 {
        omega[(2 * j, 2 * j + 1)] = 1.0;
        omega[(2 * j + 1, 2 * j)] = -1.0;
    }
    let k = l.transpose() * &omega * l;
    let m = Mat::from_fn(n, n, |i, j| c(0.0, 0.5 * (k[(i, j)] - k[(j, i)])));
    let ev = linalg::eigvalsh(&m)?;
    Ok(ev[n / 2..].to_vec())
}

/// Π_k 1/(2ν_k) over the symplectic eigenvalues of the state with
/// symmetrized covariance 𝓑(Q).
pub fn purity(cov: &CMat) -> Result<f64> {
    purity_of_parts(cov, &linalg::zeros(cov.nrows(), cov.ncols()))
}

/// As [`purity`] for 𝓑(Q) = hi + lo.
pub fn purity_of_parts(hi: &CMat, lo: &CMat) -> Result<f64> {
    let v = quadrature_covariance_of_parts(hi, lo)?;
    let nu = symplectic_eigenvalues(&v)?;
    // symplectic eigenvalues carry absolute errors of order eps·cond(V)
    let lam = linalg::eigvalsh(&Mat::from_fn(v.nrows(), v.ncols(), |i, j| c(v[(i, j)], 0.0)))?;
    let cond = lam.last().copied().unwrap_or(1.0) / lam.first().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let tol = 1e-9 * nu.last().copied().unwrap_or(1.0).max(1.0) + 16.0 * f64::EPSILON * cond;
    if let Some(&low) = nu.first() {
        if low < 0.5 - tol {
            return Err(Error::Validation(format!("unphysical covariance: symplectic eigenvalue {low:.6e} < 1/2")));
        }
    }
    Ok((-nu.iter().map(|x| (2.0 * x).ln()).sum::<f64>()).exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasiSsMean {
    pub times: Vec<f64>,
    pub means: Vec<Vec<C>>,
    /// ‖m(t) − m(0)‖/‖m(0)‖ per time.
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
    /// Fitted ε and Ω of the envelope ε·t·e^{Ωt}; None with fewer than two
    /// nonzero samples.
    pub eps: Option<f64>,
    pub omega: Option<f64>,
}

/// Mean of the Weyl-displaced state generated by an SG: m(t) = iθ e^{−iGt}γs.
pub fn quasi_ss_mean(system: &AssembledSystem, sg: &NoetherMode, theta: f64, t_grid: &[f64]) -> Result<QuasiSsMean> {
    if sg.kind == ModeKind::ZM {
        return Err(Error::Precondition("quasi-steady states are generated by SG or non-split modes".into()));
    }
    let m0: Vec<C> = sg.vector.iter().map(|z| I * theta * z).collect();
    let means = propagate_mean(system, &m0, t_grid)?;
    let n0 = linalg::vnorm(&m0).max(f64::MIN_POSITIVE);
    let deviation: Vec<f64> = means
        .iter()
        .map(|m| linalg::vnorm(&m.iter().zip(&m0).map(|(a, b)| a - b).collect::<Vec<_>>()) / n0)
        .collect();
    let max_deviation = deviation.iter().copied().fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&deviation)
        .filter(|(&t, &d)| t > 0.0 && d > 0.0)
        .map(|(&t, &d)| (t, (d / t).ln()))
        .unzip();
    let (eps, omega) = if xs.len() >= 2 {
        let (slope, intercept) = linalg::linear_fit(&xs, &ys);
        (Some(intercept.exp()), Some(slope))
    } else {
        (None, None)
    };
    Ok(QuasiSsMean { times: t_grid.to_vec(), means, deviation, max_deviation, eps, omega })
}

#[derive(Debug, Clone, Serialize)]
pub struct Transient {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub seed: u64,
    pub n_samples: usize,
}

/// Ensemble of random initial means: each mode gets a unit complex normal
/// amplitude z with ⟨Φ⟩ = (z, z̄). Reports mean and standard deviation of
/// |⟨x_j⟩(t)| for the x quadrature of mode `mode`.
pub fn ensemble_transient(
    system: &AssembledSystem,
    mode: usize,
    n_samples: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<Transient> {
    if system.bc != BoundaryCondition::Obc {
        return Err(Error::Precondition("ensemble transients are defined for open chains".into()));
    }
    let modes = system.modes();
    if mode >= modes {
        return Err(Error::Dimension(format!("mode {mode} out of range for {modes} modes")));
    }
    if n_samples == 0 {
        return Err(Error::Parameter("n_samples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let samples: Vec<Vec<C>> = (0..n_samples)
        .map(|_| {
            let mut m = vec![ZERO; 2 * modes];
            for j in 0..modes {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let z = c(re * s, im * s);
                m[2 * j] = z;
                m[2 * j + 1] = z.conj();
            }
            m
        })
        .collect();
    let x = nambu::x_quadrature(modes, mode);
    let row = nambu::tau3_vec(&x).iter().map(|z| z.conj()).collect::<Vec<_>>();
    let a = system.rapidity_matrix();
    let stats: Vec<(f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let p = linalg::expm(&linalg::scale(&a, c(t, 0.0)))?;
            let w: Vec<C> = (0..p.ncols()).map(|k| (0..p.nrows()).map(|i| row[i] * p[(i, k)]).sum()).collect();
            let vals: Vec<f64> = samples.iter().map(|m| linalg::dot(&w.iter().map(|z| z.conj()).collect::<Vec<_>>(), m).norm()).collect();
            let mean = vals.iter().sum::<f64>() / n_samples as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_samples as f64;
            if !mean.is_finite() {
                return Err(Error::Numerical(format!("ensemble overflows at t = {t}")));
            }
            Ok((mean, var.sqrt()))
        })
        .collect::<Result<_>>()?;
    Ok(Transient {
        times: t_grid.to_vec(),
        mean: stats.iter().map(|s| s.0).collect(),
        std: stats.iter().map(|s| s.1).collect(),
        seed,
        n_samples,
    })
}

/// Coherent amplitudes α_μ = [ψ_μ, iθγs] = iθ ψ_μ†τ3γs of a quasi-steady
/// state in the normal-mode basis.
pub fn normal_mode_amplitudes(normal_modes: &[Vec<C>], sg: &[C], theta: f64) -> Vec<C> {
    normal_modes.iter().map(|psi| I * theta * nambu::tau3_form(psi, sg)).collect()
}

/// T(ρ(t), ρ_ss)/T(ρ(0), ρ_ss) for a coherent state with ‖α‖² = `alpha_norm_sq`
/// relaxing at rate κ to the vacuum.
pub fn relative_trace_distance(alpha_norm_sq: f64, kappa: f64, t: f64) -> f64 {
    let now = (-(-alpha_norm_sq * (-2.0 * kappa * t).exp()).exp_m1()).sqrt();
    let start = (-(-alpha_norm_sq).exp_m1()).sqrt();
    now / start
}

/// Time after which the relative trace distance to the steady state stays
/// below `accuracy`: 2κt = ln[‖α‖² / ln(1/(1 − δ²(1 − e^{−‖α‖²})))].
pub fn relaxation_time_pure(alpha_norm_sq: f64, accuracy: f64, kappa: f64) -> Result<f64> {
    if !(accuracy > 0.0 && accuracy < 1.0) {
        return Err(Error::Parameter(format!("accuracy must lie in (0, 1), got {accuracy}")));
    }
    if !(alpha_norm_sq > 0.0) || !(kappa > 0.0) {
        return Err(Error::Parameter("relaxation time needs ‖α‖² > 0 and κ > 0".into()));
    }
    let d2 = accuracy * accuracy;
    let inner = -(-d2 * (-(-alpha_norm_sq).exp_m1())).ln_1p();
    Ok((alpha_norm_sq / inner).ln() / (2.0 * kappa))
}

/// Parity of the cat state ∝ |α⟩ + e^{iφ}|−α⟩ of one mode damped at amplitude
/// rate κ. The multimode case depends on ‖α‖² only.
pub fn cat_parity(alpha_norm_sq: f64, phi: f64, kappa: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    if !(alpha_norm_sq >= 0.0) {
        return Err(Error::Parameter(format!("‖α‖² must be non-negative, got {alpha_norm_sq}")));
    }
    let a = alpha_norm_sq;
    let cp = phi.cos();
    let den = 1.0 + cp * (-2.0 * a).exp();
    if den.abs() < 1e-300 {
        return Err(Error::Parameter("cat state with ‖α‖ = 0 and φ = π does not exist".into()));
    }
    Ok(t_grid
        .iter()
        .map(|&t| {
            let e = (-2.0 * kappa * t).exp();
            ((-2.0 * a * e).exp() + cp * (-2.0 * a * (1.0 - e)).exp()) / den
        })
        .collect())
}
