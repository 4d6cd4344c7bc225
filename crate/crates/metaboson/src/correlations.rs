//! Two-time correlation functions of linear forms in the steady state and
//! their state-independent commutator part, the susceptibility matrix, power
//! spectra, and number-symmetry signatures.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, GaussianSteadyState};
use crate::error::{Error, Result};
use crate::lattice::AssembledSystem;
use crate::linalg::{self, c, CMat, C, I};
use crate::nambu::{self, Pauli};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorrelationKind {
    SteadyState,
    Quantum,
}

/// C_{α,β†}(τ) for A = α†τ3Φ and B = Φ†τ3β.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationSeries {
    pub tau_grid: Vec<f64>,
    pub values: Vec<C>,
    pub kind: CorrelationKind,
}

impl CorrelationSeries {
    /// Values divided by the τ = 0 value.
    pub fn normalized(&self, at_zero: C) -> Vec<C> {
        self.values.iter().map(|v| v / at_zero).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSeries {
    pub omega_grid: Vec<f64>,
    /// NaN at flagged samples.
    pub values: Vec<C>,
    pub normalized: bool,
    /// Indices where ω − G was numerically singular.
    pub flagged: Vec<usize>,
    pub kind: CorrelationKind,
}

fn check_len(system: &AssembledSystem, v: &[C], name: &str) -> Result<()> {
    if v.len() != system.dim() {
        return Err(Error::Dimension(format!("{name} has length {}, expected {}", v.len(), system.dim())));
    }
    Ok(())
}

fn row(alpha: &[C], left: &CMat) -> Vec<C> {
    // α†τ3 · left
    let at: Vec<C> = nambu::tau3_vec(alpha).iter().map(|z| z.conj()).collect();
    (0..left.ncols()).map(|j| (0..left.nrows()).map(|i| at[i] * left[(i, j)]).sum()).collect()
}

fn bilinear(u_row: &[C], m: &CMat, v: &[C]) -> C {
    let mv = linalg::matvec(m, v);
    u_row.iter().zip(&mv).map(|(a, b)| a * b).sum()
}

/// Steady-state correlation with a precomputed steady state.
pub fn steady_correlation_with(
    system: &AssembledSystem,
    ss: &GaussianSteadyState,
    alpha: &[C],
    beta: &[C],
    tau_grid: &[f64],
) -> Result<CorrelationSeries> {
    check_len(system, alpha, "α")?;
    check_len(system, beta, "β")?;
    let n = system.dim();
    let t3 = nambu::pauli(Pauli::Tau3, n)?;
    let a = system.rapidity_matrix();
    let a_row = row(alpha, &linalg::eye(n));
    let t3b = linalg::matvec(&t3, beta);
    let values = tau_grid
        .par_iter()
        .map(|&tau| {
            let v = if tau >= 0.0 {
                let p = linalg::expm(&linalg::scale(&a, c(tau, 0.0)))?;
                bilinear(&a_row, &(&p * &ss.second), &t3b)
            } else {
                // e^{iG†|τ|} = (e^{−iG|τ|})†
                let p = linalg::expm(&linalg::scale(&a, c(-tau, 0.0)))?;
                bilinear(&a_row, &(&ss.second * p.adjoint()), &t3b)
            };
            Ok(v)
        })
        .collect::<Result<Vec<C>>>()?;
    Ok(CorrelationSeries { tau_grid: tau_grid.to_vec(), values, kind: CorrelationKind::SteadyState })
}

/// C^ss(τ) = α†τ3 e^{−iGτ} Q_ss τ3β for τ ≥ 0 and α†τ3 Q_ss e^{iG†|τ|} τ3β for τ < 0.
pub fn steady_correlation(system: &AssembledSystem, alpha: &[C], beta: &[C], tau_grid: &[f64]) -> Result<CorrelationSeries> {
    let ss = dynamics::steady_covariance(system)?;
    steady_correlation_with(system, &ss, alpha, beta, tau_grid)
}

/// C^qu(τ) = ½α†τ3 e^{−iGτ}β for τ ≥ 0 and ½α† e^{iG†|τ|}τ3β for τ < 0.
pub fn quantum_correlation(system: &AssembledSystem, alpha: &[C], beta: &[C], tau_grid: &[f64]) -> Result<CorrelationSeries> {
    check_len(system, alpha, "α")?;
    check_len(system, beta, "β")?;
    let n = system.dim();
    let t3 = nambu::pauli(Pauli::Tau3, n)?;
    let a = system.rapidity_matrix();
    let a_row = row(alpha, &linalg::eye(n));
    let a_plain: Vec<C> = alpha.iter().map(|z| z.conj()).collect();
    let t3b = linalg::matvec(&t3, beta);
    let values = tau_grid
        .par_iter()
        .map(|&tau| {
            let p = linalg::expm(&linalg::scale(&a, c(tau.abs(), 0.0)))?;
            let v = if tau >= 0.0 { bilinear(&a_row, &p, beta) } else { bilinear(&a_plain, &p.adjoint().to_owned(), &t3b) };
            Ok(v * 0.5)
        })
        .collect::<Result<Vec<C>>>()?;
    Ok(CorrelationSeries { tau_grid: tau_grid.to_vec(), values, kind: CorrelationKind::Quantum })
}

/// ½α†τ3β, the commutator part at τ = 0.
pub fn quantum_correlation_at_zero(alpha: &[C], beta: &[C]) -> C {
    nambu::tau3_form(alpha, beta) * 0.5
}

/// Relative smallest singular value of ω − G below which a shift is singular.
pub const SINGULAR_SHIFT_TOL: f64 = 1e-13;

/// χ(ω) = i(ω − G)⁻¹ and its spectral norm.
pub fn susceptibility(system: &AssembledSystem, omega: f64) -> Result<(CMat, f64)> {
    let shifted = linalg::shift(&linalg::scale(&system.g, c(-1.0, 0.0)), c(omega, 0.0));
    let s = linalg::singular_values(&shifted)?;
    let smin = s[0];
    let smax = s[s.len() - 1].max(f64::MIN_POSITIVE);
    if smin <= SINGULAR_SHIFT_TOL * smax {
        return Err(Error::Precondition(format!("singular shift: iω with ω = {omega} is a rapidity")));
    }
    let chi = linalg::scale(&linalg::inverse(&shifted)?, I);
    Ok((chi, 1.0 / smin))
}

/// Power spectra S(ω) = ∫ e^{iωτ} C(τ) dτ in closed form:
/// S^ss = α†τ3[χQ_ss + Q_ssχ†]τ3β, S^qu = ½α†(τ3χ + χ†τ3)β.
pub fn power_spectra(
    system: &AssembledSystem,
    alpha: &[C],
    beta: &[C],
    omega_grid: &[f64],
    kind: CorrelationKind,
    normalized: bool,
) -> Result<SpectrumSeries> {
    check_len(system, alpha, "α")?;
    check_len(system, beta, "β")?;
    let n = system.dim();
    let t3 = nambu::pauli(Pauli::Tau3, n)?;
    let ss = match kind {
        CorrelationKind::SteadyState => Some(dynamics::steady_covariance(system)?),
        CorrelationKind::Quantum => None,
    };
    let a_row = row(alpha, &linalg::eye(n));
    let a_plain: Vec<C> = alpha.iter().map(|z| z.conj()).collect();
    let t3b = linalg::matvec(&t3, beta);
    let samples: Vec<Option<C>> = omega_grid
        .par_iter()
        .map(|&w| match susceptibility(system, w) {
            Ok((chi, _)) => {
                let v = match &ss {
                    Some(ss) => {
                        let m = &(&chi * &ss.second) + &(&ss.second * chi.adjoint());
                        bilinear(&a_row, &m, &t3b)
                    }
                    None => (bilinear(&a_row, &chi, beta) + bilinear(&a_plain, &chi.adjoint().to_owned(), &t3b)) * 0.5,
                };
                Ok(Some(v))
            }
            Err(Error::Precondition(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let scale = if normalized {
        let c0 = match &ss {
            Some(ss) => bilinear(&a_row, &ss.second, &t3b),
            None => quantum_correlation_at_zero(alpha, beta),
        };
        if c0.norm() == 0.0 {
            return Err(Error::Precondition("normalized spectrum needs C(0) ≠ 0".into()));
        }
        c0
    } else {
        c(1.0, 0.0)
    };
    let flagged = samples.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect();
    let values = samples.iter().map(|v| v.map(|z| z / scale).unwrap_or(c(f64::NAN, f64::NAN))).collect();
    Ok(SpectrumSeries { omega_grid: omega_grid.to_vec(), values, normalized, flagged, kind })
}

#[derive(Debug, Clone, Serialize)]
pub struct NumberSymmetryReport {
    /// max over i, j, τ of |C^qu_{a_i, a_j}(τ)|.
    pub max_offdiagonal: f64,
    pub worst_pair: (usize, usize),
    /// max over i, j, τ of |C^qu_{x_j,p_i}(τ) − C^qu_{x_i,p_j}(−τ)|.
    pub quadrature_defect: f64,
    pub ok: bool,
}

/// Tolerance for [G, τ3] = 0 and for the reported signatures.
pub const NUMBER_SYMMETRY_TOL: f64 = 1e-12;

/// Vanishing anomalous commutators ⟨[a_i(τ), a_j]⟩ and the quadrature
/// identity C^qu_{x_j,p_i}(τ) = C^qu_{x_i,p_j}(−τ) of number-symmetric systems.
pub fn number_symmetry_checks(system: &AssembledSystem, tau_grid: &[f64]) -> Result<NumberSymmetryReport> {
    let n = system.dim();
    let t3 = nambu::pauli(Pauli::Tau3, n)?;
    let comm = &(&system.g * &t3) - &(&t3 * &system.g);
    let defect = linalg::max_abs(&comm);
    if defect > NUMBER_SYMMETRY_TOL * linalg::max_abs(&system.g).max(1.0) {
        return Err(Error::Precondition(format!("no number symmetry: ‖[G, τ3]‖_max = {defect:.3e}")));
    }
    let modes = system.modes();
    let mut taus: Vec<f64> = tau_grid.to_vec();
    taus.extend(tau_grid.iter().map(|t| -t));
    let mut worst = (0.0f64, (0, 0));
    let mut quad = 0.0f64;
    for i in 0..modes {
        for j in 0..modes {
            let ai = nambu::annihilation(modes, i);
            // B = a_j means β̂ = a_j†
            let bj = nambu::creation(modes, j);
            let cq = quantum_correlation(system, &ai, &bj, &taus)?;
            for v in &cq.values {
                if v.norm() > worst.0 {
                    worst = (v.norm(), (i, j));
                }
            }
            let left = quantum_correlation(system, &nambu::x_quadrature(modes, j), &nambu::p_quadrature(modes, i), &taus)?;
            let right = quantum_correlation(system, &nambu::x_quadrature(modes, i), &nambu::p_quadrature(modes, j), &taus)?;
            let k = tau_grid.len();
            for t in 0..k {
                quad = quad.max((left.values[t] - right.values[t + k]).norm());
                quad = quad.max((left.values[t + k] - right.values[t]).norm());
            }
        }
    }
    Ok(NumberSymmetryReport {
        max_offdiagonal: worst.0,
        worst_pair: worst.1,
        quadrature_defect: quad,
        ok: worst.0 < NUMBER_SYMMETRY_TOL && quad < NUMBER_SYMMETRY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagate_moments, MomentState};
    use crate::lattice::{assemble, BoundaryCondition};
    use crate::models::{make_dbkc, make_dns};
    use crate::modes::{extract_modes, pair_and_normalize, Normalization};
    use proptest::prelude::*;
    use rustfft::FftPlanner;

    fn dbkc(j: f64, d: f64, mu: f64, k: f64, g: f64, n: usize) -> AssembledSystem {
        assemble(&make_dbkc(j, d, mu, k, g).unwrap(), BoundaryCondition::Obc, n).unwrap()
    }

    #[test]
    fn zero_lag_values() {
        let sys = dbkc(2.0, 0.5, 0.1, 0.7, 0.1, 6);
        let ss = dynamics::steady_covariance(&sys).unwrap();
        let a = nambu::x_quadrature(6, 1);
        let b = nambu::p_quadrature(6, 4);
        let cs = steady_correlation_with(&sys, &ss, &a, &b, &[0.0]).unwrap();
        let t3 = nambu::pauli(Pauli::Tau3, 12).unwrap();
        let want = linalg::dot(&linalg::matvec(&t3, &a), &linalg::matvec(&(&ss.second * &t3), &b));
        assert!((cs.values[0] - want).norm() < 1e-14);
        let cq = quantum_correlation(&sys, &a, &b, &[0.0]).unwrap();
        assert!((cq.values[0] - quantum_correlation_at_zero(&a, &b)).norm() < 1e-15);
        let x = nambu::x_quadrature(6, 2);
        let p = nambu::p_quadrature(6, 2);
        assert!((quantum_correlation_at_zero(&x, &p) - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn mb_pair_commutator_half_i() {
        let sys = dbkc(1.0, 1.0, 0.0, 0.5, 0.0, 20);
        let modes = extract_modes(&sys, 0.01).unwrap();
        for p in pair_and_normalize(&modes, Normalization::Symmetric).unwrap() {
            let cq = quantum_correlation(&sys, &p.zm.vector, &p.sg.vector, &[0.0]).unwrap();
            assert!((cq.values[0] - c(0.0, 0.5)).norm() < 1e-10);
        }
    }

    /// Covariance of a displaced squeezed state propagated for a while, so
    /// that the state is neither stationary nor Gaussian-vacuum.
    fn sample_state(sys: &AssembledSystem, t: f64) -> MomentState {
        let modes = sys.modes();
        let mut st = MomentState::vacuum(modes).unwrap();
        for j in 0..modes {
            let z = c(0.3 * j as f64, -0.2);
            st.mean[2 * j] = z;
            st.mean[2 * j + 1] = z.conj();
        }
        st.second = &st.second + &linalg::outer(&st.mean, &st.mean);
        propagate_moments(sys, &st, t).unwrap()
    }

    #[test]
    fn imaginary_part_is_quantum_part() {
        let sys = dbkc(2.0, 0.5, 0.2, 0.7, 0.1, 5);
        let taus = [-3.0, -0.7, 0.0, 0.4, 2.5];
        let modes = sys.modes();
        let ops = [nambu::x_quadrature(modes, 0), nambu::p_quadrature(modes, 3), nambu::x_quadrature(modes, 4)];
        let mut states = vec![dynamics::steady_covariance(&sys).unwrap().second];
        states.push(sample_state(&sys, 0.0).second);
        states.push(sample_state(&sys, 1.7).second);
        for q in &states {
            let ss = GaussianSteadyState { covariance: linalg::zeros(1, 1), second: q.clone(), purity: 1.0, residual: 0.0 };
            for a in &ops {
                for b in &ops {
                    let full = steady_correlation_with(&sys, &ss, a, b, &taus).unwrap();
                    let qu = quantum_correlation(&sys, a, b, &taus).unwrap();
                    for (f, q) in full.values.iter().zip(&qu.values) {
                        assert!((I * f.im - q).norm() < 1e-12, "{f} {q}");
                    }
                }
            }
        }
    }

    #[test]
    fn negative_lag_is_swapped_conjugate() {
        let sys = dbkc(2.0, 0.5, 0.0, 0.3, 0.05, 6);
        let a = nambu::x_quadrature(6, 0);
        let b = nambu::p_quadrature(6, 5);
        let taus = [0.5, 1.5, 4.0];
        let neg: Vec<f64> = taus.iter().map(|t| -t).collect();
        let ab = steady_correlation(&sys, &a, &b, &neg).unwrap();
        let ba = steady_correlation(&sys, &b, &a, &taus).unwrap();
        for (x, y) in ab.values.iter().zip(&ba.values) {
            assert!((x - y.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn susceptibility_asymptote_and_singular_shift() {
        let sys = dbkc(2.0, 0.5, 0.0, 0.3, 0.0, 8);
        let id = linalg::eye(16);
        let mut last = f64::INFINITY;
        for w in [1e2, 1e3, 1e4] {
            let (chi, _) = susceptibility(&sys, w).unwrap();
            let d = linalg::max_abs(&(&linalg::scale(&chi, c(w, 0.0)) - &linalg::scale(&id, I)));
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-3);
        let mut b = crate::models::ChainBuilder::new(1, false);
        b.hamiltonian(c(0.5, 0.0), crate::models::Op::Ad(0), crate::models::Op::A(0));
        let (h, m) = b.finish().unwrap();
        let osc = AssembledSystem::from_matrices(BoundaryCondition::Obc, 1, 1, h, m).unwrap();
        let ev = linalg::eigvals(&osc.g).unwrap();
        assert!(matches!(susceptibility(&osc, ev[0].re), Err(Error::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn resolvent_identity(w1 in -3.0f64..3.0, w2 in -3.0f64..3.0) {
            let sys = dbkc(2.0, 0.5, 0.1, 0.7, 0.1, 6);
            let (c1, _) = susceptibility(&sys, w1).unwrap();
            let (c2, _) = susceptibility(&sys, w2).unwrap();
            // (ω1 − G)⁻¹ − (ω2 − G)⁻¹ = (ω2 − ω1)(ω1 − G)⁻¹(ω2 − G)⁻¹, with χ = i(ω − G)⁻¹
            let lhs = &c1 - &c2;
            let rhs = linalg::scale(&(&c1 * &c2), c(0.0, -(w2 - w1)));
            let sc = linalg::max_abs(&c1).max(linalg::max_abs(&c2)).powi(2).max(1.0);
            prop_assert!(linalg::max_abs(&(&lhs - &rhs)) < 1e-10 * sc);
        }
    }

    /// Riemann sum of e^{iωτ}C(τ) at ω = 2πk/(n dt) from an inverse FFT of a
    /// wrap-around ordered τ grid.
    fn fft_bin(values: &[C], dt: f64, k: usize) -> C {
        let n = values.len();
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = values.iter().map(|z| rustfft::num_complex::Complex::new(z.re, z.im)).collect();
        let fft = FftPlanner::new().plan_fft_inverse(n);
        fft.process(&mut buf);
        C::new(buf[k].re * dt, buf[k].im * dt)
    }

    #[test]
    fn spectrum_matches_fft() {
        let sys = dbkc(2.0, 0.5, 0.2, 0.7, 0.1, 6);
        let mix = |j: usize, w: f64| -> Vec<C> {
            nambu::x_quadrature(6, j).iter().zip(nambu::p_quadrature(6, j)).map(|(x, p)| x + p * w).collect()
        };
        let a = mix(2, 0.5);
        let b = mix(3, -0.7);
        let dt = 0.02;
        let half = 8192;
        // wrap-around ordering: τ = 0, dt, …, then negative lags
        let taus: Vec<f64> = (0..2 * half).map(|i| if i < half { i as f64 * dt } else { (i as f64 - 2.0 * half as f64) * dt }).collect();
        for kind in [CorrelationKind::SteadyState, CorrelationKind::Quantum] {
            let corr = match kind {
                CorrelationKind::SteadyState => steady_correlation(&sys, &a, &b, &taus).unwrap(),
                CorrelationKind::Quantum => quantum_correlation(&sys, &a, &b, &taus).unwrap(),
            };
            for k in [0, 40] {
                let w = 2.0 * std::f64::consts::PI * k as f64 / (2.0 * half as f64 * dt);
                let fft = fft_bin(&corr.values, dt, k);
                let closed = power_spectra(&sys, &a, &b, &[w], kind, false).unwrap().values[0];
                assert!(closed.norm() > 1e-3);
                assert!((fft - closed).norm() < 0.02 * closed.norm(), "{kind:?} ω = {w}: {fft} vs {closed}");
            }
        }
    }

    #[test]
    fn dns_number_symmetry() {
        let sys = assemble(&make_dns(1.0, 0.25, 0.5, 0.2).unwrap(), BoundaryCondition::Obc, 6).unwrap();
        let r = number_symmetry_checks(&sys, &[0.0, 0.3, 1.1, 4.0]).unwrap();
        assert!(r.ok, "{r:?}");
        let pair = dbkc(2.0, 0.5, 0.0, 0.3, 0.0, 6);
        assert!(matches!(number_symmetry_checks(&pair, &[0.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn dns_offdiagonal_spectrum_vanishes() {
        for n in [5, 12] {
            let sys = assemble(&make_dns(1.0, 0.25, 0.5, 0.2).unwrap(), BoundaryCondition::Obc, n).unwrap();
            let a = nambu::creation(n, 0);
            let b_dag_dag = nambu::annihilation(n, n - 1);
            let s = power_spectra(&sys, &a, &b_dag_dag, &[0.0], CorrelationKind::Quantum, false).unwrap();
            assert!(s.values[0].norm() < 1e-12);
            let b = nambu::creation(n, n - 1);
            let s = power_spectra(&sys, &a, &b, &[0.0], CorrelationKind::Quantum, false).unwrap();
            assert!(s.values[0].norm() > 1e-6);
        }
    }

    #[test]
    fn flagged_samples() {
        let mut b = crate::models::ChainBuilder::new(1, false);
        b.hamiltonian(c(0.5, 0.0), crate::models::Op::Ad(0), crate::models::Op::A(0));
        let (h, m) = b.finish().unwrap();
        let osc = AssembledSystem::from_matrices(BoundaryCondition::Obc, 1, 1, h, m).unwrap();
        let w = linalg::eigvals(&osc.g).unwrap()[0].re;
        let x = nambu::x_quadrature(1, 0);
        let s = power_spectra(&osc, &x, &x, &[w, w + 0.3], CorrelationKind::Quantum, false).unwrap();
        assert_eq!(s.flagged, vec![0]);
        assert!(s.values[0].re.is_nan() && s.values[1].is_finite());
    }
}
