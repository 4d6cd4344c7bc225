//! Nambu-space conventions.
//!
//! Modes are interleaved as Φ = [a_1, a_1†, a_2, a_2†, …]; mode j occupies
//! indices 2j and 2j+1. A coefficient vector v represents the linear form
//! v†τ3Φ, so that [v̂, ŵ†] = v†τ3w.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C, I, ZERO};

pub const VALIDATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    Tau1,
    Tau2,
    Tau3,
}

fn even_dim(n: usize) -> Result<()> {
    if n % 2 != 0 {
        return Err(Error::Dimension(format!("Nambu dimension {n} is odd")));
    }
    Ok(())
}

fn square_even(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    even_dim(m.nrows())
}

/// τ_j = 1 ⊗ σ_j in dimension `dim`.
pub fn pauli(which: Pauli, dim: usize) -> Result<CMat> {
    even_dim(dim)?;
    let mut t = linalg::zeros(dim, dim);
    for k in 0..dim / 2 {
        let (a, b) = (2 * k, 2 * k + 1);
        match which {
            Pauli::Tau1 => {
                t[(a, b)] = linalg::ONE;
                t[(b, a)] = linalg::ONE;
            }
            Pauli::Tau2 => {
                t[(a, b)] = -I;
                t[(b, a)] = I;
            }
            Pauli::Tau3 => {
                t[(a, a)] = linalg::ONE;
                t[(b, b)] = -linalg::ONE;
            }
        }
    }
    Ok(t)
}

fn sign3(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// τ1 Mᵀ τ1 without forming τ1.
pub fn tau1_transpose(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(j ^ 1, i ^ 1)])
}

/// τ1 M* τ1.
pub fn tau1_conj(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i ^ 1, j ^ 1)].conj())
}

/// τ3 M.
pub fn tau3_left(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * sign3(i))
}

/// τ3 M τ3.
pub fn tau3_sandwich(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (sign3(i) * sign3(j)))
}

/// 𝓕(M) = (M − τ1Mᵀτ1)/2.
pub fn fermionic_project(m: &CMat) -> Result<CMat> {
    square_even(m)?;
    let t = tau1_transpose(m);
    Ok(Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] - t[(i, j)]) * 0.5))
}

/// 𝓑(M) = (M + τ1Mᵀτ1)/2.
pub fn bosonic_project(m: &CMat) -> Result<CMat> {
    square_even(m)?;
    let t = tau1_transpose(m);
    Ok(Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + t[(i, j)]) * 0.5))
}

fn rel_defect(defect: f64, reference: f64) -> f64 {
    defect / reference.max(1.0)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    rel_defect(linalg::max_abs(&(m - m.adjoint())), linalg::max_abs(m))
}

/// max |G* + τ1Gτ1|, relative to max |G|.
pub fn conjugation_defect(g: &CMat) -> f64 {
    let t = tau1_conj(g);
    rel_defect(linalg::max_abs(&(g + &t)), linalg::max_abs(g))
}

/// G = τ3H − iτ3𝓕(M), validated against the bosonic constraints.
pub fn dynamical_matrix(h: &CMat, m: &CMat) -> Result<CMat> {
    dynamical_matrix_tol(h, m, VALIDATION_TOL)
}

pub fn dynamical_matrix_tol(h: &CMat, m: &CMat, tol: f64) -> Result<CMat> {
    square_even(h)?;
    square_even(m)?;
    if h.nrows() != m.nrows() {
        return Err(Error::Dimension("H and M differ in size".into()));
    }
    let dh = hermiticity_defect(h);
    if dh > tol {
        return Err(Error::Validation(format!("H is not Hermitian (defect {dh:.3e})")));
    }
    let dm = hermiticity_defect(m);
    if dm > tol {
        return Err(Error::Validation(format!("M is not Hermitian (defect {dm:.3e})")));
    }
    let db = rel_defect(linalg::max_abs(&(h - &tau1_transpose(h))), linalg::max_abs(h));
    if db > tol {
        return Err(Error::Validation(format!("H is not bosonic (defect {db:.3e})")));
    }
    let f = fermionic_project(m)?;
    let g = Mat::from_fn(h.nrows(), h.ncols(), |i, j| (h[(i, j)] - I * f[(i, j)]) * sign3(i));
    let dg = conjugation_defect(&g);
    if dg > tol {
        return Err(Error::Validation(format!("G violates G* = -τ1Gτ1 (defect {dg:.3e})")));
    }
    Ok(g)
}

/// G̃ = τ3G†τ3.
pub fn tilde(g: &CMat) -> Result<CMat> {
    square_even(g)?;
    Ok(tau3_sandwich(&linalg::adjoint(g)))
}

/// 𝒞v = τ1v*.
pub fn conjugate_vector(v: &[C]) -> Vec<C> {
    (0..v.len()).map(|i| v[i ^ 1].conj()).collect()
}

/// ‖𝒞v + v‖; zero exactly for coefficient vectors of Hermitian forms.
pub fn hermitian_form_defect(v: &[C]) -> f64 {
    let cv = conjugate_vector(v);
    linalg::vnorm(&cv.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>())
}

pub fn is_hermitian_form(v: &[C], tol: f64) -> bool {
    hermitian_form_defect(v) <= tol * linalg::vnorm(v).max(1.0)
}

/// u†τ3v, the commutator [û, v̂†] of the corresponding linear forms.
pub fn tau3_form(u: &[C], v: &[C]) -> C {
    u.iter().enumerate().map(|(i, a)| a.conj() * v[i] * sign3(i)).sum()
}

pub fn tau3_vec(v: &[C]) -> Vec<C> {
    v.iter().enumerate().map(|(i, z)| z * sign3(i)).collect()
}

/// Coefficient vector of x_j = (a_j + a_j†)/√2 among `modes` modes.
pub fn x_quadrature(modes: usize, j: usize) -> Vec<C> {
    let mut v = vec![ZERO; 2 * modes];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    v[2 * j] = c(s, 0.0);
    v[2 * j + 1] = c(-s, 0.0);
    v
}

/// Coefficient vector of p_j = i(a_j† − a_j)/√2, so that [x_j, p_j] = i.
pub fn p_quadrature(modes: usize, j: usize) -> Vec<C> {
    let mut v = vec![ZERO; 2 * modes];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    v[2 * j] = c(0.0, s);
    v[2 * j + 1] = c(0.0, s);
    v
}

/// Coefficient vector of the annihilation operator a_j.
pub fn annihilation(modes: usize, j: usize) -> Vec<C> {
    let mut v = vec![ZERO; 2 * modes];
    v[2 * j] = linalg::ONE;
    v
}

/// Coefficient vector of the creation operator a_j†.
pub fn creation(modes: usize, j: usize) -> Vec<C> {
    let mut v = vec![ZERO; 2 * modes];
    v[2 * j + 1] = -linalg::ONE;
    v
}
