//! Dense complex linear algebra on top of faer: decompositions, matrix
//! exponential, Lyapunov solver and assignment matching.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C = Complex64;
pub type CMat = Mat<C>;

pub const I: C = C::new(0.0, 1.0);
pub const ONE: C = C::new(1.0, 0.0);
pub const ZERO: C = C::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn eye(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn scale(a: &CMat, s: C) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn transpose(a: &CMat) -> CMat {
    a.transpose().to_owned()
}

pub fn conj(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

/// a + s·1
pub fn shift(a: &CMat, s: C) -> CMat {
    let mut out = a.clone();
    for i in 0..a.nrows().min(a.ncols()) {
        out[(i, i)] += s;
    }
    out
}

pub fn fro(a: &CMat) -> f64 {
    a.norm_l2()
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm.
pub fn norm2(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?.last().copied().unwrap_or(0.0))
}

pub fn is_finite(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

pub fn matvec(a: &CMat, v: &[C]) -> Vec<C> {
    assert_eq!(a.ncols(), v.len());
    let mut out = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let vj = v[j];
        if vj == ZERO {
            continue;
        }
        for i in 0..a.nrows() {
            out[i] += a[(i, j)] * vj;
        }
    }
    out
}

/// u†v
pub fn dot(u: &[C], v: &[C]) -> C {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vnorm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn col(a: &CMat, j: usize) -> Vec<C> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_cols(cols: &[Vec<C>]) -> CMat {
    let n = cols.first().map_or(0, |c| c.len());
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

pub fn outer(u: &[C], v: &[C]) -> CMat {
    Mat::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (p, q) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * p, a.ncols() * q, |i, j| a[(i / p, j / q)] * b[(i % p, j % q)])
}

/// Eigenvalues consistent with tr A and tr A², the moments any backward-stable
/// Schur form preserves to rounding.
fn spectrum_consistent(a: &CMat, vals: &[C]) -> bool {
    if vals.iter().any(|z| !z.is_finite()) {
        return false;
    }
    let n = a.nrows();
    let f = fro(a);
    let tr: C = (0..n).map(|i| a[(i, i)]).sum();
    let a2 = a * a;
    let tr2: C = (0..n).map(|i| a2[(i, i)]).sum();
    let s1: C = vals.iter().sum();
    let s2: C = vals.iter().map(|z| z * z).sum();
    let tol = 1e-10 * n as f64;
    (s1 - tr).norm() <= tol * (1.0 + f) && (s2 - tr2).norm() <= tol * (1.0 + f * f)
}

/// Zeroes entries below rounding level. faer's complex QR can stall on exactly
/// equal diagonals coupled by sub-rounding off-diagonals.
fn flush_tiny(a: &CMat) -> CMat {
    let cut = 4.0 * f64::EPSILON * max_abs(a);
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| if a[(i, j)].norm() <= cut { ZERO } else { a[(i, j)] })
}

/// Fixed unitary (a Householder reflector) breaking structural degeneracies.
fn mixing_reflector(n: usize) -> CMat {
    let v: Vec<C> = (0..n).map(|i| C::from_polar(1.0 + 0.37 * i as f64, 1.3 * i as f64 + 0.2)).collect();
    let nv = vnorm(&v);
    Mat::from_fn(n, n, |i, j| {
        let d = if i == j { ONE } else { ZERO };
        d - v[i] * v[j].conj() * (2.0 / (nv * nv))
    })
}

fn raw_eig(a: &CMat) -> Option<(Vec<C>, CMat)> {
    let e = a.eigen().ok()?;
    let vals: Vec<C> = (0..a.nrows()).map(|i| e.S()[i]).collect();
    spectrum_consistent(a, &vals).then(|| (vals, e.U().to_owned()))
}

fn raw_eigvals(a: &CMat) -> Option<Vec<C>> {
    let vals = a.eigenvalues().ok()?;
    spectrum_consistent(a, &vals).then_some(vals)
}

/// Closed-form eigenvalues of a 2×2 matrix.
fn eigvals2(a: &CMat) -> Vec<C> {
    let half = (a[(0, 0)] + a[(1, 1)]) * 0.5;
    let d = (a[(0, 0)] - a[(1, 1)]) * 0.5;
    let r = (d * d + a[(0, 1)] * a[(1, 0)]).sqrt();
    vec![half + r, half - r]
}

pub fn eigvals(a: &CMat) -> Result<Vec<C>> {
    match a.nrows() {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![a[(0, 0)]]),
        2 if a.ncols() == 2 => return Ok(eigvals2(a)),
        _ => {}
    }
    if let Some(v) = raw_eigvals(a).or_else(|| raw_eigvals(&flush_tiny(a))) {
        return Ok(v);
    }
    let q = mixing_reflector(a.nrows());
    raw_eigvals(&(&(&q * a) * &q))
        .ok_or_else(|| Error::Numerical("eigensolver failed: spectrum inconsistent with trace invariants".into()))
}

/// Eigenvalues and right eigenvectors (columns).
pub fn eig(a: &CMat) -> Result<(Vec<C>, CMat)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), zeros(0, 0)));
    }
    if let Some(r) = raw_eig(a).or_else(|| raw_eig(&flush_tiny(a))) {
        return Ok(r);
    }
    let q = mixing_reflector(a.nrows());
    let (vals, u) = raw_eig(&(&(&q * a) * &q))
        .ok_or_else(|| Error::Numerical("eigensolver failed: spectrum inconsistent with trace invariants".into()))?;
    Ok((vals, &q * &u))
}

/// Hermitian eigendecomposition, eigenvalues ascending.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver failed: {e:?}")))?;
    let vals = (0..a.nrows()).map(|i| e.S()[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver failed: {e:?}")))
}

/// Real symmetric eigendecomposition, eigenvalues ascending.
pub fn eigh_real(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let vals = (0..a.nrows()).map(|i| e.S()[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Singular values ascending.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    let mut s = a.singular_values().map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Full SVD a = U diag(s) V† with singular values ascending.
pub fn svd(a: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let d = a.svd().map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let k = a.nrows().min(a.ncols());
    let s: Vec<f64> = (0..k).map(|i| d.S()[i].re).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    let u = Mat::from_fn(a.nrows(), k, |i, j| d.U()[(i, order[j])]);
    let v = Mat::from_fn(a.ncols(), k, |i, j| d.V()[(i, order[j])]);
    Ok((u, order.iter().map(|&i| s[i]).collect(), v))
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    use faer::linalg::solvers::DenseSolveCore;
    let inv = a.partial_piv_lu().inverse();
    if !is_finite(&inv) {
        return Err(Error::Numerical("singular matrix".into()));
    }
    Ok(inv)
}

pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    use faer::linalg::solvers::Solve;
    let x = a.partial_piv_lu().solve(b);
    if !is_finite(&x) {
        return Err(Error::Numerical("singular matrix".into()));
    }
    Ok(x)
}

pub fn det(a: &CMat) -> C {
    a.determinant()
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, usize); 4] = [
    (1.495585217958292e-2, 3),
    (2.539398330063230e-1, 5),
    (9.504178996162932e-1, 7),
    (2.097847961257068, 9),
];
const THETA13: f64 = 5.371920351148152;

fn axpy_into(acc: &mut CMat, a: &CMat, s: f64) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc[(i, j)] += a[(i, j)] * s;
        }
    }
}

fn pade_low(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let a2 = a * a;
    let mut u_inner = scale(&eye(n), c(b[1], 0.0));
    let mut v = scale(&eye(n), c(b[0], 0.0));
    let mut p = eye(n);
    let m = b.len() - 1;
    for k in (2..=m).step_by(2) {
        p = &p * &a2;
        axpy_into(&mut v, &p, b[k]);
        if k + 1 <= m {
            axpy_into(&mut u_inner, &p, b[k + 1]);
        }
    }
    (a * &u_inner, v)
}

fn pade13(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let b = &PADE13;
    let id = eye(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let mut t = zeros(n, n);
    axpy_into(&mut t, &a6, b[13]);
    axpy_into(&mut t, &a4, b[11]);
    axpy_into(&mut t, &a2, b[9]);
    let mut u = &a6 * &t;
    axpy_into(&mut u, &a6, b[7]);
    axpy_into(&mut u, &a4, b[5]);
    axpy_into(&mut u, &a2, b[3]);
    axpy_into(&mut u, &id, b[1]);
    let u = a * &u;
    let mut t = zeros(n, n);
    axpy_into(&mut t, &a6, b[12]);
    axpy_into(&mut t, &a4, b[10]);
    axpy_into(&mut t, &a2, b[8]);
    let mut v = &a6 * &t;
    axpy_into(&mut v, &a6, b[6]);
    axpy_into(&mut v, &a4, b[4]);
    axpy_into(&mut v, &a2, b[2]);
    axpy_into(&mut v, &id, b[0]);
    (u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    if !is_finite(a) {
        return Err(Error::Numerical("non-finite matrix in expm".into()));
    }
    let nrm = norm1(a);
    let (u, v, s) = if let Some(&(_, m)) = THETA.iter().find(|(th, _)| nrm <= *th) {
        let b: &[f64] = match m {
            3 => &PADE3,
            5 => &PADE5,
            7 => &PADE7,
            _ => &PADE9,
        };
        let (u, v) = pade_low(a, b);
        (u, v, 0)
    } else {
        let s = ((nrm / THETA13).log2().ceil()).max(0.0) as i32;
        let scaled = scale(a, c(0.5f64.powi(s), 0.0));
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !is_finite(&r) {
        return Err(Error::Numerical("overflow in matrix exponential".into()));
    }
    Ok(r)
}

/// Solves A X + X A† + Q = 0 for Hurwitz A by the scaled matrix-sign iteration,
/// falling back to the vectorized linear system when the iteration stalls.
pub fn lyapunov(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut ak = a.clone();
    let mut x = q.clone();
    let tol = 1e-13 * (n as f64).max(1.0);
    for _ in 0..100 {
        let ainv = inverse(&ak)?;
        let g = (fro(&ainv) / fro(&ak)).sqrt();
        let next_a = Mat::from_fn(n, n, |i, j| (ak[(i, j)] * g + ainv[(i, j)] / g) * 0.5);
        let t = &(&ainv * &x) * ainv.adjoint();
        let next_x = Mat::from_fn(n, n, |i, j| (x[(i, j)] * g + t[(i, j)] / g) * 0.5);
        ak = next_a;
        x = next_x;
        if norm1(&shift(&ak, ONE)) < tol {
            let sol = scale(&x, c(0.5, 0.0));
            return Ok(sol);
        }
    }
    if n <= 80 {
        return lyapunov_kron(a, q);
    }
    Err(Error::Numerical("Lyapunov sign iteration did not converge".into()))
}

/// Direct solve of the vectorized Lyapunov equation (I⊗A + A*⊗I) vec X = −vec Q.
pub fn lyapunov_kron(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let id = eye(n);
    let k = &kron(&id, a) + &kron(&conj(a), &id);
    let rhs = Mat::from_fn(n * n, 1, |idx, _| -q[(idx % n, idx / n)]);
    let v = solve(&k, &rhs)?;
    Ok(Mat::from_fn(n, n, |i, j| v[(j * n + i, 0)]))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Complex accumulator with error-free transformations (Ogita–Rump–Oishi
/// Sum2/Dot2); the result is as accurate as if computed in twice the working
/// precision and then rounded.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_err: f64,
    im: f64,
    im_err: f64,
}

impl CompensatedSum {
    fn push_re(&mut self, x: f64) {
        let (s, e) = two_sum(self.re, x);
        self.re = s;
        self.re_err += e;
    }

    fn push_im(&mut self, x: f64) {
        let (s, e) = two_sum(self.im, x);
        self.im = s;
        self.im_err += e;
    }

    pub fn add(&mut self, z: C) {
        self.push_re(z.re);
        self.push_im(z.im);
    }

    pub fn add_prod(&mut self, a: C, b: C) {
        for (x, y, im) in [(a.re, b.re, false), (-a.im, b.im, false), (a.re, b.im, true), (a.im, b.re, true)] {
            let (p, e) = two_prod(x, y);
            if im {
                self.push_im(p);
                self.im_err += e;
            } else {
                self.push_re(p);
                self.re_err += e;
            }
        }
    }

    pub fn value(&self) -> C {
        c(self.re + self.re_err, self.im + self.im_err)
    }
}

/// A X + X A† + Q for X = X_hi + X_lo, accumulated with compensated arithmetic.
pub fn lyapunov_residual_compensated(a: &CMat, x_hi: &CMat, x_lo: &CMat, q: &CMat) -> CMat {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| {
        let mut acc = CompensatedSum::default();
        acc.add(q[(i, j)]);
        for k in 0..n {
            acc.add_prod(a[(i, k)], x_hi[(k, j)]);
            acc.add_prod(x_hi[(i, k)], a[(j, k)].conj());
            acc.add_prod(a[(i, k)], x_lo[(k, j)]);
            acc.add_prod(x_lo[(i, k)], a[(j, k)].conj());
        }
        acc.value()
    })
}

/// Lyapunov solution as an unevaluated sum X_hi + X_lo, refined with
/// compensated residuals. The low part carries the digits lost when strongly
/// graded solutions are rounded to working precision.
pub fn lyapunov_refined(a: &CMat, q: &CMat, x0: CMat, steps: usize) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    let hi = x0;
    let mut lo = zeros(n, n);
    for _ in 0..steps {
        let r = lyapunov_residual_compensated(a, &hi, &lo, q);
        let d = lyapunov(a, &r)?;
        lo = &lo + &d;
    }
    let mut out_hi = zeros(n, n);
    let mut out_lo = zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let (sr, er) = two_sum(hi[(i, j)].re, lo[(i, j)].re);
            let (si, ei) = two_sum(hi[(i, j)].im, lo[(i, j)].im);
            out_hi[(i, j)] = c(sr, si);
            out_lo[(i, j)] = c(er, ei);
        }
    }
    Ok((out_hi, out_lo))
}

/// Minimum-cost perfect assignment for a square cost matrix; returns the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Largest pairwise distance under the optimal matching of two equal-size
/// multisets of complex numbers; infinite when the sizes differ.
pub fn multiset_distance(a: &[C], b: &[C]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x - y).norm()).collect()).collect();
    let assign = hungarian(&cost);
    assign.iter().enumerate().map(|(i, &j)| cost[i][j]).fold(0.0, f64::max)
}

/// Ascending (Re, Im) ordering used for reported spectra.
pub fn sort_complex(v: &mut [C]) {
    v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn closed_form_2x2_matches_general_solver() {
        for seed in 0..20 {
            let m = random(2, seed);
            let e = m.eigenvalues().unwrap();
            assert!(multiset_distance(&eigvals(&m).unwrap(), &e) < 1e-13);
        }
    }

    #[test]
    fn near_scalar_eigenvalues() {
        let a = c(-0.7, -2.0);
        for n in [2usize, 3, 10] {
            let m = Mat::from_fn(n, n, |i, j| if i == j { a } else if (i + j) % 3 == 1 { c(6e-17, 0.0) } else { ZERO });
            assert!(eigvals(&m).unwrap().iter().all(|z| (z - a).norm() < 1e-12));
            let (vals, vecs) = eig(&m).unwrap();
            assert!(vals.iter().all(|z| (z - a).norm() < 1e-12));
            let r = &(&m * &vecs) - &(&vecs * Mat::from_fn(n, n, |i, j| if i == j { vals[i] } else { ZERO }));
            assert!(max_abs(&r) < 1e-12);
        }
    }

    #[test]
    fn expm_of_diagonal() {
        let mut a = zeros(3, 3);
        a[(0, 0)] = c(-0.5, 2.0);
        a[(1, 1)] = c(3.0, 0.0);
        a[(2, 2)] = c(0.0, -40.0);
        let e = expm(&a).unwrap();
        for i in 0..3 {
            let want = a[(i, i)].exp();
            assert!((e[(i, i)] - want).norm() < 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn expm_group_property() {
        let a = scale(&random(6, 1), c(2.0, 0.0));
        let e1 = expm(&a).unwrap();
        let e2 = expm(&scale(&a, c(0.5, 0.0))).unwrap();
        let err = fro(&(&e1 - &(&e2 * &e2))) / fro(&e1);
        assert!(err < 1e-12, "{err}");
        let inv = expm(&scale(&a, c(-1.0, 0.0))).unwrap();
        assert!(fro(&(&e1 * &inv - eye(6))) < 1e-10);
    }

    #[test]
    fn expm_nilpotent() {
        let mut a = zeros(2, 2);
        a[(0, 1)] = c(5.0, 0.0);
        let e = expm(&a).unwrap();
        assert!((e[(0, 1)] - c(5.0, 0.0)).norm() < 1e-13);
        assert!((e[(0, 0)] - ONE).norm() < 1e-13);
    }

    #[test]
    fn lyapunov_matches_kron() {
        let a = shift(&random(8, 2), c(-3.0, 0.0));
        let b = random(8, 3);
        let q = &b * b.adjoint();
        let x1 = lyapunov(&a, &q).unwrap();
        let x2 = lyapunov_kron(&a, &q).unwrap();
        assert!(fro(&(&x1 - &x2)) < 1e-10 * fro(&x2));
        let res = &(&a * &x1 + &x1 * a.adjoint()) + &q;
        assert!(fro(&res) < 1e-12 * fro(&q));
    }

    #[test]
    fn compensated_sum_keeps_cancelled_digits() {
        let mut acc = CompensatedSum::default();
        for z in [c(1e16, -1e16), c(1.0, 0.5), c(-1e16, 1e16)] {
            acc.add(z);
        }
        assert_eq!(acc.value(), c(1.0, 0.5));
        let mut dot = CompensatedSum::default();
        let x = c(1.0 + f64::EPSILON, 0.0);
        dot.add_prod(x, x);
        dot.add(c(-1.0 - 2.0 * f64::EPSILON, 0.0));
        assert_eq!(dot.value().re, f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn refinement_shrinks_graded_residual() {
        // strongly graded data: X_jk grows like 4^(j+k)
        let n = 10;
        let d: Vec<f64> = (0..n).map(|j| 4f64.powi(j as i32)).collect();
        let a0 = shift(&random(n, 7), c(-3.0, 0.0));
        let b = random(n, 8);
        let q0 = &b * b.adjoint();
        let a = Mat::from_fn(n, n, |i, j| a0[(i, j)] * (d[i] / d[j]));
        let q = Mat::from_fn(n, n, |i, j| q0[(i, j)] * (d[i] * d[j]));
        let x = lyapunov(&a, &q).unwrap();
        let before = fro(&lyapunov_residual_compensated(&a, &x, &zeros(n, n), &q));
        let (hi, lo) = lyapunov_refined(&a, &q, x, 2).unwrap();
        let after = fro(&lyapunov_residual_compensated(&a, &hi, &lo, &q));
        assert!(after < 1e-6 * before, "{before:e} -> {after:e}");
        assert!(max_abs(&lo) <= 1e-12 * max_abs(&hi));
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn multiset_ties() {
        let a = vec![c(1.0, 2.0), c(1.0 + 1e-16, -2.0), c(0.0, 0.0)];
        let b = vec![c(1.0, -2.0), c(0.0, 0.0), c(1.0, 2.0)];
        assert!(multiset_distance(&a, &b) < 1e-15);
    }

    #[test]
    fn svd_sorted_and_reconstructs() {
        let a = random(5, 4);
        let (u, s, v) = svd(&a).unwrap();
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        let d = Mat::from_fn(5, 5, |i, j| if i == j { c(s[i], 0.0) } else { ZERO });
        assert!(fro(&(&(&u * &d) * v.adjoint() - &a)) < 1e-12);
    }
}
