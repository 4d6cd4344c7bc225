//! 2-norm pseudospectra of finite dynamical matrices through smallest
//! singular values, the pseudospectral abscissa, and the doubled-matrix
//! (chiral Hamiltonian) form of the singular values.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{AssembledSystem, BoundaryCondition};
use crate::linalg::{self, c, CMat, C};
use crate::spectral;

/// Smallest singular value, 1/‖A⁻¹‖₂.
pub fn min_singular(a: &CMat) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("min_singular needs a square matrix".into()));
    }
    Ok(linalg::singular_values(a)?.first().copied().unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    /// Bounding box of the points padded by `pad` of its extent on each side.
    pub fn around(points: impl IntoIterator<Item = C>, pad: f64) -> Self {
        let mut r = Region { re_min: f64::INFINITY, re_max: f64::NEG_INFINITY, im_min: f64::INFINITY, im_max: f64::NEG_INFINITY };
        for z in points {
            r.re_min = r.re_min.min(z.re);
            r.re_max = r.re_max.max(z.re);
            r.im_min = r.im_min.min(z.im);
            r.im_max = r.im_max.max(z.im);
        }
        let wr = (r.re_max - r.re_min).max(1e-3);
        let wi = (r.im_max - r.im_min).max(1e-3);
        Region {
            re_min: r.re_min - pad * wr,
            re_max: r.re_max + pad * wr,
            im_min: r.im_min - pad * wi,
            im_max: r.im_max + pad * wi,
        }
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PseudospectrumGrid {
    pub region: Region,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// values[iy][ix] = s_min(−iG − (re[ix] + i·im[iy])).
    pub values: Vec<Vec<f64>>,
}

impl PseudospectrumGrid {
    pub fn nx(&self) -> usize {
        self.re.len()
    }

    pub fn ny(&self) -> usize {
        self.im.len()
    }
}

fn require_obc(system: &AssembledSystem) -> Result<()> {
    if system.bc != BoundaryCondition::Obc {
        return Err(Error::Precondition("pseudospectra are computed for OBC systems".into()));
    }
    Ok(())
}

fn s_min_at(a: &CMat, z: C) -> f64 {
    min_singular(&linalg::shift(a, -z)).expect("SVD of a finite matrix")
}

/// Default window: bands (or the finite spectrum) padded by 20%.
pub fn default_region(system: &AssembledSystem) -> Result<Region> {
    if let Some(model) = &system.model {
        let bands = spectral::rapidity_bands(model, 256)?;
        let ev = spectral::spectrum(system)?;
        return Ok(Region::around(bands.points().chain(ev), 0.2));
    }
    Ok(Region::around(spectral::spectrum(system)?, 0.2))
}

/// s_min(−iG_N − λ) on an nx × ny grid of the region.
pub fn pseudospectrum_grid(system: &AssembledSystem, region: Region, nx: usize, ny: usize) -> Result<PseudospectrumGrid> {
    require_obc(system)?;
    if nx == 0 || ny == 0 {
        return Err(Error::Parameter("grid resolution must be positive".into()));
    }
    let a = system.rapidity_matrix();
    let re = Region::axis(region.re_min, region.re_max, nx);
    let im = Region::axis(region.im_min, region.im_max, ny);
    let flat: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|p| s_min_at(&a, c(re[p % nx], im[p / nx])))
        .collect();
    let values = flat.chunks(nx).map(|r| r.to_vec()).collect();
    Ok(PseudospectrumGrid { region, re, im, values })
}

/// α_ε = sup{Re λ : s_min(−iG − λ) < ε}, from a grid search followed by
/// bisection along Re at the rows reaching furthest right.
pub fn pseudospectral_abscissa(system: &AssembledSystem, eps: f64, region: Region, nx: usize, ny: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter("ε must be positive".into()));
    }
    let grid = pseudospectrum_grid(system, region, nx, ny)?;
    let a = system.rapidity_matrix();
    let dx = if nx > 1 { grid.re[1] - grid.re[0] } else { 0.0 };
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for (iy, row) in grid.values.iter().enumerate() {
        if let Some(ix) = (0..nx).rev().find(|&ix| row[ix] < eps) {
            if ix + 1 == nx {
                return Err(Error::Precondition("widen region: the ε-pseudospectrum reaches the right edge of the search window".into()));
            }
            rows.push((iy, ix));
        }
    }
    let Some(best) = rows.iter().map(|&(_, ix)| ix).max() else {
        return Err(Error::Precondition("widen region: no grid point lies inside the ε-pseudospectrum".into()));
    };
    let mut alpha = f64::NEG_INFINITY;
    for &(iy, ix) in rows.iter().filter(|&&(_, ix)| ix + 1 >= best) {
        let y = grid.im[iy];
        let (mut lo, mut hi) = (grid.re[ix], grid.re[ix + 1]);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if s_min_at(&a, c(mid, y)) < eps {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * (1.0 + dx) {
                break;
            }
        }
        alpha = alpha.max(lo);
    }
    Ok(alpha)
}

/// Eigenvalues of [[0, ω − X], [ω − X†, 0]], ascending; they are ± the
/// singular values of ω − X.
pub fn doubled_matrix_eigs(x: &CMat, omega: f64) -> Result<Vec<f64>> {
    if x.nrows() != x.ncols() {
        return Err(Error::Dimension("doubled matrix needs a square X".into()));
    }
    let n = x.nrows();
    let w = linalg::shift(&linalg::scale(x, c(-1.0, 0.0)), c(omega, 0.0));
    let d = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, false) => w[(i, j - n)],
        (false, true) => w[(j, i - n)].conj(),
        _ => C::new(0.0, 0.0),
    });
    linalg::eigvalsh(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::assemble;
    use crate::models::make_dbkc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn diagonal(d: &[C]) -> CMat {
        Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { C::new(0.0, 0.0) })
    }

    #[test]
    fn identity_and_normal() {
        assert!((min_singular(&linalg::eye(5)).unwrap() - 1.0).abs() < 1e-14);
        let d = diagonal(&[c(-1.0, 0.5), c(-2.0, -1.0), c(0.3, 0.0)]);
        let z = c(0.3, 0.7);
        assert!((s_min_at(&d, z) - 0.7).abs() < 1e-13);
    }

    #[test]
    fn normal_abscissa_is_shifted_spectral_abscissa() {
        let sys = AssembledSystem::from_matrices(
            BoundaryCondition::Obc,
            2,
            1,
            linalg::zeros(4, 4),
            linalg::zeros(4, 4),
        )
        .unwrap();
        // replace G by a normal Hurwitz matrix with max Re σ(−iG) = −0.5
        let mut sys = sys;
        let d = diagonal(&[c(-0.5, 1.0), c(-0.5, -1.0), c(-1.5, 0.2), c(-1.5, -0.2)]);
        sys.g = linalg::scale(&d, linalg::I);
        let region = Region { re_min: -3.0, re_max: 1.0, im_min: -2.0, im_max: 2.0 };
        let eps = 0.1;
        let a = pseudospectral_abscissa(&sys, eps, region, 81, 81).unwrap();
        assert!((a - (-0.5 + eps)).abs() < 1e-9, "{a}");
        let narrow = Region { re_min: -3.0, re_max: -0.45, im_min: -2.0, im_max: 2.0 };
        assert!(pseudospectral_abscissa(&sys, eps, narrow, 41, 41).is_err());
    }

    #[test]
    fn hermitian_contours_are_distance_offsets() {
        let mut sys = AssembledSystem::from_matrices(BoundaryCondition::Obc, 1, 1, linalg::zeros(2, 2), linalg::zeros(2, 2)).unwrap();
        let d = diagonal(&[c(0.0, 0.0), c(1.0, 0.0)]);
        sys.g = linalg::scale(&d, linalg::I);
        let region = Region { re_min: -1.0, re_max: 2.0, im_min: -1.0, im_max: 1.0 };
        let g = pseudospectrum_grid(&sys, region, 13, 9).unwrap();
        for (iy, row) in g.values.iter().enumerate() {
            for (ix, v) in row.iter().enumerate() {
                let z = c(g.re[ix], g.im[iy]);
                let dist = z.norm().min((z - 1.0).norm());
                assert!((v - dist).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dbkc_zero_inside_pseudospectrum() {
        let sys = assemble(&make_dbkc(1.0, 1.0, 0.0, 0.5, 0.0).unwrap(), BoundaryCondition::Obc, 20).unwrap();
        let a = sys.rapidity_matrix();
        let s0 = min_singular(&a).unwrap();
        assert!(s0 < 1e-4);
        let region = Region { re_min: -0.1, re_max: 0.1, im_min: -0.1, im_max: 0.1 };
        let g = pseudospectrum_grid(&sys, region, 3, 3).unwrap();
        assert!(g.values[1][1] < 2.0 * s0);
        // the doubled matrix has the same exponentially small midgap pair
        let ev = doubled_matrix_eigs(&a, 0.0).unwrap();
        let n = ev.len();
        assert!((ev[n / 2] - s0).abs() < 1e-12 && (ev[n / 2 - 1] + s0).abs() < 1e-12);
        // the next pair sits at the bulk scale
        assert!(ev[n / 2 + 2] > 1e3 * s0);
    }

    #[test]
    fn spectrum_inside_every_pseudospectrum() {
        let sys = assemble(&make_dbkc(2.0, 0.5, 0.1, 0.3, 0.05).unwrap(), BoundaryCondition::Obc, 12).unwrap();
        let a = sys.rapidity_matrix();
        for z in spectral::spectrum(&sys).unwrap() {
            assert!(s_min_at(&a, z) < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn doubled_matches_svd(seed in 0u64..10_000, n in 1usize..8, omega in -2.0f64..2.0) {
            let x = random(n, seed);
            let ev = doubled_matrix_eigs(&x, omega).unwrap();
            let s = linalg::singular_values(&linalg::shift(&linalg::scale(&x, c(-1.0, 0.0)), c(omega, 0.0))).unwrap();
            let mut want: Vec<f64> = s.iter().map(|v| -v).chain(s.iter().copied()).collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in ev.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in ev.iter().zip(ev.iter().rev()) {
                prop_assert!((a + b).abs() < 1e-10);
            }
        }

        #[test]
        fn s_min_is_lipschitz(seed in 0u64..10_000, x1 in -2.0f64..2.0, y1 in -2.0f64..2.0, x2 in -2.0f64..2.0, y2 in -2.0f64..2.0) {
            let a = random(6, seed);
            let (z1, z2) = (c(x1, y1), c(x2, y2));
            prop_assert!((s_min_at(&a, z1) - s_min_at(&a, z2)).abs() <= (z1 - z2).norm() + 1e-12);
        }
    }
}
