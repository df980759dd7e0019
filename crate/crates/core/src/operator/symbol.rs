//! Principal symbol of the Dirac Hamiltonian and horizon location.
//!
//! The symbol P(x, ξ) = −i (γ^t)⁻¹ γ^α ξ_α (spatial ξ) has determinant
//! (−g^{αβ} ξ_α ξ_β / g^{tt})^{f/2} and degenerates on null spatial
//! covectors. Horizons are the radii where the faces {r = const} turn
//! characteristic — the radial covector dr goes null, g^{rr} = 0. (The full
//! degeneracy set of the symbol is an open region once frame dragging sets
//! in; its radial sign-change locus is what isolates r±.)

use ndarray::Array2;

use crate::geometry::{AngularKind, Metric, Point};
use crate::linalg::cdet;
use crate::spinor::{build_vielbein, curved_gammas, gamma_t_inv, CliffordRep};
use crate::{Error, Result, C64};

/// Principal symbol at one phase-space point.
#[derive(Debug, Clone)]
pub struct SymbolSample {
    pub p: Array2<C64>,
    pub det_p: C64,
    /// Spatial co-metric quadratic form g^{αβ} ξ_α ξ_β.
    pub quad: f64,
    pub gtt: f64,
}

impl SymbolSample {
    /// Closed-form determinant (−quad / g^{tt})^{f/2}: the slashed covector
    /// has eigenvalue pairs ±√quad, so det ξ̸ = (−quad)^{f/2}, and the
    /// prefactor (−i)^f det (γ^t)⁻¹ contributes (−1)^{f/2} g^{tt −f/2}.
    pub fn det_formula(&self) -> C64 {
        let f2 = (self.p.nrows() / 2) as i32;
        C64::new((-self.quad / self.gtt).powi(f2), 0.0)
    }
}

pub fn principal_symbol(
    metric: &dyn Metric,
    rep: &CliffordRep,
    x: &Point,
    xi: &[f64],
) -> Result<SymbolSample> {
    let d = metric.dim();
    if rep.dim != d || xi.len() != d - 1 {
        return Err(Error::InvalidParameter(format!(
            "principal_symbol: expected {} covector components for dim {d}",
            d - 1
        )));
    }
    let sample = metric.sample(x)?;
    let vb = build_vielbein(&sample)?;
    let gam = curved_gammas(rep, &vb);
    let gtt = sample.ginv[[0, 0]];
    let gtinv = gamma_t_inv(&gam[0], gtt);
    let f = rep.f;
    let mut slashed = Array2::<C64>::zeros((f, f));
    for al in 0..d - 1 {
        if xi[al] != 0.0 {
            slashed.zip_mut_with(&gam[al + 1], |acc, &g| *acc += g * xi[al]);
        }
    }
    let p = gtinv.dot(&slashed).mapv(|z| z * C64::new(0.0, -1.0));
    let det_p = cdet(&p);
    let co = sample.spatial_cometric();
    let mut quad = 0.0;
    for a in 0..d - 1 {
        for b in 0..d - 1 {
            quad += co[[a, b]] * xi[a] * xi[b];
        }
    }
    Ok(SymbolSample { p, det_p, quad, gtt })
}

/// Characteristic margin of the face {r = const}: the worst (largest) value
/// of g^{rr} over the angular fibre. Negative where the face is timelike,
/// zero exactly on horizons.
fn radial_margin(metric: &dyn Metric, r: f64) -> Result<f64> {
    let thetas: Vec<f64> = match metric.angular() {
        AngularKind::PolarAxis => (1..16)
            .map(|j| j as f64 * std::f64::consts::PI / 16.0)
            .collect(),
        AngularKind::Periodic { period } => {
            (0..8).map(|j| j as f64 * period / 8.0).collect()
        }
    };
    let mut worst = f64::NEG_INFINITY;
    for th in thetas {
        let p = Point::spatial(r, th, metric.dim());
        worst = worst.max(metric.sample(&p)?.ginv[[1, 1]]);
    }
    Ok(worst)
}

/// Locate the radii in `(r_min, r_max)` where the radial covector goes null
/// (the symbol degenerates on dr), by scanning g^{rr} and bisecting sign
/// crossings. Returns radii in increasing order; tangential (non-crossing)
/// degeneracies are not detected.
pub fn locate_horizons(
    metric: &dyn Metric,
    r_min: f64,
    r_max: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(r_max > r_min) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(
            "locate_horizons: need r_min < r_max and tol > 0".into(),
        ));
    }
    let n_scan = 600usize;
    let h = (r_max - r_min) / n_scan as f64;
    let mut out = Vec::new();
    let mut prev_r = r_min;
    let mut prev_m = radial_margin(metric, prev_r)?;
    for i in 1..=n_scan {
        let r = r_min + i as f64 * h;
        let m = radial_margin(metric, r)?;
        if prev_m == 0.0 {
            out.push(prev_r);
        } else if prev_m * m < 0.0 {
            // Bisect the bracket.
            let (mut lo, mut hi, mut mlo) = (prev_r, r, prev_m);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let mm = radial_margin(metric, mid)?;
                if mm == 0.0 {
                    lo = mid;
                    break;
                }
                if mlo * mm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    mlo = mm;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev_r = r;
        prev_m = m;
    }
    if prev_m == 0.0 {
        out.push(prev_r);
    }
    out.dedup_by(|a, b| (*a - *b).abs() < 2.0 * tol);
    Ok(out)
}
