//! Gaussian normal chart collaring the inner boundary.
//!
//! Slice geodesics are launched from the boundary nodes along the inward unit
//! normal of `∂N = {r = r0}` (inward = into the domain, increasing `r`) and
//! integrated with classic RK4 at the fixed resolution `h_ρ = r_max / 256`.
//! The chart stores positions and velocities on the full `(ρ, Ω)` lattice,
//! checks injectivity by tracking separations of adjacent geodesics, and
//! reports a Richardson step-halving error estimate for the integration.

use ndarray::{Array2, Array3};

use super::{AngularKind, Metric, MetricSample, Point};
use crate::{Error, Result};

/// Number of ρ-intervals of every chart.
pub const N_RHO: usize = 256;

#[derive(Debug, Clone)]
pub struct GaussianChart {
    pub depth: f64,
    pub h_rho: f64,
    pub omegas: Vec<f64>,
    pub angular: AngularKind,
    /// Spacetime dimension of the underlying chart.
    pub dim: usize,
    /// `points[[level, j, α]]`: spatial coordinates of `c_{Ω_j}(level · h_ρ)`.
    points: Array3<f64>,
    /// Geodesic velocities `dc/dρ` on the same lattice.
    velocities: Array3<f64>,
    /// Max deviation of `g_N(u, u)` from 1 along all geodesics.
    pub unit_speed_defect: f64,
    /// Step-halving estimate of the endpoint integration error.
    pub richardson_error: f64,
}

/// Pullback diagnostics of the chart: how well the integrated lattice
/// satisfies the Gauss conditions `g_ρρ = 1`, `g_ρΩ = 0`.
#[derive(Debug, Clone)]
pub struct PullbackReport {
    pub max_unit_defect: f64,
    /// Max of `|g_N(u, tangent)|` normalized by the factor norms.
    pub max_mixed: f64,
}

/// Build the Gaussian normal chart of depth `r_max` over the boundary nodes
/// `omegas`, using the metric's slice geometry.
pub fn gaussian_normal_chart(
    metric: &dyn Metric,
    omegas: &[f64],
    r_max: f64,
) -> Result<GaussianChart> {
    if omegas.is_empty() {
        return Err(Error::InvalidParameter(
            "gaussian_normal_chart: need at least one boundary node".into(),
        ));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian_normal_chart: depth {r_max} must be positive"
        )));
    }
    let d = metric.dim() - 1;
    let r0 = metric.inner_radius();
    let h = r_max / N_RHO as f64;
    let nj = omegas.len();

    let mut points = Array3::<f64>::zeros((N_RHO + 1, nj, d));
    let mut velocities = Array3::<f64>::zeros((N_RHO + 1, nj, d));

    // Launch data: inward unit normal u^α ∝ (g_N⁻¹)^{αr}.
    for (j, &om) in omegas.iter().enumerate() {
        let p = Point::spatial(r0, om, metric.dim());
        let s = metric.sample(&p)?;
        let hinv = s.slice_metric_inv()?;
        let scale = hinv[[0, 0]].sqrt();
        points[[0, j, 0]] = r0;
        points[[0, j, 1]] = om;
        for al in 0..d {
            velocities[[0, j, al]] = hinv[[al, 0]] / scale;
        }
    }

    let initial_sep = adjacent_separations(metric, &points, 0, nj, d)?;
    let min_initial = initial_sep.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut unit_defect = 0.0f64;
    // Coarse endpoint states for the Richardson estimate.
    let mut coarse: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(nj);

    for j in 0..nj {
        let mut x: Vec<f64> = (0..d).map(|al| points[[0, j, al]]).collect();
        let mut u: Vec<f64> = (0..d).map(|al| velocities[[0, j, al]]).collect();
        let (cx, cu) = (x.clone(), u.clone());

        for level in 1..=N_RHO {
            let rho = level as f64 * h;
            rk4_step(metric, &mut x, &mut u, h).map_err(|e| domain_exit(rho, j, &e))?;
            for al in 0..d {
                points[[level, j, al]] = x[al];
                velocities[[level, j, al]] = u[al];
            }
            let s = metric
                .sample(&Point::new(chartify(&x)))
                .map_err(|e| domain_exit(rho, j, &e))?;
            let hm = s.slice_metric();
            let speed = quad_form(&hm, &u, &u);
            unit_defect = unit_defect.max((speed - 1.0).abs());
        }

        let mut x2 = cx;
        let mut u2 = cu;
        for level in 1..=N_RHO / 2 {
            let rho = level as f64 * 2.0 * h;
            rk4_step(metric, &mut x2, &mut u2, 2.0 * h).map_err(|e| domain_exit(rho, j, &e))?;
        }
        coarse.push((x2, u2));
    }

    // Injectivity: adjacent geodesics must not close up relative to their
    // initial separation.
    for level in 1..=N_RHO {
        let sep = adjacent_separations(metric, &points, level, nj, d)?;
        if let Some(bad) = sep.iter().position(|&s| !(s > 0.1 * min_initial)) {
            let failed_at = level as f64 * h;
            return Err(Error::ChartNotInjective {
                failed_at,
                suggested: 0.8 * failed_at,
                detail: format!(
                    "adjacent geodesics {bad} and {} collapsed to separation {:.3e} \
                     (initial minimum {:.3e})",
                    (bad + 1) % nj,
                    sep[bad],
                    min_initial
                ),
            });
        }
    }

    // Richardson: endpoint displacement between h and 2h runs, slice norm.
    let mut rich = 0.0f64;
    for (j, (x2, _)) in coarse.iter().enumerate() {
        let xf: Vec<f64> = (0..d).map(|al| points[[N_RHO, j, al]]).collect();
        let s = metric.sample(&Point::new(chartify(&xf)))?;
        let hm = s.slice_metric();
        let diff: Vec<f64> = (0..d).map(|al| xf[al] - x2[al]).collect();
        rich = rich.max(quad_form(&hm, &diff, &diff).sqrt() / 15.0);
    }

    Ok(GaussianChart {
        depth: r_max,
        h_rho: h,
        omegas: omegas.to_vec(),
        angular: metric.angular(),
        dim: metric.dim(),
        points,
        velocities,
        unit_speed_defect: unit_defect,
        richardson_error: rich,
    })
}

impl GaussianChart {
    pub fn n_levels(&self) -> usize {
        N_RHO + 1
    }
    pub fn n_omega(&self) -> usize {
        self.omegas.len()
    }
    pub fn rho(&self, level: usize) -> f64 {
        level as f64 * self.h_rho
    }

    /// Spatial chart coordinates of the lattice node.
    pub fn position(&self, level: usize, j: usize) -> Vec<f64> {
        (0..self.dim - 1)
            .map(|al| self.points[[level, j, al]])
            .collect()
    }

    /// Geodesic velocity `dc/dρ` at the lattice node.
    pub fn velocity(&self, level: usize, j: usize) -> Vec<f64> {
        (0..self.dim - 1)
            .map(|al| self.velocities[[level, j, al]])
            .collect()
    }

    /// Metric components in the adapted boundary frame
    /// `(∂t, u, ∂Θ[, ∂Φ])` at the boundary node `j` (depth ρ = 0), returned
    /// as a derivative-free sample. By construction `G_ρρ = −1` and
    /// `G_ρΘ = G_ρΦ = 0`, while `G_tρ` keeps the slicing shift.
    pub fn adapted_boundary_sample(&self, metric: &dyn Metric, j: usize) -> Result<MetricSample> {
        let d = self.dim;
        let p = Point::spatial(metric.inner_radius(), self.omegas[j], d);
        let s = metric.sample(&p)?;
        // Frame columns in chart coordinates: basis[a][i] = (b_a)^i.
        let mut basis = Array2::<f64>::zeros((d, d));
        basis[[0, 0]] = 1.0;
        for al in 0..d - 1 {
            basis[[1, al + 1]] = self.velocities[[0, j, al]];
        }
        for a in 2..d {
            basis[[a, a]] = 1.0;
        }
        let mut g = Array2::<f64>::zeros((d, d));
        for a in 0..d {
            for b in 0..d {
                let mut acc = 0.0;
                for i in 0..d {
                    for k in 0..d {
                        acc += s.g[[i, k]] * basis[[a, i]] * basis[[b, k]];
                    }
                }
                g[[a, b]] = acc;
            }
        }
        MetricSample::from_parts(g, Array3::zeros((d, d, d)))
    }

    /// Verify the Gauss conditions on the integrated lattice.
    pub fn pullback(&self, metric: &dyn Metric) -> Result<PullbackReport> {
        let d = self.dim - 1;
        let nj = self.n_omega();
        let mut unit = 0.0f64;
        let mut mixed = 0.0f64;
        for level in 0..=N_RHO {
            for j in 0..nj {
                let x = self.position(level, j);
                let u = self.velocity(level, j);
                let s = metric.sample(&Point::new(chartify(&x)))?;
                let hm = s.slice_metric();
                unit = unit.max((quad_form(&hm, &u, &u) - 1.0).abs());

                let un = quad_form(&hm, &u, &u).sqrt();
                // Angular tangent by centered difference across j.
                if nj >= 3 {
                    if let Some(t) = self.angular_tangent(level, j) {
                        let tn = quad_form(&hm, &t, &t).sqrt();
                        if tn > 0.0 {
                            mixed = mixed.max(quad_form(&hm, &u, &t).abs() / (un * tn));
                        }
                    }
                }
                // Azimuthal direction in 4D charts is itself a variation
                // field of the geodesic family.
                if d == 3 {
                    let mut ephi = vec![0.0; d];
                    ephi[2] = 1.0;
                    let tn = quad_form(&hm, &ephi, &ephi).sqrt();
                    mixed = mixed.max(quad_form(&hm, &u, &ephi).abs() / (un * tn));
                }
            }
        }
        Ok(PullbackReport {
            max_unit_defect: unit,
            max_mixed: mixed,
        })
    }

    fn angular_tangent(&self, level: usize, j: usize) -> Option<Vec<f64>> {
        let nj = self.n_omega();
        let d = self.dim - 1;
        let (jp, jm, dom) = match self.angular {
            AngularKind::Periodic { period } => {
                let jp = (j + 1) % nj;
                let jm = (j + nj - 1) % nj;
                (jp, jm, 2.0 * period / nj as f64)
            }
            AngularKind::PolarAxis => {
                if j == 0 || j + 1 == nj {
                    return None;
                }
                (j + 1, j - 1, self.omegas[j + 1] - self.omegas[j - 1])
            }
        };
        let mut t = vec![0.0; d];
        for al in 0..d {
            let mut diff = self.points[[level, jp, al]] - self.points[[level, jm, al]];
            // Angle-valued components may wrap.
            if al == 1 && matches!(self.angular, AngularKind::Periodic { .. }) {
                diff = wrap_symmetric(diff, 2.0 * std::f64::consts::PI);
            }
            if al == 2 {
                diff = wrap_symmetric(diff, 2.0 * std::f64::consts::PI);
            }
            t[al] = diff / dom;
        }
        Some(t)
    }

    /// Nearest-lattice inverse: chart coordinates `(ρ, Ω_j)` of the node
    /// closest to the spatial point, refined parabolically along ρ. Exact up
    /// to lattice resolution for points lying on a chart geodesic.
    pub fn locate(&self, spatial: &[f64]) -> Option<(f64, f64)> {
        let d = self.dim - 1;
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for level in 0..=N_RHO {
            for j in 0..self.n_omega() {
                let mut dist = 0.0;
                for al in 0..d {
                    let mut diff = spatial[al] - self.points[[level, j, al]];
                    if al >= 1 {
                        diff = wrap_symmetric(diff, 2.0 * std::f64::consts::PI);
                    }
                    dist += diff * diff;
                }
                if dist < best.0 {
                    best = (dist, level, j);
                }
            }
        }
        if !best.0.is_finite() {
            return None;
        }
        let (_, level, j) = best;
        // Parabolic refinement along the geodesic.
        let eval = |l: usize| -> f64 {
            let mut dist = 0.0;
            for al in 0..d {
                let mut diff = spatial[al] - self.points[[l, j, al]];
                if al >= 1 {
                    diff = wrap_symmetric(diff, 2.0 * std::f64::consts::PI);
                }
                dist += diff * diff;
            }
            dist
        };
        let rho = if level > 0 && level < N_RHO {
            let (fm, f0, fp) = (eval(level - 1), eval(level), eval(level + 1));
            let denom = fm - 2.0 * f0 + fp;
            let shift = if denom.abs() > 1e-300 {
                (0.5 * (fm - fp) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            (level as f64 + shift) * self.h_rho
        } else {
            level as f64 * self.h_rho
        };
        Some((rho, self.omegas[j]))
    }
}

/// One RK4 step of the slice geodesic equation.
fn rk4_step(metric: &dyn Metric, x: &mut [f64], u: &mut [f64], h: f64) -> Result<()> {
    let d = x.len();
    let f = |x: &[f64], u: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let gamma = super::slice_christoffels(metric, &Point::new(chartify(x)))?;
        let mut du = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for a in 0..d {
                for b in 0..d {
                    acc += gamma[[i, a, b]] * u[a] * u[b];
                }
            }
            du[i] = -acc;
        }
        Ok((u.to_vec(), du))
    };
    let (k1x, k1u) = f(x, u)?;
    let (x2, u2) = advanced(x, u, &k1x, &k1u, 0.5 * h);
    let (k2x, k2u) = f(&x2, &u2)?;
    let (x3, u3) = advanced(x, u, &k2x, &k2u, 0.5 * h);
    let (k3x, k3u) = f(&x3, &u3)?;
    let (x4, u4) = advanced(x, u, &k3x, &k3u, h);
    let (k4x, k4u) = f(&x4, &u4)?;
    for i in 0..d {
        x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        u[i] += h / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
    }
    Ok(())
}

fn advanced(x: &[f64], u: &[f64], kx: &[f64], ku: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
    let xs = x.iter().zip(kx).map(|(a, k)| a + s * k).collect();
    let us = u.iter().zip(ku).map(|(a, k)| a + s * k).collect();
    (xs, us)
}

/// Spatial coordinates → spacetime chart point on the t = 0 slice.
fn chartify(x: &[f64]) -> Vec<f64> {
    let mut coords = vec![0.0; x.len() + 1];
    coords[1..].copy_from_slice(x);
    coords
}

fn quad_form(h: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += h[[i, j]] * a[i] * b[j];
        }
    }
    acc
}

fn wrap_symmetric(x: f64, period: f64) -> f64 {
    let mut y = x % period;
    if y > 0.5 * period {
        y -= period;
    }
    if y < -0.5 * period {
        y += period;
    }
    y
}

fn domain_exit(rho: f64, j: usize, e: &Error) -> Error {
    Error::ChartNotInjective {
        failed_at: rho,
        suggested: 0.8 * rho,
        detail: format!("geodesic {j} left the chart domain at ρ = {rho:.4}: {e}"),
    }
}

/// Slice-metric separations of angularly adjacent geodesics at one level.
fn adjacent_separations(
    metric: &dyn Metric,
    points: &Array3<f64>,
    level: usize,
    nj: usize,
    d: usize,
) -> Result<Vec<f64>> {
    if nj < 2 {
        return Ok(vec![f64::INFINITY]);
    }
    let periodic = matches!(metric.angular(), AngularKind::Periodic { .. });
    let pairs: Vec<(usize, usize)> = if periodic {
        (0..nj).map(|j| (j, (j + 1) % nj)).collect()
    } else {
        (0..nj - 1).map(|j| (j, j + 1)).collect()
    };
    let mut out = Vec::with_capacity(pairs.len());
    for (j, jn) in pairs {
        let x: Vec<f64> = (0..d).map(|al| points[[level, j, al]]).collect();
        let s = metric.sample(&Point::new(chartify(&x)))?;
        let hm = s.slice_metric();
        let mut diff = vec![0.0; d];
        for al in 0..d {
            let mut dd = points[[level, jn, al]] - points[[level, j, al]];
            if al >= 1 {
                dd = wrap_symmetric(dd, 2.0 * std::f64::consts::PI);
            }
            diff[al] = dd;
        }
        out.push(quad_form(&hm, &diff, &diff).sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{closures, Metric};
    use super::*;

    fn circle_nodes(n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
            .collect()
    }

    #[test]
    fn flat_chart_is_radial_lines() {
        let metric = closures::flat_polar(1.0).unwrap();
        let omegas = circle_nodes(8);
        let chart = gaussian_normal_chart(&metric, &omegas, 2.0).unwrap();
        assert!(chart.unit_speed_defect < 1e-12);
        assert!(chart.richardson_error < 1e-12);
        for level in [0, 100, 256] {
            for (j, &om) in omegas.iter().enumerate() {
                let x = chart.position(level, j);
                assert!((x[0] - (1.0 + chart.rho(level))).abs() < 1e-12);
                assert!((x[1] - om).abs() < 1e-12);
                let u = chart.velocity(level, j);
                assert!((u[0] - 1.0).abs() < 1e-12 && u[1].abs() < 1e-12);
            }
        }
        // Pullback angular metric: g_ΩΩ = (r0 + ρ)², checked via tangent.
        let rep = chart.pullback(&metric).unwrap();
        assert!(rep.max_unit_defect < 1e-12);
        assert!(rep.max_mixed < 1e-12);
        let t = chart.angular_tangent(128, 3).unwrap();
        let r = 1.0 + chart.rho(128);
        let s = metric
            .sample(&Point::spatial(r, chart.omegas[3], 3))
            .unwrap();
        let gtt = quad_form(&s.slice_metric(), &t, &t);
        // Radial lines keep θ nodal, so the coordinate tangent is exactly
        // ∂θ and the pulled-back angular metric is (r0 + ρ)².
        let expected = r * r;
        assert!(
            (gtt - expected).abs() < 1e-10 * expected,
            "g_ΩΩ = {gtt} vs {expected}"
        );
    }

    #[test]
    fn sphere_slice_chart_fails_injectivity_near_focal_point() {
        let metric = closures::sphere_slice(1.0, 0.3).unwrap();
        let omegas = circle_nodes(16);
        let err = gaussian_normal_chart(&metric, &omegas, 3.0).unwrap_err();
        match err {
            Error::ChartNotInjective {
                failed_at,
                suggested,
                ..
            } => {
                // Focal point at ρ = π − 0.3 ≈ 2.84; collapse detected near it.
                assert!(
                    failed_at > 2.5 && failed_at < 2.9,
                    "failed_at = {failed_at}"
                );
                assert!((suggested - 0.8 * failed_at).abs() < 1e-12);
            }
            other => panic!("unexpected error {other}"),
        }
        // Shrinking the depth below the focal distance succeeds.
        let chart = gaussian_normal_chart(&metric, &omegas, 2.0).unwrap();
        assert!(chart.unit_speed_defect < 1e-10);
    }

    #[test]
    fn kerr_chart_satisfies_gauss_conditions() {
        let params = closures::KerrParams::new(1.0, 0.6, 0.0, 3.0).unwrap();
        let metric = closures::kerr_ef(params).unwrap();
        let nj = 12;
        let omegas: Vec<f64> = (0..nj)
            .map(|j| std::f64::consts::PI * (j as f64 + 0.5) / nj as f64)
            .collect();
        let chart = gaussian_normal_chart(&metric, &omegas, 1.5).unwrap();
        assert!(chart.unit_speed_defect < 1e-9, "{}", chart.unit_speed_defect);
        assert!(chart.richardson_error < 1e-8);
        let rep = chart.pullback(&metric).unwrap();
        assert!(rep.max_unit_defect < 1e-9);
        // Mixed terms limited by the O(h²) angular differencing.
        assert!(rep.max_mixed < 5e-3, "mixed = {}", rep.max_mixed);

        // Adapted boundary frame: G_ρρ = −1, G_ρΘ = G_ρΦ = 0, G_tρ ≠ 0.
        for j in [0, 5, 11] {
            let s = chart.adapted_boundary_sample(&metric, j).unwrap();
            assert!((s.g[[1, 1]] + 1.0).abs() < 1e-12);
            assert!(s.g[[1, 2]].abs() < 1e-12);
            assert!(s.g[[1, 3]].abs() < 1e-12);
            assert!(s.g[[0, 1]].abs() > 1e-3, "EF slicing shift expected");
            assert!(s.g[[0, 3]].abs() > 1e-3, "frame dragging expected");
            // Inverse has the bordered structure: G^{ρΘ} = 0, G^{ρΦ} ≠ 0.
            assert!(s.ginv[[1, 2]].abs() < 1e-12);
            assert!(s.ginv[[1, 3]].abs() > 1e-6);
        }
    }

    #[test]
    fn locate_inverts_lattice_points() {
        let metric = closures::ef_schwarzschild_3d(0.4, 1.2).unwrap();
        let omegas = circle_nodes(10);
        let chart = gaussian_normal_chart(&metric, &omegas, 1.0).unwrap();
        for (level, j) in [(0, 0), (77, 3), (200, 9)] {
            let x = chart.position(level, j);
            let (rho, om) = chart.locate(&x).unwrap();
            assert!((rho - chart.rho(level)).abs() < 0.51 * chart.h_rho);
            assert!((om - chart.omegas[j]).abs() < 1e-12);
        }
    }
}
