//! Built-in metric closures.
//!
//! All charts are horizon-penetrating where horizons exist (advanced
//! Eddington–Finkelstein time) and use coordinates `(t, r, θ[, φ])`. The Kerr
//! family optionally co-rotates the azimuth, `φ' = φ − b t`, which turns the
//! chart Killing field `∂t` into the mix `∂τ + b ∂φ` of the static chart.

use ndarray::{Array2, Array3};

use super::{AngularKind, Metric, MetricSample, Point};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Parameters of the Kerr family in the advanced EF chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrParams {
    pub mass: f64,
    pub spin: f64,
    /// Co-rotation coefficient b of the chart (`φ' = φ − b t`).
    pub mix: f64,
    /// Inner boundary radius; must avoid the horizon radii.
    pub r0: f64,
}

impl KerrParams {
    pub fn new(mass: f64, spin: f64, mix: f64, r0: f64) -> Result<KerrParams> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass {mass} must be > 0")));
        }
        if spin.abs() >= mass {
            return Err(Error::InvalidParameter(format!(
                "spin |{spin}| must be < mass {mass}"
            )));
        }
        if !(r0 > 0.0) {
            return Err(Error::InvalidParameter(format!("r0 {r0} must be > 0")));
        }
        if !mix.is_finite() {
            return Err(Error::InvalidParameter("mix must be finite".into()));
        }
        let disc = (mass * mass - spin * spin).sqrt();
        for rh in [mass - disc, mass + disc] {
            if (r0 - rh).abs() <= 1e-10 * mass {
                return Err(Error::InvalidParameter(format!(
                    "r0 = {r0} coincides with a horizon radius {rh}"
                )));
            }
        }
        Ok(KerrParams {
            mass,
            spin,
            mix,
            r0,
        })
    }
}

/// Kerr metric in the advanced EF chart, optionally co-rotated.
pub struct KerrEf {
    params: KerrParams,
}

pub fn kerr_ef(params: KerrParams) -> Result<KerrEf> {
    Ok(KerrEf { params })
}

/// Schwarzschild in advanced EF coordinates: Kerr with `a = 0`, `b = 0`.
pub fn ef_schwarzschild(mass: f64, r0: f64) -> Result<KerrEf> {
    Ok(KerrEf {
        params: KerrParams::new(mass, 0.0, 0.0, r0)?,
    })
}

impl Metric for KerrEf {
    fn dim(&self) -> usize {
        4
    }
    fn name(&self) -> &'static str {
        "kerr_ef"
    }

    fn sample(&self, p: &Point) -> Result<MetricSample> {
        let KerrParams {
            mass: m,
            spin: a,
            mix: b,
            ..
        } = self.params;
        let r = p.r();
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kerr_ef: r = {r} outside (0, ∞)"
            )));
        }
        let (s, c) = p.theta().sin_cos();
        if s.abs() < 1e-12 {
            return Err(Error::InvalidParameter(
                "kerr_ef: polar axis excluded from the chart".into(),
            ));
        }
        let s2 = s * s;
        let sigma = r * r + a * a * c * c;
        let f = 2.0 * m * r / sigma;
        let df_dr = 2.0 * m * (a * a * c * c - r * r) / (sigma * sigma);
        let df_dth = 4.0 * m * r * a * a * c * s / (sigma * sigma);
        let dsig_dr = 2.0 * r;
        let dsig_dth = -2.0 * a * a * c * s;

        // Static-azimuth components and their (r, θ) derivatives.
        let g00 = 1.0 - f;
        let g01 = -f;
        let g03 = f * a * s2;
        let g11 = -(1.0 + f);
        let g13 = (1.0 + f) * a * s2;
        let g22 = -sigma;
        let g33 = -(sigma + (1.0 + f) * a * a * s2) * s2;

        let mut d = [[0.0f64; 7]; 2]; // rows: ∂r, ∂θ; cols: 00,01,03,11,13,22,33
        for (k, (dfk, dsk, ds2k)) in [
            (df_dr, dsig_dr, 0.0),
            (df_dth, dsig_dth, 2.0 * s * c),
        ]
        .iter()
        .enumerate()
        {
            d[k][0] = -dfk;
            d[k][1] = -dfk;
            d[k][2] = a * (dfk * s2 + f * ds2k);
            d[k][3] = -dfk;
            d[k][4] = a * (dfk * s2 + (1.0 + f) * ds2k);
            d[k][5] = -dsk;
            d[k][6] = -(dsk + dfk * a * a * s2 + (1.0 + f) * a * a * ds2k) * s2
                - (sigma + (1.0 + f) * a * a * s2) * ds2k;
        }

        // Co-rotation mix: g'_00 = g00 + 2b g03 + b² g33, g'_01 = g01 + b g13,
        // g'_03 = g03 + b g33; spatial block unchanged.
        let mut g = Array2::<f64>::zeros((4, 4));
        g[[0, 0]] = g00 + 2.0 * b * g03 + b * b * g33;
        g[[0, 1]] = g01 + b * g13;
        g[[0, 3]] = g03 + b * g33;
        g[[1, 1]] = g11;
        g[[1, 3]] = g13;
        g[[2, 2]] = g22;
        g[[3, 3]] = g33;
        g[[1, 0]] = g[[0, 1]];
        g[[3, 0]] = g[[0, 3]];
        g[[3, 1]] = g[[1, 3]];

        let mut dg = Array3::<f64>::zeros((4, 4, 4));
        for k in 0..2 {
            let [d00, d01, d03, d11, d13, d22, d33] = d[k];
            let kk = k + 1;
            dg[[kk, 0, 0]] = d00 + 2.0 * b * d03 + b * b * d33;
            dg[[kk, 0, 1]] = d01 + b * d13;
            dg[[kk, 0, 3]] = d03 + b * d33;
            dg[[kk, 1, 1]] = d11;
            dg[[kk, 1, 3]] = d13;
            dg[[kk, 2, 2]] = d22;
            dg[[kk, 3, 3]] = d33;
            dg[[kk, 1, 0]] = dg[[kk, 0, 1]];
            dg[[kk, 3, 0]] = dg[[kk, 0, 3]];
            dg[[kk, 3, 1]] = dg[[kk, 1, 3]];
        }
        MetricSample::from_parts(g, dg)
    }

    fn inner_radius(&self) -> f64 {
        self.params.r0
    }
    fn radial_domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn angular(&self) -> AngularKind {
        AngularKind::PolarAxis
    }
}

/// Flat 2+1 metric in polar coordinates: `diag(1, −1, −r²)`.
pub struct FlatPolar {
    r0: f64,
}

pub fn flat_polar(r0: f64) -> Result<FlatPolar> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("r0 {r0} must be > 0")));
    }
    Ok(FlatPolar { r0 })
}

impl Metric for FlatPolar {
    fn dim(&self) -> usize {
        3
    }
    fn name(&self) -> &'static str {
        "flat_polar"
    }
    fn sample(&self, p: &Point) -> Result<MetricSample> {
        let r = p.r();
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "flat_polar: r = {r} outside (0, ∞)"
            )));
        }
        let mut g = Array2::<f64>::zeros((3, 3));
        g[[0, 0]] = 1.0;
        g[[1, 1]] = -1.0;
        g[[2, 2]] = -r * r;
        let mut dg = Array3::<f64>::zeros((3, 3, 3));
        dg[[1, 2, 2]] = -2.0 * r;
        MetricSample::from_parts(g, dg)
    }
    fn inner_radius(&self) -> f64 {
        self.r0
    }
    fn radial_domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn angular(&self) -> AngularKind {
        AngularKind::Periodic { period: TWO_PI }
    }
}

/// Flat 2+1 metric in Cartesian coordinates `(t, x, y)` with `y` periodic of
/// the given extent — a strip used for dispersion studies.
pub struct FlatCartesian {
    extent_y: f64,
}

pub fn flat_cartesian(extent_y: f64) -> Result<FlatCartesian> {
    if !(extent_y > 0.0) {
        return Err(Error::InvalidParameter("extent must be > 0".into()));
    }
    Ok(FlatCartesian { extent_y })
}

impl Metric for FlatCartesian {
    fn dim(&self) -> usize {
        3
    }
    fn name(&self) -> &'static str {
        "flat_cartesian"
    }
    fn sample(&self, _p: &Point) -> Result<MetricSample> {
        let mut g = Array2::<f64>::zeros((3, 3));
        g[[0, 0]] = 1.0;
        g[[1, 1]] = -1.0;
        g[[2, 2]] = -1.0;
        MetricSample::from_parts(g, Array3::zeros((3, 3, 3)))
    }
    fn inner_radius(&self) -> f64 {
        0.0
    }
    fn radial_domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn angular(&self) -> AngularKind {
        AngularKind::Periodic {
            period: self.extent_y,
        }
    }
}

/// 2+1 analogue of the EF-Schwarzschild chart with horizon at `r = 2M`:
/// `g_tt = 1 − 2M/r`, `g_tr = −2M/r`, `g_rr = −(1 + 2M/r)`, `g_θθ = −r²`.
pub struct EfSchwarzschild3d {
    mass: f64,
    r0: f64,
}

pub fn ef_schwarzschild_3d(mass: f64, r0: f64) -> Result<EfSchwarzschild3d> {
    if !(mass > 0.0) || !(r0 > 0.0) {
        return Err(Error::InvalidParameter(
            "ef_schwarzschild_3d: mass and r0 must be > 0".into(),
        ));
    }
    Ok(EfSchwarzschild3d { mass, r0 })
}

impl Metric for EfSchwarzschild3d {
    fn dim(&self) -> usize {
        3
    }
    fn name(&self) -> &'static str {
        "ef_schwarzschild_3d"
    }
    fn sample(&self, p: &Point) -> Result<MetricSample> {
        let r = p.r();
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ef_schwarzschild_3d: r = {r} outside (0, ∞)"
            )));
        }
        let f = 2.0 * self.mass / r;
        let df = -2.0 * self.mass / (r * r);
        let mut g = Array2::<f64>::zeros((3, 3));
        g[[0, 0]] = 1.0 - f;
        g[[0, 1]] = -f;
        g[[1, 0]] = -f;
        g[[1, 1]] = -(1.0 + f);
        g[[2, 2]] = -r * r;
        let mut dg = Array3::<f64>::zeros((3, 3, 3));
        dg[[1, 0, 0]] = -df;
        dg[[1, 0, 1]] = -df;
        dg[[1, 1, 0]] = -df;
        dg[[1, 1, 1]] = -df;
        dg[[1, 2, 2]] = -2.0 * r;
        MetricSample::from_parts(g, dg)
    }
    fn inner_radius(&self) -> f64 {
        self.r0
    }
    fn radial_domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn angular(&self) -> AngularKind {
        AngularKind::Periodic { period: TWO_PI }
    }
}

/// Static product metric whose slice is the round 2-sphere of radius `R`,
/// with `r` the arc length from a pole: `diag(1, −1, −R² sin²(r/R))`.
/// Radial geodesics from any circle refocus at `r = πR`, so Gaussian charts
/// deeper than the focal distance must fail injectivity.
pub struct SphereSlice {
    radius: f64,
    r0: f64,
}

pub fn sphere_slice(radius: f64, r0: f64) -> Result<SphereSlice> {
    if !(radius > 0.0) || !(r0 > 0.0) || r0 >= std::f64::consts::PI * radius {
        return Err(Error::InvalidParameter(
            "sphere_slice: need 0 < r0 < πR".into(),
        ));
    }
    Ok(SphereSlice { radius, r0 })
}

impl Metric for SphereSlice {
    fn dim(&self) -> usize {
        3
    }
    fn name(&self) -> &'static str {
        "sphere_slice"
    }
    fn sample(&self, p: &Point) -> Result<MetricSample> {
        let r = p.r();
        let lim = std::f64::consts::PI * self.radius;
        if !(r > 0.0 && r < lim) {
            return Err(Error::InvalidParameter(format!(
                "sphere_slice: r = {r} outside (0, {lim})"
            )));
        }
        let s = (r / self.radius).sin();
        let c = (r / self.radius).cos();
        let mut g = Array2::<f64>::zeros((3, 3));
        g[[0, 0]] = 1.0;
        g[[1, 1]] = -1.0;
        g[[2, 2]] = -self.radius * self.radius * s * s;
        let mut dg = Array3::<f64>::zeros((3, 3, 3));
        dg[[1, 2, 2]] = -2.0 * self.radius * s * c;
        MetricSample::from_parts(g, dg)
    }
    fn inner_radius(&self) -> f64 {
        self.r0
    }
    fn radial_domain(&self) -> (f64, f64) {
        (0.0, std::f64::consts::PI * self.radius)
    }
    fn angular(&self) -> AngularKind {
        AngularKind::Periodic { period: TWO_PI }
    }
}
