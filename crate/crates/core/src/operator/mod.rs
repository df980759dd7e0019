//! Discrete Dirac Hamiltonian on a polar grid with azimuthal mode reduction.
//!
//! The operator realizes H = −(γ^t)⁻¹(iγ^α(∂_α + σ_α) + iγ^t σ_t + B − m)
//! per azimuthal mode (∂_φ → ik), discretized with second-order central
//! differences (one-sided second order at faces, fourth order available in
//! the interior behind a flag). The inner boundary condition eliminates the
//! range of the chiral projector P = (i n̸ + 1)/2 at the r = r0 face; the
//! eliminated ("reduced") matrix is then symmetrized in the quadrature
//! weights. Weights realize the slice measure `√(det g_N) h_r h_θ`, which
//! together with the gauge identity `S ν̸ = 1` makes the discrete slice
//! product the plain weighted `ψ†φ` sum.

pub mod symbol;

use std::sync::Arc;

use ndarray::Array2;

use crate::geometry::{AngularKind, Metric, MetricSample, Point};
use crate::linalg::{Csr, max_abs};
use crate::spinor::{
    build_vielbein, curved_gammas, gamma_t_inv, spin_connection, CliffordRep,
};
use crate::{Error, Result, C64};

pub use symbol::{locate_horizons, principal_symbol, SymbolSample};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Finite-difference order of interior stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    Two,
    Four,
}

/// Tensor-product spatial grid: uniform radial nodes `r0..r_outer` and
/// angular nodes offset from poles (4D) or periodic (3D charts).
#[derive(Debug, Clone)]
pub struct Grid {
    pub metric_dim: usize,
    /// Radial interval count; bounded grids carry `nr + 1` nodes.
    pub nr: usize,
    pub ntheta: usize,
    pub r0: f64,
    pub r_outer: f64,
    /// Azimuthal mode (4D charts only; must be 0 in 3D).
    pub k: i64,
    /// Test-only closure of the radial direction into a circle (no faces).
    pub radial_periodic: bool,
    pub stencil: StencilOrder,
    pub angular: AngularKind,
    pub rs: Vec<f64>,
    pub thetas: Vec<f64>,
    pub h_r: f64,
    pub h_theta: f64,
}

impl Grid {
    pub fn new(
        metric: &dyn Metric,
        nr: usize,
        ntheta: usize,
        r_outer: f64,
        k: i64,
    ) -> Result<Grid> {
        Self::build(metric, nr, ntheta, r_outer, k, false)
    }

    /// Radially periodic variant used by dispersion studies: `nr` nodes on a
    /// circle of circumference `r_outer − r0`, no boundary faces.
    pub fn periodic_radial(
        metric: &dyn Metric,
        nr: usize,
        ntheta: usize,
        r_outer: f64,
        k: i64,
    ) -> Result<Grid> {
        Self::build(metric, nr, ntheta, r_outer, k, true)
    }

    fn build(
        metric: &dyn Metric,
        nr: usize,
        ntheta: usize,
        r_outer: f64,
        k: i64,
        radial_periodic: bool,
    ) -> Result<Grid> {
        let r0 = metric.inner_radius();
        if !(r_outer > r0) {
            return Err(Error::Grid(format!(
                "r_outer = {r_outer} must exceed r0 = {r0}"
            )));
        }
        if nr < 4 || ntheta < 1 {
            return Err(Error::Grid("need nr ≥ 4 and ntheta ≥ 1".into()));
        }
        let dim = metric.dim();
        if dim == 3 && k != 0 {
            return Err(Error::Grid(
                "azimuthal mode k must be 0 on 2+1 dimensional charts".into(),
            ));
        }
        let n_rad = if radial_periodic { nr } else { nr + 1 };
        let h_r = (r_outer - r0) / nr as f64;
        let rs: Vec<f64> = (0..n_rad).map(|i| r0 + i as f64 * h_r).collect();
        let angular = metric.angular();
        let (h_theta, thetas) = match angular {
            AngularKind::PolarAxis => {
                let h = std::f64::consts::PI / ntheta as f64;
                (h, (0..ntheta).map(|j| (j as f64 + 0.5) * h).collect())
            }
            AngularKind::Periodic { period } => {
                let h = period / ntheta as f64;
                (h, (0..ntheta).map(|j| j as f64 * h).collect())
            }
        };
        Ok(Grid {
            metric_dim: dim,
            nr,
            ntheta,
            r0,
            r_outer,
            k,
            radial_periodic,
            stencil: StencilOrder::Two,
            angular,
            rs,
            thetas,
            h_r,
            h_theta,
        })
    }

    pub fn with_stencil(mut self, stencil: StencilOrder) -> Grid {
        self.stencil = stencil;
        self
    }

    pub fn n_radial(&self) -> usize {
        self.rs.len()
    }
    pub fn n_nodes(&self) -> usize {
        self.n_radial() * self.ntheta
    }
    pub fn node_index(&self, ir: usize, it: usize) -> usize {
        ir * self.ntheta + it
    }
    pub fn node_point(&self, ir: usize, it: usize) -> Point {
        Point::spatial(self.rs[ir], self.thetas[it], self.metric_dim)
    }

    /// Node indices on the inner boundary face r = r0 (empty when periodic).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        if self.radial_periodic {
            Vec::new()
        } else {
            (0..self.ntheta).map(|it| self.node_index(0, it)).collect()
        }
    }

    /// Stencil for ∂_r at radial index `ir`: pairs `(ir', coeff)`.
    pub(crate) fn radial_stencil(&self, ir: usize) -> Vec<(usize, f64)> {
        let n = self.n_radial();
        let h = self.h_r;
        if self.radial_periodic {
            let wrap = |i: isize| -> usize { i.rem_euclid(n as isize) as usize };
            let i = ir as isize;
            return match self.stencil {
                StencilOrder::Two => vec![
                    (wrap(i - 1), -0.5 / h),
                    (wrap(i + 1), 0.5 / h),
                ],
                StencilOrder::Four => vec![
                    (wrap(i - 2), 1.0 / (12.0 * h)),
                    (wrap(i - 1), -8.0 / (12.0 * h)),
                    (wrap(i + 1), 8.0 / (12.0 * h)),
                    (wrap(i + 2), -1.0 / (12.0 * h)),
                ],
            };
        }
        // Wall rows use the two-point one-sided difference, which together
        // with the trapezoid end weights forms a summation-by-parts pair:
        // the radial flux defect then sits entirely in the wall fiber and is
        // annihilated exactly by the chiral reduction, so symmetrization does
        // not disturb eigenvalue convergence (the wider one-sided row does).
        if ir == 0 {
            return vec![(0, -1.0 / h), (1, 1.0 / h)];
        }
        if ir + 1 == n {
            return vec![(n - 2, -1.0 / h), (n - 1, 1.0 / h)];
        }
        one_dimensional_stencil(ir, n, h, self.stencil)
    }

    /// Stencil for ∂_θ at angular index `it`.
    pub(crate) fn angular_stencil(&self, it: usize) -> Vec<(usize, f64)> {
        let n = self.ntheta;
        let h = self.h_theta;
        if n == 1 {
            return Vec::new();
        }
        match self.angular {
            AngularKind::Periodic { .. } => {
                let wrap = |i: isize| -> usize { i.rem_euclid(n as isize) as usize };
                let i = it as isize;
                match self.stencil {
                    StencilOrder::Two => vec![
                        (wrap(i - 1), -0.5 / h),
                        (wrap(i + 1), 0.5 / h),
                    ],
                    StencilOrder::Four => vec![
                        (wrap(i - 2), 1.0 / (12.0 * h)),
                        (wrap(i - 1), -8.0 / (12.0 * h)),
                        (wrap(i + 1), 8.0 / (12.0 * h)),
                        (wrap(i + 2), -1.0 / (12.0 * h)),
                    ],
                }
            }
            AngularKind::PolarAxis => one_dimensional_stencil(it, n, h, self.stencil),
        }
    }
}

/// Bounded-interval first-derivative stencil: central in the interior,
/// one-sided second order at the faces, optional fourth order away from them.
pub(crate) fn one_dimensional_stencil(
    i: usize,
    n: usize,
    h: f64,
    order: StencilOrder,
) -> Vec<(usize, f64)> {
    if i == 0 {
        return vec![
            (0, -1.5 / h),
            (1, 2.0 / h),
            (2, -0.5 / h),
        ];
    }
    if i + 1 == n {
        return vec![
            (n - 1, 1.5 / h),
            (n - 2, -2.0 / h),
            (n - 3, 0.5 / h),
        ];
    }
    match order {
        StencilOrder::Four if i >= 2 && i + 2 < n => vec![
            (i - 2, 1.0 / (12.0 * h)),
            (i - 1, -8.0 / (12.0 * h)),
            (i + 1, 8.0 / (12.0 * h)),
            (i + 2, -1.0 / (12.0 * h)),
        ],
        _ => vec![(i - 1, -0.5 / h), (i + 1, 0.5 / h)],
    }
}

/// Matrix-valued potential of the zero-order block.
#[derive(Clone)]
pub enum PotentialB {
    None,
    /// Scalar Gaussian well `A exp(−(r − c)²/(2 σ²))` times the identity.
    GaussianScalar {
        amplitude: f64,
        center_r: f64,
        width: f64,
    },
    /// Arbitrary matrix field (used by diagnostics to inject hypothesis
    /// violations; spin symmetry is checked separately, not assumed).
    Custom(Arc<dyn Fn(&Point, &CliffordRep) -> Array2<C64> + Send + Sync>),
}

impl PotentialB {
    pub fn eval(&self, p: &Point, rep: &CliffordRep) -> Array2<C64> {
        match self {
            PotentialB::None => Array2::zeros((rep.f, rep.f)),
            PotentialB::GaussianScalar {
                amplitude,
                center_r,
                width,
            } => {
                let s = (p.r() - center_r) / width;
                let v = amplitude * (-0.5 * s * s).exp();
                Array2::eye(rep.f).mapv(|z: C64| z * v)
            }
            PotentialB::Custom(f) => f(p, rep),
        }
    }

    /// Spin symmetry `≺φ|Bψ≻ = ≺Bφ|ψ≻` ⇔ `(S B)† = S B`, sampled.
    pub fn validate_spin_symmetric(
        &self,
        rep: &CliffordRep,
        points: &[Point],
    ) -> Result<()> {
        for p in points {
            let b = self.eval(p, rep);
            let sb = rep.s.dot(&b);
            let defect = max_abs(&(&sb - &sb.t().mapv(|z| z.conj())));
            if defect > 1e-12 * max_abs(&sb).max(1.0) {
                return Err(Error::Invariant(format!(
                    "potential not spin-symmetric at r = {}, θ = {} (defect {defect:.2e})",
                    p.r(),
                    p.theta()
                )));
            }
        }
        Ok(())
    }
}

/// Chiral boundary data at one boundary node: the projector `P = (i n̸+1)/2`
/// and a plain-orthonormal basis `Q` of its kernel `{ψ : (n̸ − i)ψ = 0}`.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub p: Array2<C64>,
    pub q: Array2<C64>,
}

/// Build the boundary projector from the inner normal of the boundary
/// cylinder `R_t × {r = r0}` — the unit spacelike covector `−dr/√(−g^{rr})`,
/// orthogonal to the Killing field and to the face. The face must be
/// timelike: between horizons `g^{rr} ≥ 0` and no admissible reflecting
/// boundary exists there.
pub fn boundary_projector(rep: &CliffordRep, sample: &MetricSample) -> Result<BoundaryData> {
    boundary_projector_signed(rep, sample, 1.0)
}

/// Boundary data for a face whose domain lies at smaller radius (the far face
/// of a collar region): the inner normal points toward decreasing `r`.
pub fn boundary_projector_outer(
    rep: &CliffordRep,
    sample: &MetricSample,
) -> Result<BoundaryData> {
    boundary_projector_signed(rep, sample, -1.0)
}

fn boundary_projector_signed(
    rep: &CliffordRep,
    sample: &MetricSample,
    inward: f64,
) -> Result<BoundaryData> {
    let grr = sample.ginv[[1, 1]];
    if grr >= 0.0 {
        return Err(Error::Degenerate(format!(
            "boundary_projector: face is not timelike (g^rr = {grr:.6e} ≥ 0); \
             place the boundary outside the outer horizon or inside the inner one"
        )));
    }
    let vb = build_vielbein(sample)?;
    let gam = curved_gammas(rep, &vb);
    let f = rep.f;
    // n̸ = n_μ γ^μ with n_μ = ∓δ_μ^r / √(−g^{rr}); inner-pointing (n^r
    // toward the domain side).
    let nslash = gam[1].mapv(|z| z * (-inward / (-grr).sqrt()));
    // P = (i n̸ + 1)/2.
    let mut p = nslash.mapv(|z| z * c(0.0, 0.5));
    for i in 0..f {
        p[[i, i]] += 0.5;
    }
    // Kernel basis: orthonormalize the columns of (1 − P) with pivoting.
    let mut comp = p.mapv(|z| -z);
    for i in 0..f {
        comp[[i, i]] += 1.0;
    }
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for j in 0..f {
        let mut v: Vec<C64> = (0..f).map(|i| comp[[i, j]]).collect();
        for prev in &cols {
            let proj: C64 = prev.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for i in 0..f {
                v[i] -= proj * prev[i];
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            cols.push(v);
        }
    }
    if cols.len() != f / 2 {
        return Err(Error::Invariant(format!(
            "boundary_projector: kernel rank {} ≠ f/2 = {}",
            cols.len(),
            f / 2
        )));
    }
    let mut q = Array2::<C64>::zeros((f, f / 2));
    for (a, col) in cols.iter().enumerate() {
        for i in 0..f {
            q[[i, a]] = col[i];
        }
    }
    Ok(BoundaryData { p, q })
}

/// Galerkin elimination data: per-node either the identity (interior) or the
/// kernel isometry Q (boundary), with offsets into the reduced vector.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub f: usize,
    pub q: Vec<Option<Array2<C64>>>,
    pub offsets: Vec<usize>,
    pub reduced_len: usize,
}

impl Reduction {
    pub fn new(n_nodes: usize, f: usize, boundary: &[(usize, Array2<C64>)]) -> Reduction {
        let mut q: Vec<Option<Array2<C64>>> = vec![None; n_nodes];
        for (node, basis) in boundary {
            q[*node] = Some(basis.clone());
        }
        let mut offsets = Vec::with_capacity(n_nodes);
        let mut off = 0usize;
        for item in &q {
            offsets.push(off);
            off += match item {
                Some(b) => b.ncols(),
                None => f,
            };
        }
        Reduction {
            f,
            q,
            offsets,
            reduced_len: off,
        }
    }

    pub fn width(&self, node: usize) -> usize {
        match &self.q[node] {
            Some(b) => b.ncols(),
            None => self.f,
        }
    }

    /// Embedding S: reduced coordinates → full grid field.
    pub fn embed(&self, red: &[C64]) -> Vec<C64> {
        let n = self.q.len();
        let mut full = vec![c(0.0, 0.0); n * self.f];
        for node in 0..n {
            let off = self.offsets[node];
            match &self.q[node] {
                None => {
                    full[node * self.f..(node + 1) * self.f]
                        .copy_from_slice(&red[off..off + self.f]);
                }
                Some(b) => {
                    for i in 0..self.f {
                        let mut acc = c(0.0, 0.0);
                        for a in 0..b.ncols() {
                            acc += b[[i, a]] * red[off + a];
                        }
                        full[node * self.f + i] = acc;
                    }
                }
            }
        }
        full
    }

    /// Adjoint S†: full grid field → reduced coordinates (w-orthogonal
    /// projection expressed in the reduced basis).
    pub fn restrict(&self, full: &[C64]) -> Vec<C64> {
        let n = self.q.len();
        let mut red = vec![c(0.0, 0.0); self.reduced_len];
        for node in 0..n {
            let off = self.offsets[node];
            match &self.q[node] {
                None => {
                    red[off..off + self.f]
                        .copy_from_slice(&full[node * self.f..(node + 1) * self.f]);
                }
                Some(b) => {
                    for a in 0..b.ncols() {
                        let mut acc = c(0.0, 0.0);
                        for i in 0..self.f {
                            acc += b[[i, a]].conj() * full[node * self.f + i];
                        }
                        red[off + a] = acc;
                    }
                }
            }
        }
        red
    }

    /// Galerkin-reduce a full-grid operator: S† H S.
    pub fn reduce_matrix(&self, h: &Csr) -> Csr {
        let f = self.f;
        let mut trips: Vec<(usize, usize, C64)> = Vec::with_capacity(h.nnz() * 2);
        for (i, j, v) in h.triplet_iter() {
            let (ni, ci) = (i / f, i % f);
            let (nj, cj) = (j / f, j % f);
            match (&self.q[ni], &self.q[nj]) {
                (None, None) => {
                    trips.push((self.offsets[ni] + ci, self.offsets[nj] + cj, v));
                }
                (Some(bi), None) => {
                    for a in 0..bi.ncols() {
                        let coeff = bi[[ci, a]].conj();
                        if coeff != c(0.0, 0.0) {
                            trips.push((self.offsets[ni] + a, self.offsets[nj] + cj, coeff * v));
                        }
                    }
                }
                (None, Some(bj)) => {
                    for b in 0..bj.ncols() {
                        let coeff = bj[[cj, b]];
                        if coeff != c(0.0, 0.0) {
                            trips.push((self.offsets[ni] + ci, self.offsets[nj] + b, v * coeff));
                        }
                    }
                }
                (Some(bi), Some(bj)) => {
                    for a in 0..bi.ncols() {
                        for b in 0..bj.ncols() {
                            let coeff = bi[[ci, a]].conj() * v * bj[[cj, b]];
                            if coeff != c(0.0, 0.0) {
                                trips.push((self.offsets[ni] + a, self.offsets[nj] + b, coeff));
                            }
                        }
                    }
                }
            }
        }
        Csr::from_triplets(self.reduced_len, self.reduced_len, trips)
    }

    /// Reduced-space weights (the node weight repeated per retained basis
    /// column; the kernel bases are plain-orthonormal, so weights carry over).
    pub fn reduced_weights(&self, node_weights: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.reduced_len);
        for (node, &wn) in node_weights.iter().enumerate() {
            for _ in 0..self.width(node) {
                w.push(wn);
            }
        }
        w
    }
}

/// The assembled discrete Hamiltonian with its quadrature, boundary data and
/// the projector-eliminated (reduced) matrices.
pub struct DiscreteHamiltonian {
    pub grid: Grid,
    pub rep: CliffordRep,
    pub mass: f64,
    /// Full-grid operator (no boundary condition imposed).
    pub h_full: Csr,
    /// Node quadrature weights `√(det g_N) h_r h_θ`.
    pub node_weights: Vec<f64>,
    /// Weights per full-grid unknown (node weight repeated f times).
    pub w_full: Vec<f64>,
    pub boundary_nodes: Vec<usize>,
    pub boundary: Vec<BoundaryData>,
    pub reduction: Reduction,
    /// Reduced operator before symmetrization (w-Hermitian up to O(h)).
    pub h_red_raw: Csr,
    /// Reduced operator after ½(H + H^{†w}); exactly w-Hermitian.
    pub h_red: Csr,
    pub w_red: Vec<f64>,
}

/// Assemble the mode-reduced Dirac Hamiltonian on the grid.
pub fn assemble_hamiltonian(
    metric: &dyn Metric,
    rep: &CliffordRep,
    grid: &Grid,
    potential: &PotentialB,
    mass: f64,
) -> Result<DiscreteHamiltonian> {
    let d = metric.dim();
    if rep.dim != d || grid.metric_dim != d {
        return Err(Error::InvalidParameter(
            "assemble_hamiltonian: dimension mismatch between metric, rep and grid".into(),
        ));
    }
    let f = rep.f;
    let n_nodes = grid.n_nodes();
    let mut trips: Vec<(usize, usize, C64)> = Vec::new();
    let mut node_weights = vec![0.0; n_nodes];
    let mut boundary_nodes = Vec::new();
    let mut boundary = Vec::new();

    for ir in 0..grid.n_radial() {
        for it in 0..grid.ntheta {
            let node = grid.node_index(ir, it);
            let p = grid.node_point(ir, it);
            let sample = metric.sample(&p).map_err(|e| {
                Error::Grid(format!(
                    "assembly failed at node (r = {}, θ = {}): {e}",
                    p.r(),
                    p.theta()
                ))
            })?;
            let vb = build_vielbein(&sample)?;
            let gam = curved_gammas(rep, &vb);
            let sig = spin_connection(metric, rep, &p)?;
            let gtt = sample.ginv[[0, 0]];
            let gtinv = gamma_t_inv(&gam[0], gtt);

            // Trapezoid rule in r (half cells at the walls); the end weights
            // pair with the wall stencils of `radial_stencil`.
            let mut quad = grid.h_r * grid.h_theta;
            if !grid.radial_periodic && (ir == 0 || ir + 1 == grid.n_radial()) {
                quad *= 0.5;
            }
            node_weights[node] = sample.slice_volume_density() * quad;

            // First-order blocks C_α = −i (γ^t)⁻¹ γ^α.
            let c_r = gtinv.dot(&gam[1]).mapv(|z| z * c(0.0, -1.0));
            let c_th = gtinv.dot(&gam[2]).mapv(|z| z * c(0.0, -1.0));

            // Zero-order block gathers the spin connection, the azimuthal
            // mode, the potential and the mass.
            let mut inner = gam[1].dot(&sig[1]) + gam[2].dot(&sig[2]);
            inner += &gam[0].dot(&sig[0]);
            if d == 4 {
                let mut phi_part = sig[3].clone();
                for i in 0..f {
                    phi_part[[i, i]] += c(0.0, grid.k as f64);
                }
                inner += &gam[3].dot(&phi_part);
            }
            let mut z0 = inner.mapv(|z| z * c(0.0, 1.0));
            z0 += &potential.eval(&p, rep);
            for i in 0..f {
                z0[[i, i]] -= mass;
            }
            let z0 = gtinv.dot(&z0).mapv(|z| -z);

            let mut push_block = |other: usize, block: &Array2<C64>, scale: f64| {
                for i in 0..f {
                    for j in 0..f {
                        let v = block[[i, j]] * scale;
                        if v != c(0.0, 0.0) {
                            trips.push((node * f + i, other * f + j, v));
                        }
                    }
                }
            };

            for (ir2, coeff) in grid.radial_stencil(ir) {
                push_block(grid.node_index(ir2, it), &c_r, coeff);
            }
            for (it2, coeff) in grid.angular_stencil(it) {
                push_block(grid.node_index(ir, it2), &c_th, coeff);
            }
            push_block(node, &z0, 1.0);

            if ir == 0 && !grid.radial_periodic {
                let bd = boundary_projector(rep, &sample)?;
                boundary_nodes.push(node);
                boundary.push(bd);
            }
        }
    }

    let h_full = Csr::from_triplets(n_nodes * f, n_nodes * f, trips);
    let mut w_full = Vec::with_capacity(n_nodes * f);
    for &wn in &node_weights {
        for _ in 0..f {
            w_full.push(wn);
        }
    }

    let pairs: Vec<(usize, Array2<C64>)> = boundary_nodes
        .iter()
        .zip(&boundary)
        .map(|(&n, bd)| (n, bd.q.clone()))
        .collect();
    let reduction = Reduction::new(n_nodes, f, &pairs);
    let h_red_raw = reduction.reduce_matrix(&h_full);
    let w_red = reduction.reduced_weights(&node_weights);
    let h_red = h_red_raw.symmetrize_w(&w_red);

    Ok(DiscreteHamiltonian {
        grid: grid.clone(),
        rep: rep.clone(),
        mass,
        h_full,
        node_weights,
        w_full,
        boundary_nodes,
        boundary,
        reduction,
        h_red_raw,
        h_red,
        w_red,
    })
}

impl DiscreteHamiltonian {
    pub fn f(&self) -> usize {
        self.rep.f
    }

    /// Full-grid operator symmetrized in the w product (used by the interior
    /// evolution, where exact w-Hermiticity gives exact Crank–Nicolson
    /// unitarity; differs from `h_full` only at faces and at O(h²) interior).
    pub fn h_full_symmetrized(&self) -> Csr {
        self.h_full.symmetrize_w(&self.w_full)
    }
}

/// Max symmetry defect `|(ψ|Hφ)_w − (Hψ|φ)_w|` over random smooth reduced
/// pairs, normalized by the factor norms. Trials are low-frequency random
/// fields tapered to zero at the outer face, where no boundary condition is
/// imposed (the flux there is a property of the truncation, not the
/// operator).
pub fn symmetry_residual(
    dh: &DiscreteHamiltonian,
    use_raw: bool,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut rng = crate::linalg::seeded_rng(seed);
    let h = if use_raw { &dh.h_red_raw } else { &dh.h_red };
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let a = smooth_reduced_field(dh, &mut rng);
        let b = smooth_reduced_field(dh, &mut rng);
        let ha = h.apply_alloc(&a);
        let hb = h.apply_alloc(&b);
        let lhs = crate::linalg::dot_w(&dh.w_red, &a, &hb);
        let rhs = crate::linalg::dot_w(&dh.w_red, &ha, &b);
        let na = crate::linalg::norm_w(&dh.w_red, &a);
        let nb = crate::linalg::norm_w(&dh.w_red, &b);
        worst = worst.max((lhs - rhs).norm() / (na * nb));
    }
    worst
}

/// Smooth low-frequency random field in reduced coordinates. The field is
/// bent into the operator domain: near the inner face the P-component is
/// removed with a smooth profile so the boundary condition holds without a
/// grid-scale kink (the flux of data violating the condition is O(1) by
/// construction and would mask the discretization defect).
fn smooth_reduced_field(
    dh: &DiscreteHamiltonian,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<C64> {
    use rand::Rng;
    let grid = &dh.grid;
    let f = dh.f();
    let n_modes = 3usize;
    let qs: [i64; 3] = [0, 1, 2];
    // Random coefficients per (radial mode, angular mode, component).
    let mut coeff = vec![c(0.0, 0.0); n_modes * qs.len() * f];
    for z in coeff.iter_mut() {
        *z = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    let l = grid.r_outer - grid.r0;
    let mut full = vec![c(0.0, 0.0); grid.n_nodes() * f];
    for ir in 0..grid.n_radial() {
        let x = (grid.rs[ir] - grid.r0) / l;
        // Taper at the outer face only.
        let window = if grid.radial_periodic {
            1.0
        } else {
            (1.0 - x).powi(4)
        };
        for it in 0..grid.ntheta {
            let th = grid.thetas[it];
            let node = grid.node_index(ir, it);
            for comp in 0..f {
                let mut acc = c(0.0, 0.0);
                for pm in 0..n_modes {
                    let radial = (std::f64::consts::PI * pm as f64 * x).cos();
                    for (qi, &q) in qs.iter().enumerate() {
                        let phase = c(0.0, q as f64 * th).exp();
                        acc += coeff[(pm * qs.len() + qi) * f + comp] * radial * phase;
                    }
                }
                full[node * f + comp] = acc * window;
            }
        }
    }
    if !grid.radial_periodic {
        // Remove the P-component with a smooth radial profile (χ(0) = 1) so
        // the field satisfies the boundary condition as a smooth function.
        for ir in 0..grid.n_radial() {
            let x = (grid.rs[ir] - grid.r0) / l;
            let chi = (1.0 - x).powi(4);
            for it in 0..grid.ntheta {
                let p = &dh.boundary[it].p;
                let node = grid.node_index(ir, it);
                let mut pv = vec![c(0.0, 0.0); f];
                for i in 0..f {
                    for j in 0..f {
                        pv[i] += p[[i, j]] * full[node * f + j];
                    }
                }
                for i in 0..f {
                    full[node * f + i] -= pv[i] * chi;
                }
            }
        }
    }
    dh.reduction.restrict(&full)
}

/// Discrete compatibility residuals `‖P (H^p ψ0)|∂N‖_w` for p = 0..p_max,
/// evaluated with the full-grid operator and the boundary quadrature.
pub fn compatibility_residuals(
    dh: &DiscreteHamiltonian,
    psi0: &[C64],
    p_max: usize,
) -> Vec<f64> {
    let f = dh.f();
    let mut v = psi0.to_vec();
    let mut out = Vec::with_capacity(p_max + 1);
    for _ in 0..=p_max {
        let mut acc = 0.0;
        for (bi, &node) in dh.boundary_nodes.iter().enumerate() {
            let p = &dh.boundary[bi].p;
            let mut norm2 = 0.0;
            for i in 0..f {
                let mut pv = c(0.0, 0.0);
                for j in 0..f {
                    pv += p[[i, j]] * v[node * f + j];
                }
                norm2 += pv.norm_sqr();
            }
            acc += dh.node_weights[node] * norm2;
        }
        out.push(acc.sqrt());
        v = dh.h_full.apply_alloc(&v);
    }
    out
}

/// Smooth compactly supported spinor data: profile `exp(−1/(1−s²))` with
/// `s² = ((r−c_r)/ρ_r)² + ((θ−c_θ)/ρ_θ)²`, constant spinor direction.
pub fn make_bump_data(
    grid: &Grid,
    rep: &CliffordRep,
    center: (f64, f64),
    radius: (f64, f64),
    direction: &[C64],
) -> Result<Vec<C64>> {
    let f = rep.f;
    if direction.len() != f {
        return Err(Error::InitialData(format!(
            "spinor direction has {} components, expected {f}",
            direction.len()
        )));
    }
    let n = grid.n_nodes() * f;
    if radius.0 == 0.0 || radius.1 == 0.0 {
        return Ok(vec![c(0.0, 0.0); n]);
    }
    if !(radius.0 > 0.0 && radius.1 > 0.0) {
        return Err(Error::InitialData("bump radii must be ≥ 0".into()));
    }
    // Support must stay strictly inside the open interior.
    if !grid.radial_periodic {
        let margin = grid.h_r;
        if center.0 - radius.0 <= grid.r0 + margin
            || center.0 + radius.0 >= grid.r_outer - margin
        {
            return Err(Error::InitialData(format!(
                "bump support [{}, {}] touches the radial faces [{}, {}]",
                center.0 - radius.0,
                center.0 + radius.0,
                grid.r0,
                grid.r_outer
            )));
        }
    }
    if let AngularKind::PolarAxis = grid.angular {
        if center.1 - radius.1 <= 0.0 || center.1 + radius.1 >= std::f64::consts::PI {
            return Err(Error::InitialData(
                "bump support touches the polar axis".into(),
            ));
        }
    }
    let mut out = vec![c(0.0, 0.0); n];
    for ir in 0..grid.n_radial() {
        for it in 0..grid.ntheta {
            let node = grid.node_index(ir, it);
            let sr = (grid.rs[ir] - center.0) / radius.0;
            let mut sth = (grid.thetas[it] - center.1) / radius.1;
            if let AngularKind::Periodic { period } = grid.angular {
                let mut d = (grid.thetas[it] - center.1) % period;
                if d > 0.5 * period {
                    d -= period;
                }
                if d < -0.5 * period {
                    d += period;
                }
                sth = d / radius.1;
            }
            let s2 = sr * sr + sth * sth;
            if s2 < 1.0 {
                let amp = (-1.0 / (1.0 - s2)).exp();
                for comp in 0..f {
                    out[node * f + comp] = direction[comp] * amp;
                }
            }
        }
    }
    Ok(out)
}

/// Write a sparse matrix as coordinate-list text: `row col re im` per line,
/// rows ascending then columns, deterministic float formatting.
pub fn export_coo<W: std::io::Write>(h: &Csr, out: &mut W) -> std::io::Result<()> {
    for (i, j, v) in h.triplet_iter() {
        writeln!(out, "{} {} {:.17e} {:.17e}", i, j, v.re, v.im)?;
    }
    Ok(())
}
