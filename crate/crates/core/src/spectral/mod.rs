//! Collar region with two reflecting faces, its spectral solver, and the
//! tangential boundary operator with ellipticity/energy certificates.
//!
//! The collar X = {r0 ≤ r ≤ r_mid} is cut at half the Gaussian-chart depth
//! and carries the chiral condition on both faces — the physical boundary
//! and an artificial timelike face Y. Where the Killing field stays timelike
//! on X, the doubly reduced Hamiltonian is exactly w-Hermitian after
//! symmetrization and a dense eigendecomposition yields the
//! eigenfunction-series propagator used by the near-boundary half of the
//! split evolution. On the boundary ring itself, the tangential operator
//! A = (A0 + A0*)/2 is symmetrized in the K̸-weighted product; its
//! high-frequency response, a discrete Gårding constant, and the
//! slice-ellipticity minimum δ are exported as numerical certificates.

use ndarray::Array2;

use crate::geometry::{
    killing_norm, AngularKind, GaussianChart, Metric, MetricSample, Point,
};
use crate::linalg::{eigh_plain, eigh_w, max_abs, norm_w, seeded_rng, Csr};
use crate::operator::{
    assemble_hamiltonian, boundary_projector_outer, one_dimensional_stencil, BoundaryData, Grid,
    PotentialB, Reduction, StencilOrder,
};
use crate::spinor::{build_vielbein, curved_gammas, gamma_t_inv, CliffordRep};
use crate::{Error, Result, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The double-boundary collar region: a radial sub-grid `[r0, r_mid]` with
/// the chiral condition eliminated on both faces and the Killing field
/// timelike at every node.
pub struct RegionX {
    pub grid: Grid,
    /// Adopted outer face radius (snapped to whole cells of the base grid).
    pub r_mid: f64,
    /// Half-depth target from the Gaussian chart before the timelike shrink.
    pub r_mid_target: f64,
    /// Minimum of ⟨K, K⟩ over region nodes; positive by construction.
    pub killing_min: f64,
    /// Inner-face boundary data per angular node.
    pub inner: Vec<BoundaryData>,
    /// Y-face boundary data per angular node (inner normal toward smaller r).
    pub outer: Vec<BoundaryData>,
    /// Projector elimination over both rings.
    pub reduction: Reduction,
    pub node_weights: Vec<f64>,
    /// Doubly reduced operator before symmetrization.
    pub h_x_raw: Csr,
    /// Doubly reduced operator after ½(H + H^{†w}); exactly w-Hermitian.
    pub h_x: Csr,
    pub w_x: Vec<f64>,
}

impl RegionX {
    pub fn f(&self) -> usize {
        self.reduction.f
    }
}

/// Build the collar region off a base grid: the outer face sits at half the
/// chart depth in coordinate radius, snapped down to whole base-grid cells,
/// and is pulled further in until ⟨K, K⟩ > 0 at every retained node.
pub fn build_region_x(
    metric: &dyn Metric,
    rep: &CliffordRep,
    chart: &GaussianChart,
    base: &Grid,
    potential: &PotentialB,
    mass: f64,
) -> Result<RegionX> {
    if base.radial_periodic {
        return Err(Error::Region(
            "build_region_x: the base grid must carry a physical inner face".into(),
        ));
    }
    if rep.dim != metric.dim() || base.metric_dim != metric.dim() {
        return Err(Error::InvalidParameter(
            "build_region_x: dimension mismatch between metric, rep and grid".into(),
        ));
    }

    // Half-depth of the chart, read off in coordinate radius (worst ray).
    let half = (chart.n_levels() - 1) / 2;
    let mut target = f64::INFINITY;
    for j in 0..chart.n_omega() {
        target = target.min(chart.position(half, j)[0]);
    }
    if !(target > base.r0) || !target.is_finite() {
        return Err(Error::Region(format!(
            "build_region_x: chart half-depth radius {target} does not reach past r0 = {}",
            base.r0
        )));
    }
    let snapped = (((target - base.r0) / base.h_r).floor() as usize).min(base.nr);

    // Walk outward while the Killing field stays timelike on every ring.
    let mut ring_mins: Vec<f64> = Vec::with_capacity(snapped + 1);
    for ir in 0..=snapped {
        let r = base.r0 + ir as f64 * base.h_r;
        let mut ring_min = f64::INFINITY;
        for it in 0..base.ntheta {
            let p = Point::spatial(r, base.thetas[it], metric.dim());
            ring_min = ring_min.min(killing_norm(metric, &p)?);
        }
        if ring_min <= 0.0 {
            break;
        }
        ring_mins.push(ring_min);
    }
    if ring_mins.len() < 5 {
        let best = ring_mins.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(Error::Region(format!(
            "build_region_x: Killing field not timelike past {} ring(s) from r0 = {} \
             (need ≥ 5; min ⟨K,K⟩ reached {best:.6e}); move r0 or re-mix the Killing field",
            ring_mins.len(),
            base.r0
        )));
    }
    let nr_x = (ring_mins.len() - 1).min(snapped);
    let killing_min = ring_mins[..=nr_x]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let r_mid = base.r0 + nr_x as f64 * base.h_r;

    let grid = Grid::new(metric, nr_x, base.ntheta, r_mid, base.k)?.with_stencil(base.stencil);
    let dh = assemble_hamiltonian(metric, rep, &grid, potential, mass)?;
    let f = rep.f;

    let mut pairs: Vec<(usize, Array2<C64>)> = dh
        .boundary_nodes
        .iter()
        .zip(&dh.boundary)
        .map(|(&n, bd)| (n, bd.q.clone()))
        .collect();
    let mut outer = Vec::with_capacity(grid.ntheta);
    let last = grid.n_radial() - 1;
    for it in 0..grid.ntheta {
        let p = grid.node_point(last, it);
        let sample = metric.sample(&p)?;
        let bd = boundary_projector_outer(rep, &sample).map_err(|e| {
            Error::Region(format!("build_region_x: Y-face at r = {r_mid} rejected: {e}"))
        })?;
        pairs.push((grid.node_index(last, it), bd.q.clone()));
        outer.push(bd);
    }

    let reduction = Reduction::new(grid.n_nodes(), f, &pairs);
    let h_x_raw = reduction.reduce_matrix(&dh.h_full);
    let w_x = reduction.reduced_weights(&dh.node_weights);
    let h_x = h_x_raw.symmetrize_w(&w_x);

    Ok(RegionX {
        grid,
        r_mid,
        r_mid_target: target,
        killing_min,
        inner: dh.boundary,
        outer,
        reduction,
        node_weights: dh.node_weights,
        h_x_raw,
        h_x,
        w_x,
    })
}

/// Full dense eigendecomposition of a w-Hermitian operator: real frequencies
/// ascending, eigenvector columns w-orthonormal.
pub struct SpectralBasis {
    pub omegas: Vec<f64>,
    /// Column `n` is the eigenvector of `omegas[n]`.
    pub vectors: Array2<C64>,
    pub w: Vec<f64>,
}

/// Decompose the reduced Hermitian operator. Aborts if the w-Hermiticity
/// defect exceeds 1e−12 relative to the largest weighted entry: a failed
/// check means the operator was not symmetrized and the basis would be
/// spurious.
pub fn eigendecompose_x(h: &Csr, w: &[f64]) -> Result<SpectralBasis> {
    let n = w.len();
    let dense = h.to_dense();
    if dense.nrows() != n || dense.ncols() != n {
        return Err(Error::InvalidParameter(
            "eigendecompose_x: operator and weight sizes disagree".into(),
        ));
    }
    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let a = dense[[i, j]] * w[i];
            let b = dense[[j, i]].conj() * w[j];
            scale = scale.max(a.norm()).max(b.norm());
            defect = defect.max((a - b).norm());
        }
    }
    if defect > 1e-12 * scale.max(1.0) {
        return Err(Error::Invariant(format!(
            "eigendecompose_x: w-Hermiticity defect {defect:.3e} exceeds 1e−12 · {scale:.3e}; \
             symmetrize the operator before decomposing"
        )));
    }
    let eig = eigh_w(&dense, w)?;
    Ok(SpectralBasis {
        omegas: eig.omegas,
        vectors: eig.vecs,
        w: w.to_vec(),
    })
}

/// Propagate by the eigenfunction series `ψ(t) = Σ_n ⟨ψ_n, ψ0⟩_w e^{−iω_n t} ψ_n`.
/// Preserves the w-norm up to rounding for any real `t`.
pub fn series_evolve(basis: &SpectralBasis, psi0: &[C64], t: f64) -> Vec<C64> {
    let n = basis.w.len();
    assert_eq!(psi0.len(), n, "series_evolve: state dimension mismatch");
    let mut out = vec![c(0.0, 0.0); n];
    for m in 0..basis.omegas.len() {
        let col = basis.vectors.column(m);
        let mut cn = c(0.0, 0.0);
        for i in 0..n {
            cn += basis.w[i] * col[i].conj() * psi0[i];
        }
        let amp = cn * c(0.0, -basis.omegas[m] * t).exp();
        for i in 0..n {
            out[i] += amp * col[i];
        }
    }
    out
}

/// Tangential first-order operator on the boundary ring, assembled in the
/// frame adapted to the Gaussian chart (legs ∂t, inward unit normal, ∂Θ and,
/// in 4d, ∂Φ with the azimuthal mode inserted).
pub struct BoundaryOperator {
    pub f: usize,
    pub nj: usize,
    pub k: i64,
    pub omegas: Vec<f64>,
    pub angular: AngularKind,
    pub h_omega: f64,
    /// Adapted metric samples per ring node.
    pub samples: Vec<MetricSample>,
    /// Tangential Clifford blocks `C^Ω = (γ^ρ)⁻¹ γ^Ω` per node, one per
    /// angular direction (Θ, then Φ in 4d).
    pub c_blocks: Vec<Vec<Array2<C64>>>,
    /// Ring quadrature weights: induced boundary measure times the spacing.
    pub wb: Vec<f64>,
    /// Gram blocks `M_j = wb_j · S K̸_j` of the K̸-weighted product; Hermitian
    /// positive definite exactly where K is timelike.
    pub gram: Vec<Array2<C64>>,
    /// Raw tangential derivative `A0 = (γ^ρ)⁻¹ γ^Ω ∂_Ω` (with ∂_Φ → ik).
    pub a0: Array2<C64>,
    /// Antisymmetric part `Z = −(A0 − A0*)/2`; a multiplication operator up
    /// to discretization.
    pub z: Array2<C64>,
    /// Symmetrized operator `A = A0 + Z = (A0 + A0*)/2`; Hermitian in the
    /// K̸-product by construction.
    pub a: Array2<C64>,
}

/// Assemble `A0`, `Z` and `A` on the chart's boundary ring for one azimuthal
/// mode. Requires K timelike at every ring node — the K̸-weighted product
/// that defines the adjoint is positive definite only there.
pub fn boundary_operator_a(
    metric: &dyn Metric,
    rep: &CliffordRep,
    chart: &GaussianChart,
    k: i64,
) -> Result<BoundaryOperator> {
    let d = metric.dim();
    if rep.dim != d {
        return Err(Error::InvalidParameter(
            "boundary_operator_a: representation dimension mismatch".into(),
        ));
    }
    if d == 3 && k != 0 {
        return Err(Error::InvalidParameter(
            "boundary_operator_a: azimuthal mode k must be 0 on 2+1 dimensional charts".into(),
        ));
    }
    let nj = chart.n_omega();
    if nj < 4 {
        return Err(Error::InvalidParameter(
            "boundary_operator_a: need at least 4 ring nodes".into(),
        ));
    }
    let om = &chart.omegas;
    let h = om[1] - om[0];
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(
            "boundary_operator_a: ring nodes must be ascending".into(),
        ));
    }
    for j in 1..nj {
        if ((om[j] - om[j - 1]) - h).abs() > 1e-12 * h {
            return Err(Error::InvalidParameter(
                "boundary_operator_a: ring nodes must be uniformly spaced".into(),
            ));
        }
    }
    if let AngularKind::Periodic { period } = chart.angular {
        if (nj as f64 * h - period).abs() > 1e-9 * period {
            return Err(Error::InvalidParameter(format!(
                "boundary_operator_a: {nj} nodes at spacing {h} do not close the period {period}"
            )));
        }
    }

    let f = rep.f;
    let mut samples = Vec::with_capacity(nj);
    let mut c_blocks = Vec::with_capacity(nj);
    let mut wb = Vec::with_capacity(nj);
    let mut gram = Vec::with_capacity(nj);
    let mut gram_inv = Vec::with_capacity(nj);

    for j in 0..nj {
        let s = chart.adapted_boundary_sample(metric, j)?;
        if s.g[[0, 0]] <= 0.0 {
            return Err(Error::Degenerate(format!(
                "boundary_operator_a: Killing field not timelike at ring node {j} \
                 (Θ = {:.6}): ⟨K,K⟩ = {:.6e} ≤ 0",
                om[j],
                s.g[[0, 0]]
            )));
        }
        let vb = build_vielbein(&s)?;
        let gam = curved_gammas(rep, &vb);
        let grho = s.ginv[[1, 1]];

        // Tangential blocks (γ^ρ)⁻¹ γ^Ω = γ^ρ γ^Ω / g^{ρρ}.
        let mut blocks = Vec::with_capacity(d - 2);
        for a in 2..d {
            blocks.push(gam[1].dot(&gam[a]).mapv(|z| z / grho));
        }

        // Induced boundary measure of the slice section.
        let measure = if d == 3 {
            let gtt = -s.g[[2, 2]];
            if gtt <= 0.0 {
                return Err(Error::Degenerate(
                    "boundary_operator_a: ring direction not spacelike".into(),
                ));
            }
            gtt.sqrt()
        } else {
            let b00 = -s.g[[2, 2]];
            let b01 = -s.g[[2, 3]];
            let b11 = -s.g[[3, 3]];
            let det = b00 * b11 - b01 * b01;
            if b00 <= 0.0 || det <= 0.0 {
                return Err(Error::Degenerate(
                    "boundary_operator_a: boundary section not spacelike".into(),
                ));
            }
            det.sqrt()
        };
        let wj = measure * h;

        // K̸ = K_ν γ^ν with K = ∂t in the adapted frame.
        let mut kslash = Array2::<C64>::zeros((f, f));
        for nu in 0..d {
            let coeff = s.g[[0, nu]];
            if coeff != 0.0 {
                kslash.zip_mut_with(&gam[nu], |acc, &x| *acc += x * coeff);
            }
        }
        let mj = rep.s.dot(&kslash).mapv(|z| z * wj);
        let (vals, vecs) = eigh_plain(&mj)?;
        let top = vals.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        if vals[0] <= 1e-12 * top {
            return Err(Error::Degenerate(format!(
                "boundary_operator_a: K̸-weighted product not positive at ring node {j} \
                 (min eigenvalue {:.3e})",
                vals[0]
            )));
        }
        let mut minv = Array2::<C64>::zeros((f, f));
        for a in 0..f {
            for b in 0..f {
                let mut acc = c(0.0, 0.0);
                for q in 0..f {
                    acc += vecs[[a, q]] * vecs[[b, q]].conj() / vals[q];
                }
                minv[[a, b]] = acc;
            }
        }

        samples.push(s);
        c_blocks.push(blocks);
        wb.push(wj);
        gram.push(mj);
        gram_inv.push(minv);
    }

    // A0 = Σ_Ω C^Ω D_Ω with the block coefficient frozen at the row node.
    let nf = nj * f;
    let mut a0 = Array2::<C64>::zeros((nf, nf));
    let stencil = |j: usize| -> Vec<(usize, f64)> {
        match chart.angular {
            AngularKind::Periodic { .. } => {
                let n = nj as isize;
                let i = j as isize;
                vec![
                    ((i - 1).rem_euclid(n) as usize, -0.5 / h),
                    ((i + 1).rem_euclid(n) as usize, 0.5 / h),
                ]
            }
            AngularKind::PolarAxis => one_dimensional_stencil(j, nj, h, StencilOrder::Two),
        }
    };
    for j in 0..nj {
        let cth = &c_blocks[j][0];
        for (j2, cf) in stencil(j) {
            for i in 0..f {
                for i2 in 0..f {
                    a0[[j * f + i, j2 * f + i2]] += cth[[i, i2]] * cf;
                }
            }
        }
        if d == 4 {
            let cph = &c_blocks[j][1];
            for i in 0..f {
                for i2 in 0..f {
                    a0[[j * f + i, j * f + i2]] += cph[[i, i2]] * c(0.0, k as f64);
                }
            }
        }
    }

    // A0* = M⁻¹ A0† M blockwise over the node-diagonal Gram matrix.
    let mut a0s = Array2::<C64>::zeros((nf, nf));
    let mut block = Array2::<C64>::zeros((f, f));
    for jr in 0..nj {
        for jc in 0..nj {
            for i in 0..f {
                for i2 in 0..f {
                    block[[i, i2]] = a0[[jc * f + i2, jr * f + i]].conj();
                }
            }
            let out = gram_inv[jr].dot(&block).dot(&gram[jc]);
            for i in 0..f {
                for i2 in 0..f {
                    a0s[[jr * f + i, jc * f + i2]] = out[[i, i2]];
                }
            }
        }
    }

    let z = (&a0s - &a0).mapv(|v| v * 0.5);
    let a = (&a0s + &a0).mapv(|v| v * 0.5);

    Ok(BoundaryOperator {
        f,
        nj,
        k,
        omegas: om.clone(),
        angular: chart.angular,
        h_omega: h,
        samples,
        c_blocks,
        wb,
        gram,
        a0,
        z,
        a,
    })
}

/// Defects of the tangential Clifford anticommutators against the
/// Gaussian-frame identity `{C^a, C^b} = −2 g^{ab}/g^{ρρ}` and against its
/// frame-dragging completion `+ 2(g^{aρ} C^b + g^{bρ} C^a)/g^{ρρ}`.
pub struct AnticommutatorReport {
    /// Max defect of the plain identity over pairs whose mixed components
    /// `g^{ρa}` vanish (where the Gaussian-frame premise holds exactly).
    pub paper_form: f64,
    /// Max defect of the completed identity over all pairs.
    pub generalized: f64,
    /// Largest `|g^{ρΩ}|` seen; zero makes the two identities coincide.
    pub max_mixing: f64,
}

impl BoundaryOperator {
    /// K̸-weighted product `Σ_j u_j† M_j v_j`.
    pub fn k_dot(&self, u: &[C64], v: &[C64]) -> C64 {
        let f = self.f;
        let mut acc = c(0.0, 0.0);
        for j in 0..self.nj {
            let m = &self.gram[j];
            for i in 0..f {
                for i2 in 0..f {
                    acc += u[j * f + i].conj() * m[[i, i2]] * v[j * f + i2];
                }
            }
        }
        acc
    }

    pub fn k_norm(&self, u: &[C64]) -> f64 {
        self.k_dot(u, u).re.max(0.0).sqrt()
    }

    /// Hermiticity defect of `mat` in the K̸-product: `‖M mat − (M mat)†‖`
    /// relative to `‖M mat‖` (max entry norms).
    pub fn k_herm_defect(&self, mat: &Array2<C64>) -> f64 {
        let f = self.f;
        let nf = self.nj * f;
        let mut ma = Array2::<C64>::zeros((nf, nf));
        for jr in 0..self.nj {
            let m = &self.gram[jr];
            for col in 0..nf {
                for i in 0..f {
                    let mut acc = c(0.0, 0.0);
                    for i2 in 0..f {
                        acc += m[[i, i2]] * mat[[jr * f + i2, col]];
                    }
                    ma[[jr * f + i, col]] = acc;
                }
            }
        }
        let scale = max_abs(&ma).max(1e-300);
        let mut defect = 0.0f64;
        for i in 0..nf {
            for j in i..nf {
                defect = defect.max((ma[[i, j]] - ma[[j, i]].conj()).norm());
            }
        }
        defect / scale
    }

    /// Spectrum of an operator Hermitian in the K̸-product, via the
    /// similarity `M^{1/2} · mat · M^{−1/2}`.
    pub fn k_spectrum(&self, mat: &Array2<C64>) -> Result<Vec<f64>> {
        let f = self.f;
        let nf = self.nj * f;
        let mut sq = Vec::with_capacity(self.nj);
        let mut isq = Vec::with_capacity(self.nj);
        for j in 0..self.nj {
            let (vals, vecs) = eigh_plain(&self.gram[j])?;
            let mut s = Array2::<C64>::zeros((f, f));
            let mut si = Array2::<C64>::zeros((f, f));
            for a in 0..f {
                for b in 0..f {
                    let mut acc = c(0.0, 0.0);
                    let mut acci = c(0.0, 0.0);
                    for q in 0..f {
                        let root = vals[q].max(0.0).sqrt();
                        acc += vecs[[a, q]] * vecs[[b, q]].conj() * root;
                        acci += vecs[[a, q]] * vecs[[b, q]].conj() / root;
                    }
                    s[[a, b]] = acc;
                    si[[a, b]] = acci;
                }
            }
            sq.push(s);
            isq.push(si);
        }
        let mut b = Array2::<C64>::zeros((nf, nf));
        for jr in 0..self.nj {
            for jc in 0..self.nj {
                let mut blk = Array2::<C64>::zeros((f, f));
                for i in 0..f {
                    for i2 in 0..f {
                        blk[[i, i2]] = mat[[jr * f + i, jc * f + i2]];
                    }
                }
                let out = sq[jr].dot(&blk).dot(&isq[jc]);
                for i in 0..f {
                    for i2 in 0..f {
                        b[[jr * f + i, jc * f + i2]] = out[[i, i2]];
                    }
                }
            }
        }
        Ok(eigh_plain(&b)?.0)
    }

    /// Evaluate the tangential anticommutator identities at every ring node.
    pub fn anticommutator_report(&self) -> AnticommutatorReport {
        let f = self.f;
        let dirs = self.c_blocks[0].len();
        let mut paper = 0.0f64;
        let mut gen = 0.0f64;
        let mut mixing = 0.0f64;
        for j in 0..self.nj {
            let s = &self.samples[j];
            let grho = s.ginv[[1, 1]];
            for a in 0..dirs {
                for b in a..dirs {
                    let ca = &self.c_blocks[j][a];
                    let cb = &self.c_blocks[j][b];
                    let anti = ca.dot(cb) + cb.dot(ca);
                    let gab = s.ginv[[2 + a, 2 + b]];
                    let gra = s.ginv[[1, 2 + a]];
                    let grb = s.ginv[[1, 2 + b]];
                    mixing = mixing.max(gra.abs()).max(grb.abs());
                    let mut rhs = Array2::<C64>::zeros((f, f));
                    for i in 0..f {
                        rhs[[i, i]] = c(-2.0 * gab / grho, 0.0);
                    }
                    let scale = max_abs(&anti).max(1.0);
                    if gra.abs() <= 1e-12 * grho.abs() && grb.abs() <= 1e-12 * grho.abs() {
                        paper = paper.max(max_abs(&(&anti - &rhs)) / scale);
                    }
                    rhs.zip_mut_with(cb, |acc, &x| *acc += x * (2.0 * gra / grho));
                    rhs.zip_mut_with(ca, |acc, &x| *acc += x * (2.0 * grb / grho));
                    gen = gen.max(max_abs(&(&anti - &rhs)) / scale);
                }
            }
        }
        AnticommutatorReport {
            paper_form: paper,
            generalized: gen,
            max_mixing: mixing,
        }
    }
}

/// High-frequency response of `A²`: the Rayleigh quotient against windowed
/// ring waves, regressed on the squared discrete frequency.
pub struct ASquaredReport {
    /// Least-squares slope of `⟨u_q, A² u_q⟩_K / ⟨u_q, u_q⟩_K` against
    /// `q̃² = (sin(q h)/h)²` over the upper half of the resolved band.
    pub fitted: f64,
    /// Probe-weighted average of `g^{ΘΘ}/g^{ρρ}` over the ring.
    pub predicted: f64,
    pub rel_mismatch: f64,
    /// Wave numbers entering the fit; never 0 — the constant mode carries
    /// only the lower-order terms (they land in the intercept).
    pub q_used: Vec<usize>,
    /// Fitted zero-order intercept (azimuthal and multiplication terms).
    pub intercept: f64,
}

/// Probe `A²` with windowed waves `w(Θ) e^{iqΘ} e_c` and fit the leading
/// frequency-squared coefficient. Report-only: the certificate quantifies
/// how closely the symmetrized operator realizes a tangential Laplacian with
/// the metric coefficient `g^{ΘΘ}/g^{ρρ}`.
pub fn a_squared_certificate(op: &BoundaryOperator) -> Result<ASquaredReport> {
    let f = op.f;
    let nj = op.nj;
    let h = op.h_omega;
    let a2 = op.a.dot(&op.a);

    let window: Vec<f64> = match op.angular {
        AngularKind::Periodic { .. } => vec![1.0; nj],
        // Taper to zero at the poles, where the one-sided closure lives.
        AngularKind::PolarAxis => op.omegas.iter().map(|&t| t.sin().powi(2)).collect(),
    };

    // Resolved band of the central stencil: q̃(q) = sin(q h)/h up to q h = π/2.
    let q_top = ((std::f64::consts::FRAC_PI_2 / h).floor() as usize).max(1);
    let qt_max = (1..=q_top)
        .map(|q| (q as f64 * h).sin() / h)
        .fold(0.0f64, f64::max);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut q_used = Vec::new();
    for q in 1..=q_top {
        let qt = (q as f64 * h).sin() / h;
        if qt < 0.5 * qt_max {
            continue;
        }
        q_used.push(q);
        for comp in 0..f {
            let mut u = vec![c(0.0, 0.0); nj * f];
            for j in 0..nj {
                u[j * f + comp] = c(0.0, q as f64 * op.omegas[j]).exp() * window[j];
            }
            let den = op.k_dot(&u, &u).re;
            let mut a2u = vec![c(0.0, 0.0); nj * f];
            for i in 0..nj * f {
                let mut acc = c(0.0, 0.0);
                for jj in 0..nj * f {
                    acc += a2[[i, jj]] * u[jj];
                }
                a2u[i] = acc;
            }
            let num = op.k_dot(&u, &a2u).re;
            pts.push((qt * qt, num / den));
        }
    }
    if q_used.len() < 2 {
        return Err(Error::InvalidParameter(
            "a_squared_certificate: ring too coarse to resolve two frequencies".into(),
        ));
    }

    // Least squares y = α + β x.
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    let beta = (n * sxy - sx * sy) / det;
    let alpha = (sy - beta * sx) / n;

    let mut wsum = 0.0;
    let mut rho = 0.0;
    for j in 0..nj {
        let s = &op.samples[j];
        let mut tr = 0.0;
        for i in 0..f {
            tr += op.gram[j][[i, i]].re;
        }
        let weight = window[j] * window[j] * tr;
        wsum += weight;
        rho += weight * s.ginv[[2, 2]] / s.ginv[[1, 1]];
    }
    let predicted = rho / wsum;

    Ok(ASquaredReport {
        fitted: beta,
        predicted,
        rel_mismatch: (beta - predicted).abs() / predicted.abs(),
        q_used,
        intercept: alpha,
    })
}

/// Discrete Gårding quotient: the largest `‖ψ‖²_{W^{1,2}} / (‖Hψ‖²_w + ‖ψ‖²_w)`
/// seen over the probe family.
pub struct GardingReport {
    pub c_hat: f64,
    pub n_probes: usize,
}

/// Estimate the Gårding constant of a reduced Hermitian operator on its
/// grid. Probes combine smooth random fields with radial wave packets at the
/// grid's resolution limit, aimed along the singular directions of the
/// radial symbol — the packets are what exposes a horizon inside the region,
/// where the symbol degenerates and the quotient grows like `1/h²` under
/// refinement instead of stabilizing.
pub fn garding_estimate(
    metric: &dyn Metric,
    rep: &CliffordRep,
    grid: &Grid,
    reduction: &Reduction,
    h: &Csr,
    w_red: &[f64],
    trials: usize,
    seed: u64,
) -> Result<GardingReport> {
    let d = metric.dim();
    let f = reduction.f;
    if rep.dim != d || rep.f != f {
        return Err(Error::InvalidParameter(
            "garding_estimate: representation does not match the reduction".into(),
        ));
    }
    let n_nodes = grid.n_nodes();
    if w_red.len() != reduction.reduced_len || reduction.offsets.len() != n_nodes {
        return Err(Error::InvalidParameter(
            "garding_estimate: reduction does not match the grid".into(),
        ));
    }
    let dsp = d - 1;

    // Per-node slice cometric and quadrature weight.
    let mut hinvs = Vec::with_capacity(n_nodes);
    let mut node_w = vec![0.0; n_nodes];
    for ir in 0..grid.n_radial() {
        for it in 0..grid.ntheta {
            let node = grid.node_index(ir, it);
            let s = metric.sample(&grid.node_point(ir, it))?;
            hinvs.push(s.slice_metric_inv()?);
            node_w[node] = w_red[reduction.offsets[node]];
        }
    }

    // Discrete W^{1,2} norm squared of a full-grid field: value term plus
    // slice-cometric contraction of one-sided/central gradients, with the
    // azimuthal mode entering as i k ψ.
    let w12_sq = |u: &[C64]| -> f64 {
        let mut acc = 0.0;
        let mut g = vec![vec![c(0.0, 0.0); f]; dsp];
        for ir in 0..grid.n_radial() {
            for it in 0..grid.ntheta {
                let node = grid.node_index(ir, it);
                for gi in g.iter_mut() {
                    for v in gi.iter_mut() {
                        *v = c(0.0, 0.0);
                    }
                }
                for (ir2, cf) in grid.radial_stencil(ir) {
                    let other = grid.node_index(ir2, it);
                    for i in 0..f {
                        g[0][i] += u[other * f + i] * cf;
                    }
                }
                for (it2, cf) in grid.angular_stencil(it) {
                    let other = grid.node_index(ir, it2);
                    for i in 0..f {
                        g[1][i] += u[other * f + i] * cf;
                    }
                }
                if d == 4 {
                    for i in 0..f {
                        g[2][i] = u[node * f + i] * c(0.0, grid.k as f64);
                    }
                }
                let hinv = &hinvs[node];
                let mut local = 0.0;
                for i in 0..f {
                    local += u[node * f + i].norm_sqr();
                    for al in 0..dsp {
                        for be in 0..dsp {
                            local += hinv[[al, be]] * (g[al][i].conj() * g[be][i]).re;
                        }
                    }
                }
                acc += node_w[node] * local;
            }
        }
        acc
    };

    let ratio_of = |psi: &[C64]| -> Option<f64> {
        let nw = norm_w(w_red, psi);
        if !(nw > 1e-14) {
            return None;
        }
        let hpsi = h.apply_alloc(psi);
        let hn = norm_w(w_red, &hpsi);
        let full = reduction.embed(psi);
        Some(w12_sq(&full) / (hn * hn + nw * nw))
    };

    let mut c_hat = 0.0f64;
    let mut n_probes = 0usize;
    let mut rng = seeded_rng(seed);

    // Smooth random fields tapered at both faces.
    use rand::Rng;
    let l = grid.r_outer - grid.r0;
    for _ in 0..trials {
        let n_modes = 3usize;
        let qs: [i64; 3] = [0, 1, 2];
        let mut coeff = vec![c(0.0, 0.0); n_modes * qs.len() * f];
        for v in coeff.iter_mut() {
            *v = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let mut full = vec![c(0.0, 0.0); n_nodes * f];
        for ir in 0..grid.n_radial() {
            let x = (grid.rs[ir] - grid.r0) / l;
            let taper = (x * (1.0 - x)).powi(2) * 16.0;
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
                    full[node * f + comp] = acc * taper;
                }
            }
        }
        let psi = reduction.restrict(&full);
        if let Some(r) = ratio_of(&psi) {
            c_hat = c_hat.max(r);
            n_probes += 1;
        }
    }

    // Wave packets at the resolution limit, swept over radii and aimed along
    // the extremal singular directions of the radial block.
    let n_rad = grid.n_radial();
    if n_rad >= 7 {
        let kappa = std::f64::consts::FRAC_PI_2 / grid.h_r;
        let sigma = 3.0 * grid.h_r;
        let step = ((n_rad - 4) / 12).max(1);
        let mut ic = 2usize;
        while ic + 2 < n_rad {
            let rc = grid.rs[ic];
            let s = metric.sample(&grid.node_point(ic, grid.ntheta / 2))?;
            let vb = build_vielbein(&s)?;
            let gam = curved_gammas(rep, &vb);
            let gtinv = gamma_t_inv(&gam[0], s.ginv[[0, 0]]);
            let c_r = gtinv.dot(&gam[1]).mapv(|z| z * c(0.0, -1.0));
            let (_, vecs) = eigh_plain(&c_r.t().mapv(|z| z.conj()).dot(&c_r))?;
            for which in [0usize, f - 1] {
                let dir: Vec<C64> = (0..f).map(|i| vecs[[i, which]]).collect();
                let mut full = vec![c(0.0, 0.0); n_nodes * f];
                for ir in 0..n_rad {
                    let r = grid.rs[ir];
                    let x = (r - grid.r0) / l;
                    let taper = (x * (1.0 - x)).powi(2) * 16.0;
                    let env = (-((r - rc) * (r - rc)) / (2.0 * sigma * sigma)).exp();
                    let phase = c(0.0, kappa * (r - rc)).exp();
                    for it in 0..grid.ntheta {
                        let wth = match grid.angular {
                            AngularKind::PolarAxis => grid.thetas[it].sin(),
                            AngularKind::Periodic { .. } => 1.0,
                        };
                        let node = grid.node_index(ir, it);
                        let amp = phase * (env * taper * wth);
                        for i in 0..f {
                            full[node * f + i] = amp * dir[i];
                        }
                    }
                }
                let psi = reduction.restrict(&full);
                if let Some(r) = ratio_of(&psi) {
                    c_hat = c_hat.max(r);
                    n_probes += 1;
                }
            }
            ic += step;
        }
    }

    Ok(GardingReport { c_hat, n_probes })
}

/// Ellipticity certificate of the slice symbol on a grid with K timelike.
pub struct EllipticityReport {
    /// Minimum over nodes of the smallest generalized eigenvalue of
    /// `−g^{αβ}` against the slice cometric: 1 in flat space, positive
    /// exactly where K is timelike.
    pub delta: f64,
    /// Worst relative defect of the norm identity
    /// `‖ξ_α (γ^t)⁻¹γ^α ψ‖²_x = −g^{αβ}ξ_αξ_β ‖(γ^t)⁻¹ψ‖²_x`
    /// in the norm `‖ψ‖²_x = ≺ψ | γ^t K̸ γ^t ψ≻` over the random trials.
    pub identity_residual: f64,
}

/// Verify the symbol norm identity at random (node, ξ, ψ) triples and scan
/// the uniform-ellipticity margin δ over all grid nodes. δ ≤ 0 means the
/// region is not uniformly elliptic — no admissible collar region X.
pub fn ellipticity_certificate(
    metric: &dyn Metric,
    rep: &CliffordRep,
    grid: &Grid,
    trials: usize,
    seed: u64,
) -> Result<EllipticityReport> {
    let d = metric.dim();
    if rep.dim != d {
        return Err(Error::InvalidParameter(
            "ellipticity_certificate: representation dimension mismatch".into(),
        ));
    }
    let f = rep.f;
    let dsp = d - 1;
    let killing = metric.killing();

    // δ scan: generalized minimum eigenvalue of −g^{αβ} against the slice
    // cometric at every node.
    let mut delta = f64::INFINITY;
    let mut worst = (0.0f64, 0.0f64);
    for ir in 0..grid.n_radial() {
        for it in 0..grid.ntheta {
            let p = grid.node_point(ir, it);
            let s = metric.sample(&p)?;
            let hinv = s.slice_metric_inv()?;
            let co = s.spatial_cometric();
            let mut b = Array2::<C64>::zeros((dsp, dsp));
            let mut a = Array2::<C64>::zeros((dsp, dsp));
            for i in 0..dsp {
                for j in 0..dsp {
                    b[[i, j]] = c(hinv[[i, j]], 0.0);
                    a[[i, j]] = c(-co[[i, j]], 0.0);
                }
            }
            let (bv, bvec) = eigh_plain(&b)?;
            if bv[0] <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "ellipticity_certificate: slice cometric not positive at (r, θ) = ({}, {})",
                    p.r(),
                    p.theta()
                )));
            }
            let mut bih = Array2::<C64>::zeros((dsp, dsp));
            for i in 0..dsp {
                for j in 0..dsp {
                    let mut acc = c(0.0, 0.0);
                    for q in 0..dsp {
                        acc += bvec[[i, q]] * bvec[[j, q]].conj() / bv[q].sqrt();
                    }
                    bih[[i, j]] = acc;
                }
            }
            let m = bih.dot(&a).dot(&bih);
            let (av, _) = eigh_plain(&m)?;
            if av[0] < delta {
                delta = av[0];
                worst = (p.r(), p.theta());
            }
        }
    }

    // Norm identity at random triples.
    use rand::Rng;
    let mut rng = seeded_rng(seed);
    let mut residual = 0.0f64;
    for _ in 0..trials {
        let ir = rng.random_range(0..grid.n_radial());
        let it = rng.random_range(0..grid.ntheta);
        let p = grid.node_point(ir, it);
        let s = metric.sample(&p)?;
        let vb = build_vielbein(&s)?;
        let gam = curved_gammas(rep, &vb);
        let gtinv = gamma_t_inv(&gam[0], s.ginv[[0, 0]]);
        let mut kslash = Array2::<C64>::zeros((f, f));
        for nu in 0..d {
            let mut knu = 0.0;
            for mu in 0..d {
                knu += killing[mu] * s.g[[mu, nu]];
            }
            if knu != 0.0 {
                kslash.zip_mut_with(&gam[nu], |acc, &x| *acc += x * knu);
            }
        }
        let nx = rep.s.dot(&gam[0]).dot(&kslash).dot(&gam[0]);

        let xi: Vec<f64> = (0..dsp).map(|_| rng.random::<f64>() - 0.5).collect();
        let psi = crate::linalg::random_cvec(&mut rng, f);

        let mut xislash = Array2::<C64>::zeros((f, f));
        for (al, &x) in xi.iter().enumerate() {
            xislash.zip_mut_with(&gtinv.dot(&gam[1 + al]), |acc, &v| *acc += v * x);
        }
        let v = mat_vec(&xislash, &psi);
        let u = mat_vec(&gtinv, &psi);
        let lhs = quad(&nx, &v);
        let mut qf = 0.0;
        for al in 0..dsp {
            for be in 0..dsp {
                qf -= s.ginv[[1 + al, 1 + be]] * xi[al] * xi[be];
            }
        }
        let rhs = qf * quad(&nx, &u);
        residual = residual.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }

    if delta <= 0.0 {
        return Err(Error::Region(format!(
            "region not uniformly elliptic: min −g^{{αβ}}ξ_αξ_β = {delta:.6e} ≤ 0 \
             at (r, θ) = ({:.6}, {:.6})",
            worst.0, worst.1
        )));
    }
    Ok(EllipticityReport {
        delta,
        identity_residual: residual,
    })
}

fn mat_vec(m: &Array2<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![c(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = c(0.0, 0.0);
        for j in 0..v.len() {
            acc += m[[i, j]] * v[j];
        }
        out[i] = acc;
    }
    out
}

fn quad(m: &Array2<C64>, v: &[C64]) -> f64 {
    let mut acc = c(0.0, 0.0);
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i].conj() * m[[i, j]] * v[j];
        }
    }
    acc.re
}

/// Write the spectrum as CSV: `index,omega,participation_at_boundary`, where
/// participation is the w-norm² fraction an eigenvector carries on the
/// projector-eliminated (face) nodes. Deterministic formatting.
pub fn write_spectrum_csv<W: std::io::Write>(
    basis: &SpectralBasis,
    reduction: &Reduction,
    out: &mut W,
) -> std::io::Result<()> {
    assert_eq!(
        basis.w.len(),
        reduction.reduced_len,
        "write_spectrum_csv: basis does not match the reduction"
    );
    let mut at_boundary = vec![false; reduction.reduced_len];
    for node in 0..reduction.q.len() {
        if reduction.q[node].is_some() {
            for a in 0..reduction.width(node) {
                at_boundary[reduction.offsets[node] + a] = true;
            }
        }
    }
    writeln!(out, "index,omega,participation_at_boundary")?;
    for n in 0..basis.omegas.len() {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..reduction.reduced_len {
            let m = basis.w[i] * basis.vectors[[i, n]].norm_sqr();
            den += m;
            if at_boundary[i] {
                num += m;
            }
        }
        writeln!(out, "{},{:.17e},{:.17e}", n, basis.omegas[n], num / den)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
