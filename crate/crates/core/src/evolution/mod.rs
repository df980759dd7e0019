//! Window-split Cauchy evolution near a reflecting inner boundary.
//!
//! The solver advances initial data in windows of length `ε` chosen from the
//! light cones. Within one window the data is split by a smooth radial
//! cutoff `η` into a near-boundary part (supported in the inner quarter of
//! the collar) and an interior part (vanishing on the inner eighth). The
//! near-boundary part is propagated *exactly in time* by the eigenfunction
//! series of the double-boundary collar region X; the interior part is
//! propagated by the method of lines on the grid operator *without* the
//! inner boundary condition — finite propagation speed guarantees neither
//! part reaches the face it is blind to before the window closes, and
//! monitors turn any violation of that assumption into a hard error. The
//! glued sum is then re-split and the cycle repeats, forwards or backwards
//! in time.
//!
//! Crank–Nicolson is the default integrator: it is the Cayley transform of
//! the w-Hermitian operator, hence exactly w-unitary up to the linear-solver
//! tolerance. A monolithic Crank–Nicolson solver on the grid with both
//! boundary conditions imposed serves as the cross-validation reference.
//!
//! States at the public interface are full-grid spinor vectors (`n_nodes·f`
//! interleaved components); internally the glued state is kept in the
//! projector-reduced domain representation, so the boundary condition holds
//! exactly along the whole trajectory.

use crate::geometry::{gaussian_normal_chart, Metric};
use crate::linalg::{cg_w, norm_w, Csr};
use crate::operator::{
    assemble_hamiltonian, boundary_projector_outer, DiscreteHamiltonian, Grid, PotentialB,
    Reduction,
};
use crate::spectral::{build_region_x, eigendecompose_x, series_evolve, RegionX, SpectralBasis};
use crate::spinor::CliffordRep;
use crate::{Error, Result, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Relative amplitude at a guarded face above which a window is declared
/// violated. Healthy windows sit many orders below (the fronts that arrive
/// at a face within one admissible window carry smooth-data tails, measured
/// ≲ 1e−9), while a genuinely oversized window drives O(1) amplitude into
/// the face; the wide gap makes the detector robust to resolution.
pub const WINDOW_GUARD: f64 = 1e-5;

/// Relative drift of the w-norm above which the run aborts as unstable.
const INSTABILITY_GUARD: f64 = 1e-6;

/// Tolerance pair for the Crank–Nicolson linear solves: target, and the
/// stagnation level still accepted when conjugate gradients bottoms out at
/// the rounding floor of the normal equations.
const CN_TOL: f64 = 1e-15;
const CN_TOL_ACCEPT: f64 = 1e-13;

/// Smooth radial cutoff: `η ≡ 1` on the inner eighth of the radial extent,
/// `η ≡ 0` from the inner quarter outward, C^∞ in between (exponential
/// partition, all derivatives vanish at both ends of the transition).
#[derive(Debug, Clone)]
pub struct CutoffEta {
    pub r0: f64,
    pub r_extent: f64,
}

impl CutoffEta {
    pub fn new(grid: &Grid) -> CutoffEta {
        CutoffEta {
            r0: grid.r0,
            r_extent: grid.r_outer - grid.r0,
        }
    }

    /// End of the plateau where `η ≡ 1`.
    pub fn plateau_end(&self) -> f64 {
        self.r0 + self.r_extent / 8.0
    }

    /// End of the support: `η ≡ 0` for `r ≥ support_end()`.
    pub fn support_end(&self) -> f64 {
        self.r0 + self.r_extent / 4.0
    }

    pub fn eval(&self, r: f64) -> f64 {
        let a = self.plateau_end();
        let b = self.support_end();
        if r <= a {
            return 1.0;
        }
        if r >= b {
            return 0.0;
        }
        let x = (r - a) / (b - a);
        let lo = (-1.0 / x).exp();
        let hi = (-1.0 / (1.0 - x)).exp();
        hi / (hi + lo)
    }
}

/// Time integrator for the interior and reference solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    CrankNicolson,
    Rk4,
}

/// Run parameters for the window scheme.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    /// Target time; negative values evolve backwards.
    pub t_final: f64,
    /// Window length (positive). Use [`epsilon_from_lightcones`].
    pub epsilon: f64,
    /// Inner integrator step (positive); trimmed to divide each window.
    pub dt: f64,
    pub scheme: Scheme,
    /// Courant number used by [`standard_config`] to derive `dt`.
    pub cfl: f64,
    /// Relative amplitude threshold for support-radius diagnostics.
    pub support_threshold: f64,
    /// Store a full snapshot every this many windows (0 = first and last
    /// only); diagnostics are recorded every window regardless.
    pub snapshot_every: usize,
}

/// Largest radial characteristic coordinate speed over the grid nodes.
pub fn char_speed_max(metric: &dyn Metric, grid: &Grid) -> Result<f64> {
    let mut v = 0.0f64;
    for ir in 0..grid.n_radial() {
        for it in 0..grid.ntheta {
            v = v.max(metric.char_speed(&grid.node_point(ir, it))?);
        }
    }
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Degenerate(format!(
            "characteristic speed bound {v} is not a positive finite number"
        )));
    }
    Ok(v)
}

/// Admissible window length: an eighth of the radial extent divided by the
/// characteristic speed bound, so within one window data from outside the
/// cutoff plateau cannot reach the inner face and data from inside the
/// cutoff support cannot reach the collar's outer face.
pub fn epsilon_from_lightcones(metric: &dyn Metric, grid: &Grid) -> Result<f64> {
    let v = char_speed_max(metric, grid)?;
    Ok((grid.r_outer - grid.r0) / (8.0 * v))
}

/// Window length, Courant-limited step and default thresholds for a run to
/// `t_final` on the given closure and grid.
pub fn standard_config(metric: &dyn Metric, grid: &Grid, t_final: f64) -> Result<EvolutionConfig> {
    let v = char_speed_max(metric, grid)?;
    let epsilon = (grid.r_outer - grid.r0) / (8.0 * v);
    let cfl = 0.4;
    let dt_raw = cfl * grid.h_r / v;
    let steps = (epsilon / dt_raw).ceil().max(1.0);
    Ok(EvolutionConfig {
        t_final,
        epsilon,
        dt: epsilon / steps,
        scheme: Scheme::CrankNicolson,
        cfl,
        support_threshold: 1e-10,
        snapshot_every: 1,
    })
}

/// Multiply by the cutoff: `ψ_B = η ψ0`, `ψ_I = ψ0 − ψ_B`. The sum of the
/// two parts reconstructs `ψ0` exactly.
pub fn split_initial(
    grid: &Grid,
    f: usize,
    eta: &CutoffEta,
    psi0: &[C64],
) -> (Vec<C64>, Vec<C64>) {
    assert_eq!(psi0.len(), grid.n_nodes() * f, "split_initial: state size");
    let mut near = vec![c(0.0, 0.0); psi0.len()];
    let mut interior = vec![c(0.0, 0.0); psi0.len()];
    for ir in 0..grid.n_radial() {
        let e = eta.eval(grid.rs[ir]);
        for it in 0..grid.ntheta {
            let node = grid.node_index(ir, it);
            for comp in 0..f {
                let i = node * f + comp;
                near[i] = psi0[i] * e;
                interior[i] = psi0[i] - near[i];
            }
        }
    }
    (near, interior)
}

/// Diagnostics trace of one run: per-window series plus stored snapshots.
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub w_norms: Vec<f64>,
    /// ‖P ψ|∂‖_w of the glued state (the boundary-condition residual).
    pub boundary_residuals: Vec<f64>,
    /// Outermost radius carrying relative amplitude above the threshold.
    pub support_radii: Vec<f64>,
    /// w-norm of the out-of-domain component discarded when gluing the two
    /// window halves (0 for the initial row and for reference runs).
    pub gluing_discrepancies: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    /// Full-grid states at `snapshot_times`.
    pub snapshots: Vec<Vec<C64>>,
    /// Largest relative amplitude seen at the collar's outer face during
    /// near-boundary windows (finite-speed containment, measured).
    pub y_face_peak: f64,
    /// Largest relative amplitude seen at the inner face during interior
    /// windows.
    pub wall_peak: f64,
}

impl EvolutionTrace {
    fn new() -> EvolutionTrace {
        EvolutionTrace {
            times: Vec::new(),
            w_norms: Vec::new(),
            boundary_residuals: Vec::new(),
            support_radii: Vec::new(),
            gluing_discrepancies: Vec::new(),
            snapshot_times: Vec::new(),
            snapshots: Vec::new(),
            y_face_peak: 0.0,
            wall_peak: 0.0,
        }
    }

    fn push_snapshot(&mut self, t: f64, state: Vec<C64>) {
        if let Some(&last) = self.snapshot_times.last() {
            assert!(t > last || (t < last && self.times.last().is_some_and(|&lt| lt < last)),
                "snapshot times must be strictly monotone");
        }
        self.snapshot_times.push(t);
        self.snapshots.push(state);
    }

    /// `t,w_norm,boundary_residual,support_radius,gluing_discrepancy` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "t,w_norm,boundary_residual,support_radius,gluing_discrepancy"
        )?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[i],
                self.w_norms[i],
                self.boundary_residuals[i],
                self.support_radii[i],
                self.gluing_discrepancies[i]
            )?;
        }
        Ok(())
    }
}

fn max_amp(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// One Crank–Nicolson step `ψ ← (1 + i dt H/2)⁻¹ (1 − i dt H/2) ψ`, solved
/// through the w-Hermitian normal equations `(1 + μ²H²) x = (1 − iμH)² ψ`
/// (μ = dt/2), which conjugate gradients handles at O(1) condition number.
fn cn_step(h: &Csr, w: &[f64], dt: f64, psi: &mut Vec<C64>) -> Result<()> {
    let n = psi.len();
    let mu = 0.5 * dt;
    let hp = h.apply_alloc(psi);
    let hhp = h.apply_alloc(&hp);
    let mut rhs = vec![c(0.0, 0.0); n];
    for i in 0..n {
        rhs[i] = psi[i] - c(0.0, 2.0 * mu) * hp[i] - c(mu * mu, 0.0) * hhp[i];
    }
    let mut x = rhs.clone();
    let mut tmp = vec![c(0.0, 0.0); n];
    let apply = |v: &[C64], y: &mut [C64]| {
        h.apply(v, &mut tmp);
        let t2 = h.apply_alloc(&tmp);
        for i in 0..v.len() {
            y[i] = v[i] + c(mu * mu, 0.0) * t2[i];
        }
    };
    match cg_w(apply, &rhs, &mut x, w, CN_TOL, 400) {
        Ok(_) => {}
        // The normal equations bottom out near the rounding floor; a
        // stagnated residual far below the scheme error is still a valid
        // solve.
        Err(Error::SolverStalled { relres, .. }) if relres <= CN_TOL_ACCEPT => {}
        Err(e) => return Err(e),
    }
    *psi = x;
    Ok(())
}

/// One classical Runge–Kutta step for `ψ' = −iHψ`.
fn rk4_step(h: &Csr, dt: f64, psi: &mut Vec<C64>) {
    let n = psi.len();
    let mi = c(0.0, -1.0);
    let k1: Vec<C64> = h.apply_alloc(psi).iter().map(|z| mi * z).collect();
    let mut stage = vec![c(0.0, 0.0); n];
    for i in 0..n {
        stage[i] = psi[i] + c(0.5 * dt, 0.0) * k1[i];
    }
    let k2: Vec<C64> = h.apply_alloc(&stage).iter().map(|z| mi * z).collect();
    for i in 0..n {
        stage[i] = psi[i] + c(0.5 * dt, 0.0) * k2[i];
    }
    let k3: Vec<C64> = h.apply_alloc(&stage).iter().map(|z| mi * z).collect();
    for i in 0..n {
        stage[i] = psi[i] + c(dt, 0.0) * k3[i];
    }
    let k4: Vec<C64> = h.apply_alloc(&stage).iter().map(|z| mi * z).collect();
    for i in 0..n {
        psi[i] += c(dt / 6.0, 0.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn outer_face_pairs(
    metric: &dyn Metric,
    rep: &CliffordRep,
    grid: &Grid,
) -> Result<Vec<(usize, ndarray::Array2<C64>)>> {
    let last = grid.n_radial() - 1;
    let mut pairs = Vec::with_capacity(grid.ntheta);
    for it in 0..grid.ntheta {
        let sample = metric.sample(&grid.node_point(last, it))?;
        let bd = boundary_projector_outer(rep, &sample)?;
        pairs.push((grid.node_index(last, it), bd.q));
    }
    Ok(pairs)
}

/// Precomputed machinery of the split scheme on one grid: the full-grid
/// assembly, the interior operator (outer chiral condition only, then
/// w-symmetrized), the collar region X with its eigenbasis, and the cutoff.
pub struct SplitScheme {
    pub dh: DiscreteHamiltonian,
    pub eta: CutoffEta,
    pub v_max: f64,
    /// Outer-face-only elimination for the interior solve.
    pub interior_reduction: Reduction,
    pub h_interior: Csr,
    pub w_interior: Vec<f64>,
    pub x: RegionX,
    pub basis: SpectralBasis,
}

/// Assemble everything the window scheme needs. The Gaussian chart used to
/// size the collar is launched from the grid's own boundary ring with depth
/// equal to the radial extent, so the collar's outer face sits near the
/// radial midpoint and strictly contains the cutoff support.
pub fn build_split_scheme(
    metric: &dyn Metric,
    rep: &CliffordRep,
    grid: &Grid,
    potential: &PotentialB,
    mass: f64,
) -> Result<SplitScheme> {
    if grid.radial_periodic {
        return Err(Error::Grid(
            "build_split_scheme: the window scheme needs physical radial faces".into(),
        ));
    }
    let dh = assemble_hamiltonian(metric, rep, grid, potential, mass)?;
    let eta = CutoffEta::new(grid);
    let v_max = char_speed_max(metric, grid)?;

    let pairs = outer_face_pairs(metric, rep, grid)?;
    let interior_reduction = Reduction::new(grid.n_nodes(), rep.f, &pairs);
    let h_i_raw = interior_reduction.reduce_matrix(&dh.h_full);
    let w_interior = interior_reduction.reduced_weights(&dh.node_weights);
    let h_interior = h_i_raw.symmetrize_w(&w_interior);

    let chart = gaussian_normal_chart(metric, &grid.thetas, grid.r_outer - grid.r0)?;
    let x = build_region_x(metric, rep, &chart, grid, potential, mass)?;
    if eta.support_end() > x.r_mid - grid.h_r {
        return Err(Error::Region(format!(
            "build_split_scheme: cutoff support ends at {} but the collar's outer face sits \
             at {}; the near-boundary data would touch the face it must not see",
            eta.support_end(),
            x.r_mid
        )));
    }
    let basis = eigendecompose_x(&x.h_x, &x.w_x)?;

    Ok(SplitScheme {
        dh,
        eta,
        v_max,
        interior_reduction,
        h_interior,
        w_interior,
        x,
        basis,
    })
}

/// Result of one window monitor: the largest relative face amplitude seen.
struct WindowPeak(f64);

impl SplitScheme {
    pub fn f(&self) -> usize {
        self.dh.rep.f
    }

    pub fn grid(&self) -> &Grid {
        &self.dh.grid
    }

    /// Cutoff split of a full-grid state.
    pub fn split(&self, psi0: &[C64]) -> (Vec<C64>, Vec<C64>) {
        split_initial(self.grid(), self.f(), &self.eta, psi0)
    }

    /// Propagate the interior part one window by the method of lines on the
    /// operator without the inner boundary condition. Errors if amplitude
    /// above [`WINDOW_GUARD`] (relative) reaches the inner face — the
    /// finite-speed hypothesis behind the splitting would be broken.
    pub fn interior_evolve(
        &self,
        psi_i: &[C64],
        window: f64,
        cfg: &EvolutionConfig,
    ) -> Result<Vec<C64>> {
        let (out, _) = self.interior_evolve_monitored(psi_i, window, cfg, 0)?;
        Ok(out)
    }

    fn interior_evolve_monitored(
        &self,
        psi_i: &[C64],
        window: f64,
        cfg: &EvolutionConfig,
        window_index: usize,
    ) -> Result<(Vec<C64>, WindowPeak)> {
        let f = self.f();
        let nt = self.grid().ntheta;
        let mut red = self.interior_reduction.restrict(psi_i);
        if window == 0.0 {
            return Ok((self.interior_reduction.embed(&red), WindowPeak(0.0)));
        }
        let steps = (window.abs() / cfg.dt).ceil().max(1.0) as usize;
        let dt = window / steps as f64;
        let mut peak = 0.0f64;
        for s in 0..steps {
            match cfg.scheme {
                Scheme::CrankNicolson => cn_step(&self.h_interior, &self.w_interior, dt, &mut red)?,
                Scheme::Rk4 => rk4_step(&self.h_interior, dt, &mut red),
            }
            // Inner-face nodes keep their full fiber in the interior
            // reduction, so their amplitudes sit at the vector's head.
            let wall = max_amp(&red[..nt * f]);
            let global = max_amp(&red);
            if global > 0.0 {
                let rel = wall / global;
                peak = peak.max(rel);
                if rel > WINDOW_GUARD {
                    return Err(Error::WindowViolation {
                        window: window_index,
                        time: (s + 1) as f64 * dt,
                        locus: "inner face (interior half-solve)".into(),
                        amplitude: rel,
                        threshold: WINDOW_GUARD,
                    });
                }
            }
        }
        Ok((self.interior_reduction.embed(&red), WindowPeak(peak)))
    }

    /// Propagate the near-boundary part one window by the eigenfunction
    /// series of the collar region, extended by zero beyond X. Errors if
    /// amplitude above [`WINDOW_GUARD`] (relative) reaches the collar's
    /// outer face.
    pub fn boundary_evolve(&self, psi_b: &[C64], window: f64) -> Result<Vec<C64>> {
        let (out, _) = self.boundary_evolve_monitored(psi_b, window, 0)?;
        Ok(out)
    }

    fn boundary_evolve_monitored(
        &self,
        psi_b: &[C64],
        window: f64,
        window_index: usize,
    ) -> Result<(Vec<C64>, WindowPeak)> {
        let f = self.f();
        let nt = self.grid().ntheta;
        let x_nodes = self.x.grid.n_nodes();
        let x_full_len = x_nodes * f;
        // The collar grid shares r0, spacing and the angular nodes with the
        // base grid, so its unknowns are a prefix of the full-grid layout.
        let restricted = &psi_b[..x_full_len];
        let beyond = max_amp(&psi_b[x_full_len..]);
        let scale = max_amp(psi_b);
        if scale > 0.0 && beyond / scale > 1e-14 {
            return Err(Error::InitialData(format!(
                "boundary_evolve: near-boundary data carries relative amplitude {:.3e} \
                 beyond the collar region",
                beyond / scale
            )));
        }
        let red = self.x.reduction.restrict(restricted);
        let evolved = series_evolve(&self.basis, &red, window);
        let x_full = self.x.reduction.embed(&evolved);
        let y_amp = max_amp(&x_full[(x_nodes - nt) * f..]);
        let global = max_amp(&x_full);
        let mut peak = 0.0f64;
        if global > 0.0 {
            let rel = y_amp / global;
            peak = rel;
            if rel > WINDOW_GUARD {
                return Err(Error::WindowViolation {
                    window: window_index,
                    time: window,
                    locus: "collar outer face (near-boundary half-solve)".into(),
                    amplitude: rel,
                    threshold: WINDOW_GUARD,
                });
            }
        }
        let mut out = vec![c(0.0, 0.0); psi_b.len()];
        out[..x_full_len].copy_from_slice(&x_full);
        Ok((out, WindowPeak(peak)))
    }

    /// ‖P ψ|∂‖_w over the inner-face ring of a full-grid state.
    pub fn boundary_residual(&self, psi: &[C64]) -> f64 {
        let f = self.f();
        let mut acc = 0.0;
        for (bi, &node) in self.dh.boundary_nodes.iter().enumerate() {
            let p = &self.dh.boundary[bi].p;
            let mut n2 = 0.0;
            for i in 0..f {
                let mut pv = c(0.0, 0.0);
                for j in 0..f {
                    pv += p[[i, j]] * psi[node * f + j];
                }
                n2 += pv.norm_sqr();
            }
            acc += self.dh.node_weights[node] * n2;
        }
        acc.sqrt()
    }

    fn support_radius(&self, psi: &[C64], threshold: f64) -> f64 {
        support_interval(self.grid(), self.f(), psi, threshold)
            .map(|(_, hi)| hi)
            .unwrap_or(self.grid().r0)
    }

    /// Run the window scheme to `cfg.t_final` (either sign). `psi0` is a
    /// full-grid state satisfying the inner boundary condition (e.g. from
    /// `make_bump_data`); diagnostics are recorded at every window edge.
    pub fn evolve_cauchy(&self, psi0: &[C64], cfg: &EvolutionConfig) -> Result<EvolutionTrace> {
        if !(cfg.epsilon > 0.0) || !(cfg.dt > 0.0) {
            return Err(Error::InvalidParameter(
                "evolve_cauchy: window length and step must be positive".into(),
            ));
        }
        let n_full = self.grid().n_nodes() * self.f();
        if psi0.len() != n_full {
            return Err(Error::InvalidParameter(
                "evolve_cauchy: state size does not match the grid".into(),
            ));
        }
        let w_full = &self.dh.w_full;
        let mut trace = EvolutionTrace::new();
        let mut red = self.dh.reduction.restrict(psi0);
        let mut full = self.dh.reduction.embed(&red);
        let norm0 = norm_w(w_full, &full);
        let total = cfg.t_final.abs();
        let sign = if cfg.t_final < 0.0 { -1.0 } else { 1.0 };

        let record =
            |trace: &mut EvolutionTrace, t: f64, full: &[C64], glue: f64, win: usize, last: bool| {
                trace.times.push(t);
                trace.w_norms.push(norm_w(w_full, full));
                trace.boundary_residuals.push(self.boundary_residual(full));
                trace
                    .support_radii
                    .push(self.support_radius(full, cfg.support_threshold));
                trace.gluing_discrepancies.push(glue);
                let snap = match cfg.snapshot_every {
                    0 => win == 0 || last,
                    every => win % every == 0 || last,
                };
                if snap {
                    trace.push_snapshot(t, full.to_vec());
                }
            };

        record(&mut trace, 0.0, &full, 0.0, 0, total == 0.0);
        if total == 0.0 {
            return Ok(trace);
        }

        let n_windows = (total / cfg.epsilon).ceil() as usize;
        let mut t = 0.0f64;
        for win in 1..=n_windows {
            let remaining = total - t.abs();
            let window = sign * cfg.epsilon.min(remaining);
            let (psi_b, psi_i) = self.split(&full);
            let (b_out, b_peak) = self.boundary_evolve_monitored(&psi_b, window, win)?;
            let (i_out, i_peak) = self.interior_evolve_monitored(&psi_i, window, cfg, win)?;
            trace.y_face_peak = trace.y_face_peak.max(b_peak.0);
            trace.wall_peak = trace.wall_peak.max(i_peak.0);
            let mut glued = vec![c(0.0, 0.0); n_full];
            for i in 0..n_full {
                glued[i] = b_out[i] + i_out[i];
            }
            // Gluing projects back into the discrete domain; the discarded
            // out-of-domain component is the seam mismatch of the window.
            red = self.dh.reduction.restrict(&glued);
            full = self.dh.reduction.embed(&red);
            let mut disc2 = 0.0;
            for i in 0..n_full {
                disc2 += w_full[i] * (glued[i] - full[i]).norm_sqr();
            }
            t += window;
            let drift = (norm_w(w_full, &full) - norm0).abs() / norm0.max(1e-300);
            if drift > INSTABILITY_GUARD {
                return Err(Error::Invariant(format!(
                    "evolve_cauchy: w-norm drifted by {drift:.3e} after window {win}; \
                     the run is unstable"
                )));
            }
            record(&mut trace, t, &full, disc2.sqrt(), win, win == n_windows);
        }
        Ok(trace)
    }
}

/// Monolithic cross-validation solver: Crank–Nicolson on the grid operator
/// with the chiral condition imposed on both radial faces.
pub struct ReferenceSolver {
    pub grid: Grid,
    pub f: usize,
    pub reduction: Reduction,
    pub h: Csr,
    pub w: Vec<f64>,
    pub node_weights: Vec<f64>,
    boundary_nodes: Vec<usize>,
    boundary_p: Vec<ndarray::Array2<C64>>,
}

pub fn build_reference_solver(
    metric: &dyn Metric,
    rep: &CliffordRep,
    grid: &Grid,
    potential: &PotentialB,
    mass: f64,
) -> Result<ReferenceSolver> {
    let dh = assemble_hamiltonian(metric, rep, grid, potential, mass)?;
    let mut pairs: Vec<(usize, ndarray::Array2<C64>)> = dh
        .boundary_nodes
        .iter()
        .zip(&dh.boundary)
        .map(|(&n, bd)| (n, bd.q.clone()))
        .collect();
    pairs.extend(outer_face_pairs(metric, rep, grid)?);
    let reduction = Reduction::new(grid.n_nodes(), rep.f, &pairs);
    let h_raw = reduction.reduce_matrix(&dh.h_full);
    let w = reduction.reduced_weights(&dh.node_weights);
    let h = h_raw.symmetrize_w(&w);
    let boundary_p = dh.boundary.iter().map(|bd| bd.p.clone()).collect();
    Ok(ReferenceSolver {
        grid: grid.clone(),
        f: rep.f,
        reduction,
        h,
        w,
        node_weights: dh.node_weights,
        boundary_nodes: dh.boundary_nodes,
        boundary_p,
    })
}

impl ReferenceSolver {
    fn boundary_residual(&self, psi: &[C64]) -> f64 {
        let f = self.f;
        let mut acc = 0.0;
        for (bi, &node) in self.boundary_nodes.iter().enumerate() {
            let p = &self.boundary_p[bi];
            let mut n2 = 0.0;
            for i in 0..f {
                let mut pv = c(0.0, 0.0);
                for j in 0..f {
                    pv += p[[i, j]] * psi[node * f + j];
                }
                n2 += pv.norm_sqr();
            }
            acc += self.node_weights[node] * n2;
        }
        acc.sqrt()
    }

    /// Advance `psi` (reduced coordinates) by `window` with the configured
    /// integrator.
    pub fn step_window(&self, psi: &mut Vec<C64>, window: f64, cfg: &EvolutionConfig) -> Result<()> {
        if window == 0.0 {
            return Ok(());
        }
        let steps = (window.abs() / cfg.dt).ceil().max(1.0) as usize;
        let dt = window / steps as f64;
        for _ in 0..steps {
            match cfg.scheme {
                Scheme::CrankNicolson => cn_step(&self.h, &self.w, dt, psi)?,
                Scheme::Rk4 => rk4_step(&self.h, dt, psi),
            }
        }
        Ok(())
    }

    /// Monolithic run with the same window cadence as the split scheme, so
    /// traces can be compared row by row.
    pub fn evolve(&self, psi0: &[C64], cfg: &EvolutionConfig) -> Result<EvolutionTrace> {
        if !(cfg.epsilon > 0.0) || !(cfg.dt > 0.0) {
            return Err(Error::InvalidParameter(
                "reference evolve: window length and step must be positive".into(),
            ));
        }
        let n_full = self.grid.n_nodes() * self.f;
        if psi0.len() != n_full {
            return Err(Error::InvalidParameter(
                "reference evolve: state size does not match the grid".into(),
            ));
        }
        let mut trace = EvolutionTrace::new();
        let mut red = self.reduction.restrict(psi0);
        let mut full = self.reduction.embed(&red);
        let w_full = full_weights(&self.node_weights, self.f);
        let total = cfg.t_final.abs();
        let sign = if cfg.t_final < 0.0 { -1.0 } else { 1.0 };

        let record = |trace: &mut EvolutionTrace, t: f64, full: &[C64], win: usize, last: bool| {
            trace.times.push(t);
            trace.w_norms.push(norm_w(&w_full, full));
            trace.boundary_residuals.push(self.boundary_residual(full));
            trace.support_radii.push(
                support_interval(&self.grid, self.f, full, cfg.support_threshold)
                    .map(|(_, hi)| hi)
                    .unwrap_or(self.grid.r0),
            );
            trace.gluing_discrepancies.push(0.0);
            let snap = match cfg.snapshot_every {
                0 => win == 0 || last,
                every => win % every == 0 || last,
            };
            if snap {
                trace.push_snapshot(t, full.to_vec());
            }
        };

        record(&mut trace, 0.0, &full, 0, total == 0.0);
        if total == 0.0 {
            return Ok(trace);
        }
        let n_windows = (total / cfg.epsilon).ceil() as usize;
        let mut t = 0.0f64;
        for win in 1..=n_windows {
            let remaining = total - t.abs();
            let window = sign * cfg.epsilon.min(remaining);
            self.step_window(&mut red, window, cfg)?;
            full = self.reduction.embed(&red);
            t += window;
            record(&mut trace, t, &full, win, win == n_windows);
        }
        Ok(trace)
    }
}

fn full_weights(node_weights: &[f64], f: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(node_weights.len() * f);
    for &wn in node_weights {
        for _ in 0..f {
            w.push(wn);
        }
    }
    w
}

/// Radial interval `[lo, hi]` of nodes whose fiber amplitude exceeds
/// `threshold` times the global maximum; `None` when the state vanishes.
pub fn support_interval(
    grid: &Grid,
    f: usize,
    psi: &[C64],
    threshold: f64,
) -> Option<(f64, f64)> {
    let global = max_amp(psi);
    if global <= 0.0 {
        return None;
    }
    let cut = threshold * global;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ir in 0..grid.n_radial() {
        for it in 0..grid.ntheta {
            let node = grid.node_index(ir, it);
            let amp = max_amp(&psi[node * f..(node + 1) * f]);
            if amp > cut {
                lo = lo.min(grid.rs[ir]);
                hi = hi.max(grid.rs[ir]);
            }
        }
    }
    if lo.is_finite() {
        Some((lo, hi))
    } else {
        None
    }
}

/// Propagation-speed audit of a trace's snapshots.
pub struct SupportSpeedReport {
    pub v_max: f64,
    /// Worst outward support growth beyond `v_max·Δt + 2h` (negative when
    /// every interval respects the bound).
    pub max_outer_excess: f64,
    /// Worst inward support growth beyond the same bound.
    pub max_inner_excess: f64,
    pub violations: usize,
    pub ok: bool,
}

/// Check that the threshold-based support of the snapshots grows by at most
/// `v_max·Δt + 2h` per interval, on both radial sides. A positive threshold
/// is mandatory: discrete dispersion populates every node at rounding level,
/// so a zero threshold would declare full support instantly.
pub fn support_and_speed_check(
    trace: &EvolutionTrace,
    metric: &dyn Metric,
    grid: &Grid,
    f: usize,
    threshold: f64,
) -> Result<SupportSpeedReport> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(
            "support_and_speed_check: the amplitude threshold must be positive".into(),
        ));
    }
    if trace.snapshots.len() < 2 {
        return Err(Error::InvalidParameter(
            "support_and_speed_check: need at least two snapshots".into(),
        ));
    }
    let v_max = char_speed_max(metric, grid)?;
    let mut outer = f64::NEG_INFINITY;
    let mut inner = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for i in 1..trace.snapshots.len() {
        let dt = (trace.snapshot_times[i] - trace.snapshot_times[i - 1]).abs();
        let bound = v_max * dt + 2.0 * grid.h_r;
        let a = support_interval(grid, f, &trace.snapshots[i - 1], threshold);
        let b = support_interval(grid, f, &trace.snapshots[i], threshold);
        let (Some((lo0, hi0)), Some((lo1, hi1))) = (a, b) else {
            continue;
        };
        let out_excess = (hi1 - hi0) - bound;
        let in_excess = (lo0 - lo1) - bound;
        outer = outer.max(out_excess);
        inner = inner.max(in_excess);
        if out_excess > 0.0 || in_excess > 0.0 {
            violations += 1;
        }
    }
    Ok(SupportSpeedReport {
        v_max,
        max_outer_excess: outer,
        max_inner_excess: inner,
        violations,
        ok: violations == 0,
    })
}

#[cfg(test)]
mod tests;
