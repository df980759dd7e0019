//! Clifford representations, vielbein gauge and the spin connection.
//!
//! Flat gamma bases are pinned (see `docs/CONVENTIONS.md`): in 2+1 dimensions
//! `γ⁰ = σ₃, γ¹ = iσ₁, γ² = iσ₂` on spinors of size f = 2, and in 3+1 the
//! chiral basis `γ⁰ = offdiag(I, I)`, `γᵏ = offdiag(σₖ, −σₖ)` on f = 4. The
//! spin form is `S = γ⁰`, making every flat gamma S-self-adjoint.
//!
//! The vielbein gauge is fixed globally: `e₀` is the future unit normal of
//! the constant-t slices and the spatial legs Gram–Schmidt the coordinate
//! vectors `∂r, ∂θ[, ∂φ]` in that order against the slice metric, with
//! positive diagonal coefficients. Consequences used throughout: `ν̸ = γ⁰`,
//! `γᵗ = √(g^{tt}) γ⁰`, and the slice pairing `≺ψ|ν̸φ≻` is the plain `ψ†φ`.

use ndarray::{Array2, Array3};

use crate::geometry::{christoffels, Metric, MetricSample, Point};
use crate::linalg::{eigh_plain, max_abs};
use crate::{Error, Result, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Flat Clifford data for a spacetime dimension.
#[derive(Debug, Clone)]
pub struct CliffordRep {
    pub dim: usize,
    /// Spinor fiber dimension f.
    pub f: usize,
    /// Flat gammas γ^(a), a = 0..dim.
    pub gammas: Vec<Array2<C64>>,
    /// Spin form S (= γ^(0)); S† = S, S² = 1, S γ^(a) Hermitian.
    pub s: Array2<C64>,
}

/// The pinned flat representation for d ∈ {3, 4}.
pub fn flat_clifford_rep(dim: usize) -> Result<CliffordRep> {
    let sigma1 = ndarray::array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]];
    let sigma2 = ndarray::array![[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]];
    let sigma3 = ndarray::array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]];
    match dim {
        3 => {
            let g0 = sigma3.clone();
            let g1 = sigma1.mapv(|z| z * c(0., 1.));
            let g2 = sigma2.mapv(|z| z * c(0., 1.));
            Ok(CliffordRep {
                dim,
                f: 2,
                gammas: vec![g0, g1, g2],
                s: sigma3,
            })
        }
        4 => {
            let f = 4;
            let mut g0 = Array2::<C64>::zeros((f, f));
            for i in 0..2 {
                g0[[i, i + 2]] = c(1., 0.);
                g0[[i + 2, i]] = c(1., 0.);
            }
            let paulis = [sigma1, sigma2, sigma3];
            let mut gammas = vec![g0.clone()];
            for sk in &paulis {
                let mut gk = Array2::<C64>::zeros((f, f));
                for i in 0..2 {
                    for j in 0..2 {
                        gk[[i, j + 2]] = sk[[i, j]];
                        gk[[i + 2, j]] = -sk[[i, j]];
                    }
                }
                gammas.push(gk);
            }
            Ok(CliffordRep {
                dim,
                f,
                gammas,
                s: g0,
            })
        }
        _ => Err(Error::InvalidParameter(format!(
            "flat_clifford_rep: dimension {dim} not supported (use 3 or 4)"
        ))),
    }
}

impl CliffordRep {
    /// Minkowski signature factors η^{aa} = (+1, −1, …, −1).
    pub fn eta(&self, a: usize) -> f64 {
        if a == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Orthonormal frame `e_a^μ` in the slicing gauge; rows are frame legs,
/// columns chart components.
#[derive(Debug, Clone)]
pub struct Vielbein {
    pub dim: usize,
    /// `e[[a, μ]] = e_a^μ`.
    pub e: Array2<f64>,
}

/// Build the gauge-fixed vielbein of a metric sample: `e₀ = ν` (slice unit
/// normal) and spatial legs from Gram–Schmidt of `∂r, ∂θ[, ∂φ]` in the slice
/// metric, lower-triangular with positive diagonal.
pub fn build_vielbein(sample: &MetricSample) -> Result<Vielbein> {
    let d = sample.dim;
    let gtt = sample.ginv[[0, 0]];
    if !(gtt > 0.0) {
        return Err(Error::Degenerate(
            "build_vielbein: slices not spacelike (g^tt ≤ 0)".into(),
        ));
    }
    let mut e = Array2::<f64>::zeros((d, d));
    let sq = gtt.sqrt();
    for mu in 0..d {
        e[[0, mu]] = sample.ginv[[mu, 0]] / sq;
    }
    let h = sample.slice_metric();
    let hdot = |a: &[f64], b: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                acc += h[[i, j]] * a[i] * b[j];
            }
        }
        acc
    };
    let mut legs: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for k in 0..d - 1 {
        let mut v = vec![0.0; d - 1];
        v[k] = 1.0;
        for prev in &legs {
            let proj = hdot(&v, prev);
            for i in 0..d - 1 {
                v[i] -= proj * prev[i];
            }
        }
        let n = hdot(&v, &v);
        if !(n > 0.0) {
            return Err(Error::Degenerate(format!(
                "build_vielbein: slice metric degenerate in direction {k}"
            )));
        }
        let n = n.sqrt();
        for x in v.iter_mut() {
            *x /= n;
        }
        legs.push(v);
    }
    for (a, leg) in legs.iter().enumerate() {
        for al in 0..d - 1 {
            e[[a + 1, al + 1]] = leg[al];
        }
    }
    Ok(Vielbein { dim: d, e })
}

impl Vielbein {
    /// Co-frame `e^a_μ = η^{ab} g_{μν} e_b^ν`.
    pub fn coframe(&self, sample: &MetricSample) -> Array2<f64> {
        let d = self.dim;
        let mut co = Array2::<f64>::zeros((d, d));
        for a in 0..d {
            let eta = if a == 0 { 1.0 } else { -1.0 };
            for mu in 0..d {
                let mut acc = 0.0;
                for nu in 0..d {
                    acc += sample.g[[mu, nu]] * self.e[[a, nu]];
                }
                co[[a, mu]] = eta * acc;
            }
        }
        co
    }
}

/// Curved gammas `γ^μ = e_a^μ γ^(a)`; satisfy `{γ^μ, γ^ν} = 2 g^{μν}`.
pub fn curved_gammas(rep: &CliffordRep, vb: &Vielbein) -> Vec<Array2<C64>> {
    let d = rep.dim;
    let f = rep.f;
    let mut out = Vec::with_capacity(d);
    for mu in 0..d {
        let mut g = Array2::<C64>::zeros((f, f));
        for a in 0..d {
            let coeff = vb.e[[a, mu]];
            if coeff != 0.0 {
                g.zip_mut_with(&rep.gammas[a], |acc, &x| *acc += x * coeff);
            }
        }
        out.push(g);
    }
    out
}

/// Inverse of `γ^t`: since `(γ^t)² = g^{tt}`, it is `γ^t / g^{tt}`.
pub fn gamma_t_inv(gamma_t: &Array2<C64>, gtt: f64) -> Array2<C64> {
    gamma_t.mapv(|z| z / gtt)
}

/// Spin-connection matrices `σ_μ = ¼ ω_{μab} γ^(a) γ^(b)` at a point, with
/// `ω_{μab} = e_{b k}(∂_μ e_a^k + Γ^k_{μl} e_a^l)` antisymmetrized in (a, b).
/// Frame derivatives use central differences with step `1e−5` times the
/// local coordinate scale; stationarity and axisymmetry zero the t and φ
/// derivatives analytically.
pub fn spin_connection(
    metric: &dyn Metric,
    rep: &CliffordRep,
    p: &Point,
) -> Result<Vec<Array2<C64>>> {
    let d = metric.dim();
    let sample = metric.sample(p)?;
    let vb = build_vielbein(&sample)?;
    let gamma = christoffels(metric, p)?;

    // ∂_μ e_a^k by central differences (spatial μ only).
    let mut de = Array3::<f64>::zeros((d, d, d));
    for mu in 1..=2 {
        let h = 1e-5 * p.coords[mu].abs().max(1.0);
        let mut pp = p.clone();
        let mut pm = p.clone();
        pp.coords[mu] += h;
        pm.coords[mu] -= h;
        let vp = build_vielbein(&metric.sample(&pp)?)?;
        let vm = build_vielbein(&metric.sample(&pm)?)?;
        for a in 0..d {
            for k in 0..d {
                de[[mu, a, k]] = (vp.e[[a, k]] - vm.e[[a, k]]) / (2.0 * h);
            }
        }
    }

    let co = vb.coframe(&sample);
    // e_{b k} = g_{k ν} e_b^ν — the coframe without the η factor.
    let lower = |b: usize, k: usize| -> f64 {
        let eta = if b == 0 { 1.0 } else { -1.0 };
        eta * co[[b, k]]
    };

    let mut sigmas = Vec::with_capacity(d);
    for mu in 0..d {
        let mut omega = Array2::<f64>::zeros((d, d));
        for a in 0..d {
            for b in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    let mut nabla = de[[mu, a, k]];
                    for l in 0..d {
                        nabla += gamma[[k, mu, l]] * vb.e[[a, l]];
                    }
                    acc += lower(b, k) * nabla;
                }
                omega[[a, b]] = acc;
            }
        }
        // Antisymmetrize (metric compatibility holds only up to FD error)
        // and contract in the order that closes the Clifford compatibility
        // identity ∂_j γ^k + Γ^k_{jl} γ^l + [σ_j, γ^k] = 0: the measuring
        // frame index multiplies first.
        let mut sig = Array2::<C64>::zeros((rep.f, rep.f));
        for a in 0..d {
            for b in 0..d {
                let w = 0.5 * (omega[[b, a]] - omega[[a, b]]);
                if w != 0.0 {
                    let prod = rep.gammas[a].dot(&rep.gammas[b]);
                    sig.zip_mut_with(&prod, |acc, &x| *acc += x * (0.25 * w));
                }
            }
        }
        sigmas.push(sig);
    }
    Ok(sigmas)
}

/// Pointwise spin pairing `≺ψ|φ≻ = ψ† S φ`.
pub fn spin_product(rep: &CliffordRep, psi: &[C64], phi: &[C64]) -> C64 {
    let f = rep.f;
    let mut acc = c(0., 0.);
    for i in 0..f {
        for j in 0..f {
            acc += psi[i].conj() * rep.s[[i, j]] * phi[j];
        }
    }
    acc
}

/// Pointwise slice density `≺ψ|ν̸ψ≻`; in the slicing gauge `S ν̸ = 1`, so
/// this is the plain `|ψ|²`.
pub fn slice_density(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian form `M = S K̸` of a vector field K (upper components). Errors
/// unless M is positive definite, which requires K timelike future-directed.
pub fn k_form(
    rep: &CliffordRep,
    sample: &MetricSample,
    gammas: &[Array2<C64>],
    k_upper: &[f64],
) -> Result<Array2<C64>> {
    let d = rep.dim;
    let f = rep.f;
    // Lower the index: k_ν = g_{νμ} k^μ.
    let mut klow = vec![0.0; d];
    for nu in 0..d {
        for mu in 0..d {
            klow[nu] += sample.g[[nu, mu]] * k_upper[mu];
        }
    }
    let mut kslash = Array2::<C64>::zeros((f, f));
    for nu in 0..d {
        if klow[nu] != 0.0 {
            kslash.zip_mut_with(&gammas[nu], |acc, &x| *acc += x * klow[nu]);
        }
    }
    let m = rep.s.dot(&kslash);
    let herm = max_abs(&(&m - &m.mapv(|z| z).t().mapv(|z| z.conj())));
    if herm > 1e-12 * max_abs(&m).max(1.0) {
        return Err(Error::Invariant(format!(
            "k_form: S K̸ not Hermitian (defect {herm:.2e})"
        )));
    }
    let (vals, _) = eigh_plain(&m)?;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::Degenerate(format!(
            "k_form: S K̸ has signature fault (min eigenvalue {min:.3e}); \
             K is not timelike future-directed here"
        )));
    }
    Ok(m)
}
