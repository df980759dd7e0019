use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::geometry::closures::{ef_schwarzschild, flat_polar, kerr_ef, KerrParams};
use crate::geometry::{find_timelike_mix, gaussian_normal_chart};
use crate::linalg::{expm, random_cvec, to_array1};
use crate::spinor::flat_clifford_rep;

fn cc(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Flat annulus collar shared by the series/spectral tests: base 16×8 on
/// [1, 2], chart depth 1.0, so the Y face lands exactly on r = 1.5.
fn flat_collar() -> &'static (SpectralBasis, Vec<f64>) {
    static CELL: OnceLock<(SpectralBasis, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = flat_polar(1.0).unwrap();
        let rep = flat_clifford_rep(3).unwrap();
        let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
        let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
        let base = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
        let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();
        let basis = eigendecompose_x(&x.h_x, &x.w_x).unwrap();
        (basis, x.w_x)
    })
}

#[test]
fn region_flat_annulus_cuts_at_half_chart_depth() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let base = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
    let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();

    // Chart rays are radial lines; half depth is exactly 0.5 and the cut
    // lands on a base-grid node.
    assert!((x.r_mid_target - 1.5).abs() < 1e-9, "target {}", x.r_mid_target);
    assert!((x.r_mid - 1.5).abs() < 1e-12, "r_mid {}", x.r_mid);
    assert!((x.killing_min - 1.0).abs() < 1e-12, "⟨K,K⟩ = 1 in flat space");
    assert_eq!(x.grid.nr, 8);
    assert_eq!(x.inner.len(), 8);
    assert_eq!(x.outer.len(), 8);
    // Both faces lose half the fiber: 9·8·2 − 8 − 8.
    assert_eq!(x.reduction.reduced_len, 128);
    assert_eq!(x.w_x.len(), 128);
    for node in 0..x.grid.n_nodes() {
        let expect = if node < 8 || node >= 8 * 8 { 1 } else { 2 };
        assert_eq!(x.reduction.width(node), expect, "node {node}");
    }
}

#[test]
fn region_rejects_periodic_base_grid() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let base = Grid::periodic_radial(&m, 16, 8, 2.0, 0).unwrap();
    let err = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).err().expect("expected failure");
    assert!(matches!(err, Error::Region(_)), "{err}");
}

/// Kerr with spin 0.8 and boundary inside the Cauchy horizon r− = 0.4: the
/// scan over Killing mixes certifies b = 1.13 and the collar stays strictly
/// inside the horizon with ⟨K,K⟩ > 0 throughout.
#[test]
fn region_kerr_inside_cauchy_horizon() {
    let bstar = find_timelike_mix(
        |b| kerr_ef(KerrParams::new(1.0, 0.8, b, 0.2)?),
        0.2,
        (0.0, 2.0),
        201,
    )
    .unwrap();
    assert!((bstar - 1.13).abs() < 1e-9, "bstar {bstar}");
    let mk = kerr_ef(KerrParams::new(1.0, 0.8, bstar, 0.2).unwrap()).unwrap();
    let rep = flat_clifford_rep(4).unwrap();
    let om8: Vec<f64> = (0..8).map(|j| (j as f64 + 0.5) * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&mk, &om8, 0.15).unwrap();
    let base = Grid::new(&mk, 12, 8, 0.35, 1).unwrap();
    let x = build_region_x(&mk, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();

    assert!((x.r_mid - 0.25).abs() < 1e-12, "r_mid {}", x.r_mid);
    assert!(x.r_mid_target > 0.25 && x.r_mid_target < 0.2625, "target {}", x.r_mid_target);
    assert!(x.r_mid < 0.4, "collar must stay inside the Cauchy horizon");
    assert!(x.killing_min > 0.0, "killing_min {}", x.killing_min);
    assert_eq!(x.reduction.reduced_len, 128);

    let basis = eigendecompose_x(&x.h_x, &x.w_x).unwrap();
    let low = basis.omegas.iter().map(|w| w.abs()).fold(f64::INFINITY, f64::min);
    assert!(low > 9.0 && low < 10.0, "lowest |ω| {low}");

    let ec = ellipticity_certificate(&mk, &rep, &x.grid, 200, 11).unwrap();
    assert!(ec.delta > 0.2 && ec.delta < 0.35, "δ {}", ec.delta);
    assert!(ec.identity_residual < 1e-10, "identity {}", ec.identity_residual);
}

/// A deeper chart pushes the half-depth target past the last ring where the
/// mixed Killing field stays timelike; the cut must retreat to that ring.
#[test]
fn region_shrinks_until_killing_timelike() {
    let mk = kerr_ef(KerrParams::new(1.0, 0.8, 1.13, 0.2).unwrap()).unwrap();
    let rep = flat_clifford_rep(4).unwrap();
    let om: Vec<f64> = (0..8).map(|j| j as f64 * PI / 8.0 + 0.1).collect();
    let base = Grid::new(&mk, 24, 8, 0.5, 1).unwrap();

    let shallow = gaussian_normal_chart(&mk, &om, 0.3).unwrap();
    let x0 = build_region_x(&mk, &rep, &shallow, &base, &PotentialB::None, 0.2).unwrap();
    assert!((x0.r_mid - 0.3125).abs() < 1e-12);
    assert!(x0.r_mid_target > 0.3125 && x0.r_mid_target < 0.325);

    let deep = gaussian_normal_chart(&mk, &om, 0.4).unwrap();
    let x1 = build_region_x(&mk, &rep, &deep, &base, &PotentialB::None, 0.2).unwrap();
    let snapped = 0.2 + ((x1.r_mid_target - 0.2) / base.h_r).floor() * base.h_r;
    assert!(snapped > 0.34, "deep chart target should snap past the timelike zone");
    assert!((x1.r_mid - 0.3125).abs() < 1e-12, "r_mid {}", x1.r_mid);
    assert!(x1.r_mid < snapped - 1e-9, "cut must retreat below the snap point");
    assert!(x1.killing_min > 0.0);
}

#[test]
fn region_errors_when_killing_nowhere_timelike() {
    // Unmixed K = ∂t is spacelike near the equator at r = 0.2.
    let mk = kerr_ef(KerrParams::new(1.0, 0.8, 0.0, 0.2).unwrap()).unwrap();
    let rep = flat_clifford_rep(4).unwrap();
    let om8: Vec<f64> = (0..8).map(|j| (j as f64 + 0.5) * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&mk, &om8, 0.05).unwrap();
    let base = Grid::new(&mk, 12, 8, 0.35, 1).unwrap();
    let err = build_region_x(&mk, &rep, &chart, &base, &PotentialB::None, 0.2).err().expect("expected failure");
    assert!(matches!(err, Error::Region(_)), "{err}");
}

/// One interior node, f = 2: the decomposition is exact linear algebra.
#[test]
fn eigendecompose_single_node_toy() {
    let h = Csr::from_triplets(
        2,
        2,
        vec![
            (0, 0, cc(1.0, 0.0)),
            (0, 1, cc(0.0, 1.0)),
            (1, 0, cc(0.0, -1.0)),
            (1, 1, cc(2.0, 0.0)),
        ],
    );
    let w = vec![1.0, 1.0];
    let basis = eigendecompose_x(&h, &w).unwrap();
    assert_eq!(basis.omegas.len(), 2);
    let root = 1.25f64.sqrt();
    assert!((basis.omegas[0] - (1.5 - root)).abs() < 1e-12);
    assert!((basis.omegas[1] - (1.5 + root)).abs() < 1e-12);
    // Reconstruction Σ ω ψψ^{†w} reproduces the matrix.
    let dense = h.to_dense();
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = cc(0.0, 0.0);
            for q in 0..2 {
                acc += basis.omegas[q]
                    * basis.vectors[[i, q]]
                    * basis.vectors[[j, q]].conj()
                    * w[j];
            }
            assert!((acc - dense[[i, j]]).norm() < 1e-12);
        }
    }
}

#[test]
fn eigendecompose_rejects_non_hermitian_input() {
    let h = Csr::from_triplets(2, 2, vec![(0, 1, cc(1.0, 0.0))]);
    let err = eigendecompose_x(&h, &[1.0, 1.0]).err().expect("expected failure");
    assert!(matches!(err, Error::Invariant(_)), "{err}");
}

#[test]
fn basis_is_w_orthonormal_and_reconstructs() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let base = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
    let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();
    let basis = eigendecompose_x(&x.h_x, &x.w_x).unwrap();
    let n = x.w_x.len();
    assert_eq!(basis.omegas.len(), n);
    for q in 1..n {
        assert!(basis.omegas[q] >= basis.omegas[q - 1], "ascending order");
    }

    let mut gram_defect: f64 = 0.0;
    for p in 0..n {
        for q in p..n {
            let mut g = cc(0.0, 0.0);
            for i in 0..n {
                g += x.w_x[i] * basis.vectors[[i, p]].conj() * basis.vectors[[i, q]];
            }
            let want = if p == q { 1.0 } else { 0.0 };
            gram_defect = gram_defect.max((g - cc(want, 0.0)).norm());
        }
    }
    assert!(gram_defect < 1e-10, "orthonormality defect {gram_defect:.3e}");

    let dense = x.h_x.to_dense();
    let scale = max_abs(&dense);
    let mut rec = Array2::<C64>::zeros((n, n));
    for q in 0..n {
        for i in 0..n {
            for j in 0..n {
                rec[[i, j]] +=
                    basis.omegas[q] * basis.vectors[[i, q]] * basis.vectors[[j, q]].conj() * x.w_x[j];
            }
        }
    }
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((rec[[i, j]] - dense[[i, j]]).norm());
        }
    }
    assert!(defect < 1e-9 * scale, "reconstruction defect {defect:.3e} vs scale {scale:.3e}");
}

/// With B = 0 and m = 0 the flat collar spectrum is symmetric under
/// ω → −ω (chiral pairing).
#[test]
fn flat_massless_spectrum_is_chirally_paired() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let base = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
    let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.0).unwrap();
    let basis = eigendecompose_x(&x.h_x, &x.w_x).unwrap();
    let n = basis.omegas.len();
    let wmax = basis.omegas[n - 1].abs().max(basis.omegas[0].abs());
    for i in 0..n {
        let pair = (basis.omegas[i] + basis.omegas[n - 1 - i]).abs();
        assert!(pair < 1e-10 * wmax, "pairing defect {pair:.3e} at {i}");
    }
}

#[test]
fn series_reproduces_initial_data_and_eigenphases() {
    let (basis, w) = flat_collar();
    let n = w.len();
    let mut rng = seeded_rng(7);
    let psi0 = random_cvec(&mut rng, n);

    let back = series_evolve(basis, &psi0, 0.0);
    let diff: Vec<C64> = (0..n).map(|i| back[i] - psi0[i]).collect();
    assert!(norm_w(w, &diff) < 1e-12 * norm_w(w, &psi0));

    let mode: Vec<C64> = basis.vectors.column(5).to_vec();
    let t = 0.9;
    let evolved = series_evolve(basis, &mode, t);
    let phase = cc(0.0, -basis.omegas[5] * t).exp();
    let dphase: Vec<C64> = (0..n).map(|i| evolved[i] - phase * mode[i]).collect();
    assert!(norm_w(w, &dphase) < 1e-12);
}

/// Cross-validation against the scaling-and-squaring exponential of the
/// dense reduced Hamiltonian.
#[test]
fn series_matches_matrix_exponential() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let base = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
    let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();
    let basis = eigendecompose_x(&x.h_x, &x.w_x).unwrap();
    let n = x.w_x.len();
    let mut rng = seeded_rng(7);
    let psi0 = random_cvec(&mut rng, n);
    let t = 1.37;

    let series = series_evolve(&basis, &psi0, t);
    let prop = expm(&x.h_x.to_dense().mapv(|z| z * cc(0.0, -t))).unwrap();
    let oracle = prop.dot(&to_array1(&psi0));
    let diff: Vec<C64> = (0..n).map(|i| series[i] - oracle[i]).collect();
    assert!(norm_w(&x.w_x, &diff) < 1e-9, "series vs expm {:.3e}", norm_w(&x.w_x, &diff));

    let drift = (norm_w(&x.w_x, &series) - norm_w(&x.w_x, &psi0)).abs();
    assert!(drift < 1e-12, "norm drift {drift:.3e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// U(t+s) = U(t)U(s) and exact norm preservation at random times.
    #[test]
    fn series_group_property(t in -3.0f64..3.0, s in -3.0f64..3.0) {
        let (basis, w) = flat_collar();
        let n = w.len();
        let mut rng = seeded_rng(23);
        let psi0 = random_cvec(&mut rng, n);
        let two_step = series_evolve(basis, &series_evolve(basis, &psi0, t), s);
        let one_step = series_evolve(basis, &psi0, t + s);
        let diff: Vec<C64> = (0..n).map(|i| two_step[i] - one_step[i]).collect();
        prop_assert!(norm_w(w, &diff) < 1e-11);
        let drift = (norm_w(w, &two_step) - norm_w(w, &psi0)).abs();
        prop_assert!(drift < 1e-12);
    }
}

/// The ten smallest |ω_n| settle at second order under joint refinement —
/// the discrete shadow of essential self-adjointness on the collar.
#[test]
fn eigenvalues_converge_at_second_order() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let mut lows: Vec<Vec<f64>> = Vec::new();
    for (nr, nt) in [(16usize, 8usize), (32, 16), (64, 32)] {
        let base = Grid::new(&m, nr, nt, 2.0, 0).unwrap();
        let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();
        assert!((x.r_mid - 1.5).abs() < 1e-12, "fixed domain across levels");
        let basis = eigendecompose_x(&x.h_x, &x.w_x).unwrap();
        let mut absw: Vec<f64> = basis.omegas.iter().map(|w| w.abs()).collect();
        absw.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lows.push(absw[..10].to_vec());
    }
    for i in 0..10 {
        let d1 = (lows[1][i] - lows[0][i]).abs();
        let d2 = (lows[2][i] - lows[1][i]).abs();
        let order = (d1 / d2).log2();
        assert!(order >= 1.8, "mode {i}: d1 {d1:.3e}, d2 {d2:.3e}, order {order:.2}");
    }
}

/// On the flat circle the tangential operator is exactly selfadjoint in the
/// K̸-product (Z vanishes) and its spectrum is the lattice dispersion
/// ±sin(q h)/(h r0), approaching ±q/r0 at second order.
#[test]
fn flat_circle_operator_is_exact_lattice_dispersion() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let mut cluster_errs = Vec::new();
    for nj in [16usize, 32, 64] {
        let om: Vec<f64> = (0..nj).map(|j| j as f64 * 2.0 * PI / nj as f64).collect();
        let chart = gaussian_normal_chart(&m, &om, 0.5).unwrap();
        let op = boundary_operator_a(&m, &rep, &chart, 0).unwrap();

        assert!(op.k_herm_defect(&op.a) < 1e-13);
        assert!(max_abs(&op.z) < 1e-13, "Z must vanish on the flat circle");

        let spec = op.k_spectrum(&op.a).unwrap();
        assert_eq!(spec.len(), nj * 2);
        let mut absl: Vec<f64> = spec.iter().map(|x| x.abs()).collect();
        absl.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 0..4 {
            assert!(absl[i] < 1e-13, "zero modes fill the q = 0 fiber");
        }
        let h = 2.0 * PI / nj as f64;
        let lattice = h.sin() / h;
        for i in 4..8 {
            assert!((absl[i] - lattice).abs() < 1e-12, "nj {nj}: {} vs {lattice}", absl[i]);
        }
        cluster_errs.push((absl[4] - 1.0).abs());

        let ac = op.anticommutator_report();
        assert!(ac.paper_form < 1e-13);
        assert!(ac.generalized < 1e-13);
        assert!(ac.max_mixing < 1e-13);
    }
    let o1 = (cluster_errs[0] / cluster_errs[1]).log2();
    let o2 = (cluster_errs[1] / cluster_errs[2]).log2();
    assert!(o1 > 1.9 && o2 > 1.9, "orders {o1:.2} {o2:.2}");
}

#[test]
fn a_squared_certificate_is_exact_on_flat_circle() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let om: Vec<f64> = (0..32).map(|j| j as f64 * 2.0 * PI / 32.0).collect();
    let chart = gaussian_normal_chart(&m, &om, 0.5).unwrap();
    let op = boundary_operator_a(&m, &rep, &chart, 0).unwrap();
    let a2 = a_squared_certificate(&op).unwrap();
    // Principal coefficient g^{ΘΘ}/g^{ρρ} = 1/r0² = 1.
    assert!((a2.predicted - 1.0).abs() < 1e-12);
    assert!((a2.fitted - 1.0).abs() < 1e-12);
    assert!(a2.rel_mismatch < 1e-12);
    assert!(a2.intercept.abs() < 1e-10);
    assert!(a2.q_used.iter().all(|&q| q >= 1), "constant mode carries no signal");
}

/// Exterior ring r0 = 3 of a unit-mass black hole in horizon-penetrating
/// time: no frame dragging, so the textbook anticommutator identity holds
/// verbatim, and the A² principal coefficient converges at second order.
#[test]
fn schwarzschild_ring_anticommutator_and_a_squared() {
    let ms = ef_schwarzschild(1.0, 3.0).unwrap();
    let rep = flat_clifford_rep(4).unwrap();
    let mut mism = Vec::new();
    let mut zloc = Vec::new();
    for nj in [16usize, 32] {
        let om: Vec<f64> = (0..nj).map(|j| (j as f64 + 0.5) * PI / nj as f64).collect();
        let chart = gaussian_normal_chart(&ms, &om, 0.5).unwrap();
        let op = boundary_operator_a(&ms, &rep, &chart, 1).unwrap();
        assert!(op.k_herm_defect(&op.a) < 1e-12);
        let ac = op.anticommutator_report();
        assert!(ac.paper_form < 1e-10, "paper form {:.3e}", ac.paper_form);
        assert!(ac.generalized < 1e-10);
        assert!(ac.max_mixing < 1e-12, "no ρ–Φ mixing without spin");
        let a2 = a_squared_certificate(&op).unwrap();
        assert!((a2.predicted - 0.2).abs() < 1e-3, "predicted {}", a2.predicted);
        mism.push(a2.rel_mismatch);
        zloc.push(z_locality_defect(&op));
    }
    assert!(mism[1] < 0.05, "A² mismatch at nj = 32: {:.3e}", mism[1]);
    let a2_order = (mism[0] / mism[1]).log2();
    assert!(a2_order > 1.5, "A² order {a2_order:.2}");
    // Z acts as multiplication up to a defect of one order in h.
    let zl_order = (zloc[0] / zloc[1]).log2();
    assert!(zl_order > 0.9, "Z locality order {zl_order:.2} ({zloc:?})");
}

/// Kerr ring inside the Cauchy horizon with the certified Killing mix:
/// selfadjointness is exact, the dragging term G^{ρΦ} is visibly nonzero,
/// and the generalized Clifford identity absorbs it to rounding.
#[test]
fn kerr_ring_dragging_and_generalized_anticommutator() {
    let mk = kerr_ef(KerrParams::new(1.0, 0.8, 1.13, 0.2).unwrap()).unwrap();
    let rep = flat_clifford_rep(4).unwrap();
    let mut mism = Vec::new();
    let mut zloc = Vec::new();
    for nj in [16usize, 32] {
        let om: Vec<f64> = (0..nj).map(|j| (j as f64 + 0.5) * PI / nj as f64).collect();
        let chart = gaussian_normal_chart(&mk, &om, 0.1).unwrap();
        let op = boundary_operator_a(&mk, &rep, &chart, 1).unwrap();
        assert!(op.k_herm_defect(&op.a) < 1e-12);
        let ac = op.anticommutator_report();
        assert!(ac.paper_form < 1e-10, "orthogonal pairs still satisfy the identity");
        assert!(ac.generalized < 1e-10, "generalized {:.3e}", ac.generalized);
        assert!(ac.max_mixing > 0.1, "frame dragging must register: {}", ac.max_mixing);
        mism.push(a_squared_certificate(&op).unwrap().rel_mismatch);
        zloc.push(z_locality_defect(&op));
    }
    assert!(mism[1] < 0.05, "A² mismatch {:.3e}", mism[1]);
    assert!((mism[0] / mism[1]).log2() > 1.5);
    assert!((zloc[0] / zloc[1]).log2() > 0.9, "Z locality ({zloc:?})");
}

#[test]
fn boundary_operator_rejects_bad_configurations() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let om: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &om, 0.5).unwrap();
    // Azimuthal mode on a 3d metric.
    let err = boundary_operator_a(&m, &rep, &chart, 3).err().expect("expected failure");
    assert!(matches!(err, Error::InvalidParameter(_)));
    // Too few ring nodes.
    let om3: Vec<f64> = (0..3).map(|j| j as f64 * 2.0 * PI / 3.0).collect();
    let chart3 = gaussian_normal_chart(&m, &om3, 0.5).unwrap();
    let rep3 = flat_clifford_rep(3).unwrap();
    let err = boundary_operator_a(&m, &rep3, &chart3, 0).err().expect("expected failure");
    assert!(matches!(err, Error::InvalidParameter(_)));
    // K spacelike near the equator at r = 0.2 without a mix.
    let mk0 = kerr_ef(KerrParams::new(1.0, 0.8, 0.0, 0.2).unwrap()).unwrap();
    let rep4 = flat_clifford_rep(4).unwrap();
    let om16: Vec<f64> = (0..16).map(|j| (j as f64 + 0.5) * PI / 16.0).collect();
    let chartk = gaussian_normal_chart(&mk0, &om16, 0.05).unwrap();
    let err = boundary_operator_a(&mk0, &rep4, &chartk, 1).err().expect("expected failure");
    assert!(matches!(err, Error::Degenerate(_)), "{err}");
}

/// The Gårding ratio is a stable O(1) constant on a uniformly elliptic
/// collar and diverges when the sampled region crosses the horizons.
#[test]
fn garding_constant_stable_on_collar_divergent_across_horizon() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let mut flat_hats = Vec::new();
    for (nr, nt) in [(16usize, 8usize), (32, 16)] {
        let base = Grid::new(&m, nr, nt, 2.0, 0).unwrap();
        let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();
        let g = garding_estimate(&m, &rep, &x.grid, &x.reduction, &x.h_x, &x.w_x, 6, 17).unwrap();
        flat_hats.push(g.c_hat);
    }
    let ratio = flat_hats[1] / flat_hats[0];
    assert!((ratio - 1.0).abs() < 0.2, "flat Ĉ {flat_hats:?}");

    let mh = kerr_ef(KerrParams::new(1.0, 0.95, 0.0, 0.5).unwrap()).unwrap();
    let rep4 = flat_clifford_rep(4).unwrap();
    let mut hats = Vec::new();
    for (nr, nt) in [(16usize, 6usize), (32, 12)] {
        let grid = Grid::new(&mh, nr, nt, 4.0, 1).unwrap();
        let dh = assemble_hamiltonian(&mh, &rep4, &grid, &PotentialB::None, 0.2).unwrap();
        let g = garding_estimate(&mh, &rep4, &grid, &dh.reduction, &dh.h_red, &dh.w_red, 6, 19)
            .unwrap();
        hats.push(g.c_hat);
    }
    assert!(hats[0] > 3.0 * flat_hats[1], "horizon Ĉ already large: {hats:?}");
    assert!(hats[1] > 1.5 * hats[0], "refinement must blow Ĉ up: {hats:?}");
}

#[test]
fn ellipticity_certificate_flat_is_unity() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let grid = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
    let r = ellipticity_certificate(&m, &rep, &grid, 1000, 11).unwrap();
    assert!((r.delta - 1.0).abs() < 1e-12, "δ {}", r.delta);
    assert!(r.identity_residual < 1e-10, "identity {:.3e}", r.identity_residual);
}

#[test]
fn ellipticity_certificate_rejects_horizon_crossing_region() {
    let mk = kerr_ef(KerrParams::new(1.0, 0.95, 0.0, 0.5).unwrap()).unwrap();
    let rep = flat_clifford_rep(4).unwrap();
    let grid = Grid::new(&mk, 16, 6, 4.0, 1).unwrap();
    let err = ellipticity_certificate(&mk, &rep, &grid, 10, 7).err().expect("expected failure");
    assert!(matches!(err, Error::Region(_)), "{err}");
}

#[test]
fn spectrum_csv_is_deterministic_with_boundary_participation() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let omegas: Vec<f64> = (0..8).map(|j| j as f64 * 2.0 * PI / 8.0).collect();
    let chart = gaussian_normal_chart(&m, &omegas, 1.0).unwrap();
    let base = Grid::new(&m, 8, 4, 2.0, 0).unwrap();
    let x = build_region_x(&m, &rep, &chart, &base, &PotentialB::None, 0.2).unwrap();
    let basis = eigendecompose_x(&x.h_x, &x.w_x).unwrap();

    let mut once = Vec::new();
    write_spectrum_csv(&basis, &x.reduction, &mut once).unwrap();
    let mut twice = Vec::new();
    write_spectrum_csv(&basis, &x.reduction, &mut twice).unwrap();
    assert_eq!(once, twice, "byte-identical on rerun");

    let text = String::from_utf8(once).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,omega,participation_at_boundary"));
    let mut count = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[0].parse::<usize>().unwrap(), count);
        let part: f64 = cols[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&part), "participation {part}");
        count += 1;
    }
    assert_eq!(count, basis.omegas.len());
}

/// Collapses Z to its node-diagonal blocks and measures the K̸-norm defect
/// of the collapse on smooth ring profiles.
fn z_locality_defect(op: &BoundaryOperator) -> f64 {
    let f = op.f;
    let nj = op.nj;
    let mut zc = vec![Array2::<C64>::zeros((f, f)); nj];
    for j in 0..nj {
        for j2 in 0..nj {
            for i in 0..f {
                for i2 in 0..f {
                    zc[j][[i, i2]] += op.z[[j * f + i, j2 * f + i2]];
                }
            }
        }
    }
    let profiles: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|t: f64| t.sin().exp()),
        Box::new(|t: f64| t.cos() + 0.3 * (2.0 * t).sin()),
    ];
    let mut worst: f64 = 0.0;
    for prof in &profiles {
        for comp in 0..f {
            let mut u = vec![cc(0.0, 0.0); nj * f];
            for j in 0..nj {
                u[j * f + comp] = cc(prof(op.omegas[j]), 0.0);
            }
            let mut zu = vec![cc(0.0, 0.0); nj * f];
            for i in 0..nj * f {
                let mut acc = cc(0.0, 0.0);
                for j in 0..nj * f {
                    acc += op.z[[i, j]] * u[j];
                }
                zu[i] = acc;
            }
            let mut dv = vec![cc(0.0, 0.0); nj * f];
            for j in 0..nj {
                for i in 0..f {
                    let mut acc = cc(0.0, 0.0);
                    for i2 in 0..f {
                        acc += zc[j][[i, i2]] * u[j * f + i2];
                    }
                    dv[j * f + i] = zu[j * f + i] - acc;
                }
            }
            worst = worst.max(op.k_norm(&dv) / op.k_norm(&u));
        }
    }
    worst
}
