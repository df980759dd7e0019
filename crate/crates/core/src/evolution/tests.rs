use super::*;
use crate::geometry::closures::flat_polar;
use crate::operator::make_bump_data;
use crate::spinor::flat_clifford_rep;

#[test]
fn cutoff_is_one_on_plateau_zero_past_quarter() {
    let m = flat_polar(1.0).unwrap();
    let grid = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
    let eta = CutoffEta::new(&grid);
    assert_eq!(eta.eval(1.0), 1.0);
    assert_eq!(eta.eval(1.125), 1.0);
    assert_eq!(eta.eval(1.25), 0.0);
    assert_eq!(eta.eval(2.0), 0.0);
    assert!(eta.eval(1.19) > 0.0 && eta.eval(1.19) < 1.0);
}

#[test]
fn smoke_build_and_one_window() {
    let m = flat_polar(1.0).unwrap();
    let rep = flat_clifford_rep(3).unwrap();
    let grid = Grid::new(&m, 16, 8, 2.0, 0).unwrap();
    let pot = PotentialB::None;
    let scheme = build_split_scheme(&m, &rep, &grid, &pot, 0.2).unwrap();
    let mut dir = vec![C64::new(0.0, 0.0); rep.f];
    dir[0] = C64::new(1.0, 0.0);
    let psi0 = make_bump_data(&grid, &rep, (1.25, 0.0), (0.15, 1e3), &dir).unwrap();
    let mut cfg = standard_config(&m, &grid, 0.0).unwrap();
    cfg.t_final = cfg.epsilon * 2.0;
    let trace = scheme.evolve_cauchy(&psi0, &cfg).unwrap();
    assert_eq!(trace.times.len(), 3);
    eprintln!(
        "norms {:?} bres {:?} glue {:?} yf {:.3e} wall {:.3e}",
        trace.w_norms, trace.boundary_residuals, trace.gluing_discrepancies,
        trace.y_face_peak, trace.wall_peak
    );
}
