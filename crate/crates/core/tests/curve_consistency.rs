mod common;

use elliptic_core::curve_solver::{picard_solve, solve_with_radius_policy, Jet};
use elliptic_core::elliptic_field::{germ_at, graph_plane, Example5, FieldDef};
use num_complex::Complex64 as C64;

#[test]
fn example_line_is_reproduced_by_the_solver() {
    let e = Example5::default();
    let field = FieldDef::Example5(e);
    let line = e.line(C64::new(0.1, 0.05)).unwrap();
    let x0 = C64::new(1.5, 0.0);
    let y0 = line.eval(x0).unwrap();
    let (lam, mu) = line.derivative(x0);
    let germ = germ_at(&field, (x0, y0), &graph_plane(lam, mu).unwrap()).unwrap();
    let sheared = |z: C64| line.eval(x0 + z).unwrap() - y0 - lam * z - mu * z.conj();

    let coeffs = common::holomorphic_jet(sheared, 8, 0.05);
    assert!(coeffs[0].norm() < 1e-12 && coeffs[1].norm() < 1e-10, "{coeffs:?}");
    let jet = Jet::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0)).with_higher(coeffs[2..8].to_vec());
    let (f, trace) = picard_solve(&germ, &jet, 0.1, 65).unwrap();
    let err = f.sup_error(sheared);
    assert!(err < 1e-6, "{err:e} {trace:?}");
}

#[test]
fn refinement_changes_solution_little() {
    let e = Example5::default();
    let field = FieldDef::Example5(e);
    let line = e.line(C64::new(-0.08, 0.12)).unwrap();
    let x0 = C64::new(0.2, 1.45);
    let (lam, mu) = line.derivative(x0);
    let germ = germ_at(&field, (x0, line.eval(x0).unwrap()), &graph_plane(lam, mu).unwrap()).unwrap();
    let jet = Jet::new(C64::new(0.0, 0.0), C64::new(0.05, 0.0));
    let (a, _) = picard_solve(&germ, &jet, 0.1, 65).unwrap();
    let (b, _) = picard_solve(&germ, &jet, 0.1, 129).unwrap();
    assert!(a.sup_difference(&b).unwrap() < 1e-6);
    let (_, t) = solve_with_radius_policy(&germ, &jet, 65).unwrap();
    assert!(t.converged);
}
