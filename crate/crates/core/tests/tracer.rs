use torus_spectral::complex::c;
use torus_spectral::kernel::Tolerances;
use torus_spectral::tracer::{
    classify_double_point, genus_window_report, solve_transversal, trace_graph, tube_audit,
    BranchTag, ClassifyOptions, Plane, Rect, SpectrumSample, Verdict,
};
use torus_spectral::{dual_lattice, Complex64, Dirac, Dirac64, Dual64, Lattice64, Potential};

fn dual() -> Dual64 {
    dual_lattice(&Lattice64::square()).unwrap()
}

fn vacuum(radius: f64) -> Dirac64 {
    Dirac::new(&Potential::zero(&dual()), radius).unwrap()
}

fn constant(q0: f64, radius: f64) -> Dirac64 {
    Dirac::new(&Potential::constant(&dual(), c(q0, 0.0)), radius).unwrap()
}

fn tol() -> Tolerances<f64> {
    Tolerances::default()
}

fn sample(a: Complex64, b: Complex64) -> SpectrumSample<f64> {
    SpectrumSample { a, b, sigma_min: 0.0, kernel_dim: 1, tag: BranchTag::GraphOverB }
}

#[test]
fn transversal_examples() {
    let d = vacuum(3.0);
    assert_eq!(solve_transversal(&d, (c(0.0, 0.0), c(0.3, 0.0)), 0.1, &tol()).unwrap(), vec![c(0.0, 0.0)]);
    assert!(solve_transversal(&d, (c(0.3, 0.0), c(0.3, 0.0)), 0.1, &tol()).unwrap().is_empty());
    // Blocks {v_0, w_0} and {v_1, w_-1} both give det λ² + λ + 0.09, with roots -0.1 and -0.9.
    let roots = solve_transversal(&constant(0.3, 3.0), (c(0.0, 0.0), c(1.0, 0.0)), 0.15, &tol()).unwrap();
    assert_eq!(roots.len(), 2, "{roots:?}");
    assert!(roots.iter().all(|r| (r - c(-0.1, 0.0)).norm() < 1e-12));
}

#[test]
fn transversal_counts_a_double_root_twice() {
    let roots = solve_transversal(&vacuum(2.0), (c(0.0, 0.0), c(0.0, 0.0)), 0.1, &tol()).unwrap();
    assert_eq!(roots, vec![c(0.0, 0.0), c(0.0, 0.0)]);
}

fn region() -> Rect<f64> {
    Rect { re: (2.15, 2.35), im: (0.15, 0.35) }
}

#[test]
fn vacuum_graph_is_the_line_a_equals_zero() {
    let s = trace_graph(&vacuum(3.0), Plane::B, region(), 0.05, 0.1, &tol()).unwrap();
    assert_eq!(s.len(), 25);
    for x in &s {
        assert!(x.a.norm() < 1e-14);
        assert_eq!(x.kernel_dim, 1);
        assert_eq!(x.tag, BranchTag::GraphOverB);
    }
}

#[test]
fn constant_graph_follows_the_hyperbola() {
    let s = trace_graph(&constant(0.3, 3.0), Plane::B, region(), 0.05, 0.1, &tol()).unwrap();
    for x in &s {
        assert!((x.a + 0.09 / x.b).norm() < 1e-8, "{:?}", x);
        assert!(x.a.norm() < 0.1);
        assert!(x.sigma_min <= 1e-7);
        assert_eq!(x.kernel_dim, 1);
    }
    // The reflected region over the a-plane gives the reflected samples.
    let r = region();
    let mirrored = Rect { re: r.re, im: (-r.im.1, -r.im.0) };
    let t = trace_graph(&constant(0.3, 3.0), Plane::A, mirrored, 0.05, 0.1, &tol()).unwrap();
    assert_eq!(s.len(), t.len());
    for y in &t {
        let hit = s.iter().any(|x| (y.a - x.b.conj()).norm() < 1e-12 && (y.b - x.a.conj()).norm() < 1e-12);
        assert!(hit);
        assert_eq!(y.tag, BranchTag::GraphOverA);
    }
}

#[test]
fn graph_region_must_avoid_vacuum_lines() {
    let bad = Rect { re: (2.0, 3.0), im: (0.0, 0.0) };
    let err = trace_graph(&constant(0.3, 3.0), Plane::B, bad, 0.1, 0.1, &tol()).unwrap_err();
    assert_eq!(err.kind(), "invalid_input");
}

#[test]
fn vacuum_double_points_are_nodes() {
    let lat = Lattice64::square();
    let d = vacuum(2.0);
    let r = classify_double_point(&d, &lat, (c(0.5, 0.0), c(0.0, -0.5)), 0.2, &tol(), &ClassifyOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Node);
    assert_eq!(r.kernel_dim, Some(2));
    assert_eq!(r.multiplier_real, Some(true));
    let node = r.node.unwrap();
    assert!((node.0 - c(0.5, 0.0)).norm() < 1e-10 && (node.1 - c(0.0, -0.5)).norm() < 1e-10);
    assert!(r.zeros.iter().all(|z| z.norm() < 1e-10));
}

#[test]
fn coupled_constant_double_point_is_a_handle() {
    let lat = Lattice64::square();
    let d = constant(0.3, 3.0);
    let r = classify_double_point(&d, &lat, (c(-0.5, 0.0), c(0.5, 0.0)), 0.2, &tol(), &ClassifyOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Handle);
    // Zeros of 4x² - 4|q₀|².
    assert_eq!(r.zeros.len(), 2);
    assert!(r.zeros.iter().any(|z| (z - c(0.3, 0.0)).norm() < 1e-8));
    assert!(r.zeros.iter().any(|z| (z + c(0.3, 0.0)).norm() < 1e-8));
}

#[test]
fn uncoupled_constant_double_point_far_out_is_a_real_node() {
    let lat = Lattice64::square();
    let d = constant(0.3, 3.0);
    let r = classify_double_point(&d, &lat, (c(0.5, 0.0), c(0.5, 0.0)), 0.2, &tol(), &ClassifyOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Node);
    assert_eq!(r.kernel_dim, Some(2));
    assert!(r.multiplier_defect.unwrap() <= 1e-8);
    let (a, b) = r.node.unwrap();
    // On both hyperbolas (b - ½)(a + ½) = -0.09 and (b + ½)(a - ½) = -0.09.
    assert!(((b - 0.5) * (a + 0.5) + 0.09).norm() < 1e-9);
    assert!(((b + 0.5) * (a - 0.5) + 0.09).norm() < 1e-9);
}

#[test]
fn close_uncoupled_lines_do_not_give_a_real_node() {
    // |c' + c''| = 1/2 < 2|q₀|: the two hyperbolas meet away from real multipliers.
    let lat = Lattice64::square();
    let d = constant(0.3, 3.0);
    let r = classify_double_point(&d, &lat, (c(0.0, 0.0), c(0.0, 0.5)), 0.2, &tol(), &ClassifyOptions::default());
    assert_eq!(r.unwrap_err().kind(), "classification_window");
}

#[test]
fn single_mode_potential_matches_degenerate_perturbation() {
    let lat = Lattice64::square();
    let q1 = 0.05;
    let q = Potential::new(&dual(), &[(c(0.5, 0.0), c(q1, 0.0))]).unwrap();
    let d = Dirac::new(&q, 2.0).unwrap();
    let g = genus_window_report(&d, &lat, 0.6, 0.2, &tol(), &ClassifyOptions::default());
    assert_eq!(g.reports.len(), 25);
    for (c2, c1, r) in &g.reports {
        let r = r.as_ref().unwrap();
        if (c1 + c2 - c(0.5, 0.0)).norm() < 1e-12 {
            // The coupled pair is an exact 2x2 block [[-x, -q̄], [q, x]].
            assert_eq!(r.verdict, Verdict::Handle, "{c2} {c1}");
            let mut z: Vec<f64> = r.zeros.iter().map(|z| z.re).collect();
            z.sort_by(f64::total_cmp);
            assert!((z[0] + q1).abs() < 1e-8 && (z[1] - q1).abs() < 1e-8);
        } else {
            assert_eq!(r.verdict, Verdict::Node, "{c2} {c1}");
        }
    }
    assert_eq!((g.handles, g.nodes, g.failures), (2, 23, 0));
}

#[test]
fn vacuum_genus_report_has_no_handles() {
    let lat = Lattice64::square();
    let g = genus_window_report(&vacuum(2.0), &lat, 0.6, 0.2, &tol(), &ClassifyOptions::default());
    assert_eq!((g.handles, g.nodes, g.indeterminate, g.failures), (0, 25, 0, 0));
    assert!(!g.note.is_empty());
}

#[test]
fn tube_audit_examples() {
    let dual = dual();
    let vac: Vec<_> = [c(3.0, 0.2), c(-4.0, 1.0)].iter().map(|&b| sample(c(0.0, 0.0), b)).collect();
    let a = tube_audit(&vac, 0.1, &dual, 1.0);
    assert_eq!(a.checked, 2);
    assert!(a.violations.is_empty() && a.max_distance == 0.0);

    let hyp: Vec<_> = [c(3.0, 0.2), c(0.3, 4.0), c(-5.0, -5.0)].iter().map(|&b| sample(-0.09 / b, b)).collect();
    let a = tube_audit(&hyp, 0.1, &dual, 1.0);
    assert!(a.violations.is_empty());
    assert!(a.max_distance <= 0.03 + 1e-15);

    // Waist of the handle at the origin for q₀ = 0.2: a = b = 0.2i, distance 0.2 to the lines.
    let waist = [sample(c(0.0, 0.2), c(0.0, 0.2))];
    assert_eq!(tube_audit(&waist, 0.15, &dual, 0.0).violations, vec![0]);
    assert!(tube_audit(&waist, 0.25, &dual, 0.0).violations.is_empty());
    // Inside the default core it is not audited at all.
    assert_eq!(tube_audit(&waist, 0.15, &dual, 2.0).checked, 0);
}
