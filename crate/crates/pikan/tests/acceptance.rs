//! End-to-end acceptance gate: one test per shipping requirement, each
//! printing a PASS line (visible with `--nocapture`; the harness line per
//! test doubles as the pass/fail record). The heavy solver runs mirror the
//! bundled problem defaults at documented reduced densities.

use std::sync::Arc;
use std::time::Instant;

use pikan::autodiff::Tape;
use pikan::baseline::{self, CennProblem, Mlp};
use pikan::bspline::BSplineGrid;
use pikan::dem::{AdmissibleField, DemProblem, DistanceFactor, Extension, FieldNetwork, Normalization};
use pikan::elasticity::{strain_from_gradient, stress, Material, PlaneAssumption};
use pikan::geometry::{
    tensor_rule, triangulate, BoundarySegment, Curve, Domain, MaterialRegion, Point2, Prescribed,
    Scheme,
};
use pikan::kan::{param_count, KanConfig, KanNetwork};
use pikan::optimize::{minimize, LbfgsConfig};
use pikan::problems::{self, assemble, builtin, AnalyticalBeam, BUILTIN_NAMES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- shared helpers ----

fn kan(shape: &[usize], grid_size: usize, order: usize, grid_range: (f64, f64)) -> KanNetwork {
    KanNetwork::new(KanConfig {
        shape: shape.to_vec(),
        grid_size,
        order,
        grid_range,
        base_activation: Default::default(),
    })
}

/// Displacements at `pts` for a fixed parameter vector.
fn displacements<N: FieldNetwork>(
    field: &AdmissibleField<N>,
    theta: &[f64],
    pts: &[Point2],
) -> Vec<[f64; 2]> {
    let mut tape = Tape::new();
    tape.register_params(theta);
    let mark = tape.watermark();
    pts.iter()
        .map(|&p| {
            tape.rewind(mark);
            let u = field.displacement(&mut tape, p);
            [tape.value(u[0].v), tape.value(u[1].v)]
        })
        .collect()
}

/// Displacement gradient [[dux/dx, dux/dy], [duy/dx, duy/dy]] at `pts`.
fn displacement_gradients<N: FieldNetwork>(
    field: &AdmissibleField<N>,
    theta: &[f64],
    pts: &[Point2],
) -> Vec<[[f64; 2]; 2]> {
    let mut tape = Tape::new();
    tape.register_params(theta);
    let mark = tape.watermark();
    pts.iter()
        .map(|&p| {
            tape.rewind(mark);
            let u = field.displacement(&mut tape, p);
            [
                [tape.value(u[0].dx), tape.value(u[0].dy)],
                [tape.value(u[1].dx), tape.value(u[1].dy)],
            ]
        })
        .collect()
}

fn train<N: FieldNetwork>(
    problem: &DemProblem<N>,
    epochs: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let cfg = LbfgsConfig { epochs, ..Default::default() };
    let theta0 = problem.field.network.init(seed);
    let result = minimize(
        |theta| {
            let (report, grad) = problem.loss_and_grad(theta)?;
            Ok((report.total, grad))
        },
        &theta0,
        &cfg,
        |_, _| {},
    )
    .expect("training failed");
    let losses = result.history.iter().map(|s| s.loss).collect();
    (result.theta, losses)
}

/// Unit square with one material, left edge clamped, right edge loaded.
fn unit_square_problem() -> (Domain, AdmissibleField, Vec<Material>) {
    let contains: pikan::geometry::Predicate = Arc::new(|p: Point2| {
        (-1e-12..=1.0 + 1e-12).contains(&p.x) && (-1e-12..=1.0 + 1e-12).contains(&p.y)
    });
    let rect = vec![
        Curve::Segment { a: Point2::new(0.0, 0.0), b: Point2::new(1.0, 0.0) },
        Curve::Segment { a: Point2::new(1.0, 0.0), b: Point2::new(1.0, 1.0) },
        Curve::Segment { a: Point2::new(1.0, 1.0), b: Point2::new(0.0, 1.0) },
        Curve::Segment { a: Point2::new(0.0, 1.0), b: Point2::new(0.0, 0.0) },
    ];
    let domain = Domain {
        contains,
        bbox: (Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)),
        outer_loops: vec![rect],
        hole_loops: vec![],
        interface_chains: vec![],
        regions: vec![MaterialRegion {
            id: 1,
            membership: Arc::new(|_| true),
            material_id: 0,
        }],
    };
    let field = AdmissibleField {
        network: kan(&[2, 3, 2], 5, 3, (0.0, 1.0)),
        normalization: Normalization { length: 1.0, origin: (0.0, 0.0) },
        distance: [DistanceFactor::XPlane { at: 0.0 }, DistanceFactor::XPlane { at: 0.0 }],
        extension: [Extension::Zero, Extension::Zero],
    };
    let materials = vec![Material::new(1000.0, 0.3, PlaneAssumption::PlaneStress)];
    (domain, field, materials)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

// ---- 1: homogeneous cantilever against closed-form beam theory ----

#[test]
fn a01_homogeneous_cantilever_matches_beam_theory() {
    let spec = builtin("cantilever_homogeneous").unwrap();
    let network = kan(&[2, 5, 5, 5, 2], 20, 3, (0.0, 1.0));
    let problem =
        assemble(&spec, network, Scheme::TriangleCentroid, 0.05, spec.defaults.boundary_points)
            .unwrap();
    let (theta, losses) = train(&problem, 3000, 42);
    assert!(losses.len() <= 3000);

    let pts = [Point2::new(2.0, 0.0), Point2::new(5.0, 0.0), Point2::new(8.0, 0.0)];
    let targets = [0.0168, 0.033, 0.0384];
    let us = displacements(&problem.field, &theta, &pts);
    // pinned accuracy: |u_x| within 2% at each published sample point
    for ((u, target), p) in us.iter().zip(targets).zip(pts) {
        let got = u[0].abs();
        let rel = (got - target).abs() / target;
        assert!(
            rel < 0.02,
            "|u_x({},{})| = {got:.6}, want {target} within 2% (off by {:.2}%)",
            p.x,
            p.y,
            rel * 100.0
        );
    }
    // sanity: the analytic profile agrees with the pinned targets
    let beam = AnalyticalBeam::homogeneous_cantilever();
    for (p, target) in pts.iter().zip(targets) {
        assert!((beam.ux(p.x, p.y).abs() - target).abs() / target < 0.02);
    }
    println!("[ 1/11] homogeneous cantilever within 2% of beam theory: PASS");
}

// ---- 2: exact parameter counts ----

#[test]
fn a02_parameter_counts_exact() {
    assert_eq!(param_count(&[2, 5, 5, 5, 2], 10, 3), 1050);
    assert_eq!(param_count(&[2, 5, 5, 5, 2], 20, 3), 1750);
    assert_eq!(param_count(&[2, 5, 5, 5, 2], 10, 2), 980);
    assert_eq!(baseline::mlp_param_count(&[2, 30, 30, 30, 30, 2]), 2942);
    println!("[ 2/11] parameter counts 1050/1750/980 spline, 2942 dense: PASS");
}

// ---- 3: essential boundary conditions hold for arbitrary parameters ----

#[test]
fn a03_essential_boundary_exact_for_random_parameters() {
    let n_samples = 10_000usize;
    let mut worst = 0.0f64;
    for name in BUILTIN_NAMES {
        let spec = builtin(name).unwrap();
        let d = &spec.defaults;
        let network = kan(&d.shape, d.grid_size, d.order, d.grid_range);
        let n_params = network.n_params();
        let field = AdmissibleField {
            network,
            normalization: spec.normalization,
            distance: spec.distance.clone(),
            extension: spec.extension.clone(),
        };

        // sample points spread over the essential segments by length
        let total: f64 = spec.essential.iter().map(|s| s.curve.length()).sum();
        let mut samples: Vec<(Point2, (bool, bool), (f64, f64))> = Vec::new();
        for seg in &spec.essential {
            let (value, mask) = match &seg.prescribed {
                Prescribed::Displacement { value, mask } => (value, *mask),
                _ => unreachable!("essential segment without displacement data"),
            };
            let share = if total > 0.0 { seg.curve.length() / total } else { 1.0 };
            let m = ((n_samples as f64 * share).round() as usize).max(1);
            for i in 0..m {
                let p = seg.curve.point((i as f64 + 0.5) / m as f64);
                samples.push((p, mask, value(p)));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let pts: Vec<Point2> = samples.iter().map(|s| s.0).collect();
            let us = displacements(&field, &theta, &pts);
            for (u, (_, mask, want)) in us.iter().zip(&samples) {
                if mask.0 {
                    worst = worst.max((u[0] - want.0).abs());
                }
                if mask.1 {
                    worst = worst.max((u[1] - want.1).abs());
                }
            }
        }
    }
    // tolerance: 1e-12 times the 1 mm characteristic displacement scale
    assert!(worst < 1e-12, "max essential-boundary violation {worst:e}");
    println!("[ 3/11] essential boundaries exact to 1e-12 mm for random parameters: PASS");
}

// ---- 4: loss gradient against central finite differences ----

#[test]
fn a04_loss_gradient_matches_finite_differences() {
    let (domain, field, materials) = unit_square_problem();
    let interior = tensor_rule(&domain, 5, 5, Scheme::Simpson).unwrap();
    let load = BoundarySegment::natural(
        Curve::Segment { a: Point2::new(1.0, 0.0), b: Point2::new(1.0, 1.0) },
        Arc::new(|_| (3.0, -5.0)),
    );
    let tractions = pikan::geometry::boundary_rule(&load, 11)
        .unwrap()
        .into_iter()
        .map(|(p, weight)| pikan::dem::TractionSample { p, weight, tx: 3.0, ty: -5.0 })
        .collect();
    let problem = DemProblem { field, interior, materials, tractions };

    let theta = problem.field.network.init(7);
    let (_, grad) = problem.loss_and_grad(&theta).unwrap();
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut max_rel = 0.0f64;
    for i in 0..theta.len() {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut tp = theta.clone();
        tp[i] += h;
        let mut tm = theta.clone();
        tm[i] -= h;
        let (rp, _) = problem.loss_and_grad(&tp).unwrap();
        let (rm, _) = problem.loss_and_grad(&tm).unwrap();
        let fd = (rp.total - rm.total) / (2.0 * h);
        let scale = grad[i].abs().max(fd.abs()).max(1e-6 * gmax);
        max_rel = max_rel.max((grad[i] - fd).abs() / scale);
    }
    assert!(max_rel < 1e-4, "max relative gradient error {max_rel:e}");
    println!("[ 4/11] energy gradient matches finite differences to 1e-4: PASS");
}

// ---- 5: B-spline basis identities ----

#[test]
fn a05_bspline_identities() {
    // partition of unity on the grid interior
    for (g, k) in [(10usize, 3usize), (20, 3), (10, 2)] {
        let grid = BSplineGrid::new((0.0, 1.0), g, k);
        for i in 0..1000 {
            let x = (i as f64 + 0.5) / 1000.0;
            let s: f64 = grid.basis_full(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "partition of unity: {s} at {x}");
        }
    }

    // degree-k polynomial reproduction via the blossom (polar form):
    // the coefficient of basis p for x^d is e_d of its k interior knots
    // divided by C(k, d)
    let (a, b, g, k) = (0.0, 1.0, 10usize, 3usize);
    let grid = BSplineGrid::new((a, b), g, k);
    let h = grid.knot_spacing();
    let poly = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x + 0.25;
    let coeff_for = |p: isize| -> f64 {
        let knots: Vec<f64> =
            (p + 1 - k as isize..=p).map(|i| a + i as f64 * h).collect();
        let e1: f64 = knots.iter().sum();
        let e2: f64 = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .map(|(i, j)| knots[i] * knots[j])
            .sum();
        let e3: f64 = knots[0] * knots[1] * knots[2];
        // binomials C(3, d): 1, 3, 3, 1
        0.25 + 0.5 * (e1 / 3.0) - (e2 / 3.0) + 2.0 * e3
    };
    let coeffs: Vec<f64> = (0..grid.n_basis() as isize).map(coeff_for).collect();
    let mut max_resid = 0.0f64;
    for i in 0..200 {
        let x = (i as f64 + 0.5) / 200.0;
        let s: f64 = grid
            .basis_full(x)
            .iter()
            .zip(&coeffs)
            .map(|(bv, c)| bv * c)
            .sum();
        max_resid = max_resid.max((s - poly(x)).abs());
    }
    assert!(max_resid < 1e-9, "cubic reproduction residual {max_resid:e}");

    // derivative against central differences
    let fd_h = 1e-6;
    let mut max_err = 0.0f64;
    for i in 0..500 {
        let x = -0.2 + 1.4 * (i as f64 + 0.5) / 500.0;
        let (first, d) = grid.basis_nonzero_deriv(x);
        let fp = grid.basis_full(x + fd_h);
        let fm = grid.basis_full(x - fd_h);
        for (j, dj) in d.iter().enumerate() {
            let fd = (fp[first + j] - fm[first + j]) / (2.0 * fd_h);
            max_err = max_err.max((dj - fd).abs() / fd.abs().max(dj.abs()).max(1.0));
        }
    }
    assert!(max_err < 1e-6, "basis derivative FD error {max_err:e}");
    println!("[ 5/11] spline partition of unity, cubic reproduction, derivatives: PASS");
}

// ---- 6: quadrature rules ----

#[test]
fn a06_quadrature_rules() {
    let (domain, _, _) = unit_square_problem();

    // Simpson integrates x^2 y^2 exactly with a 3x3 grid
    let simpson = tensor_rule(&domain, 3, 3, Scheme::Simpson).unwrap();
    let got = simpson.integrate(|p| p.x * p.x * p.y * p.y);
    assert!((got - 1.0 / 9.0).abs() < 1e-12, "simpson x2y2: {got}");

    // centroid rule is exact on linear integrands
    let mesh = triangulate(&domain, 0.2).unwrap();
    let centroid = pikan::geometry::centroid_rule(&mesh);
    let lin = centroid.integrate(|p| 2.0 * p.x + 3.0 * p.y - 1.0);
    assert!((lin - 1.5).abs() < 1e-12, "centroid linear: {lin}");

    // trapezoid error on x^2 shrinks at second order: ratio 4 +- 0.2
    let exact = 1.0 / 3.0;
    let e1 = (tensor_rule(&domain, 5, 5, Scheme::Trapezoid)
        .unwrap()
        .integrate(|p| p.x * p.x)
        - exact)
        .abs();
    let e2 = (tensor_rule(&domain, 9, 9, Scheme::Trapezoid)
        .unwrap()
        .integrate(|p| p.x * p.x)
        - exact)
        .abs();
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() < 0.2, "trapezoid order ratio {ratio}");

    // triangle-based weights sum to the domain area
    let beam = builtin("cantilever_straight").unwrap();
    for scheme in [Scheme::TriangleCentroid, Scheme::DelaunayArea] {
        let rule = problems::interior_rule(&beam, scheme, 0.1).unwrap();
        let area = rule.total_weight();
        assert!(
            (area - 16.0).abs() / 16.0 < 1e-9,
            "{scheme:?} weight sum {area} != 16"
        );
    }
    println!("[ 6/11] quadrature exactness and convergence orders: PASS");
}

// ---- 7: laminated substrate under a pure end moment ----

#[test]
fn a07_laminate_bending_tip_deflection() {
    let spec = builtin("dbc").unwrap();
    let network = kan(&[2, 5, 5, 5, 2], 10, 2, (-1.0, 1.0));
    // 161 x 41 Simpson lattice: spacing 0.025 on the 4 x 1 substrate
    let problem =
        assemble(&spec, network, Scheme::Simpson, 0.025, spec.defaults.boundary_points).unwrap();
    assert_eq!(problem.interior.points.len(), 161 * 41);
    let (theta, losses) = train(&problem, 3000, 42);
    assert!(losses.len() <= 3000);

    let oracle = problems::dbc_beam_oracle();
    let tip = displacements(&problem.field, &theta, &[Point2::new(4.0, 0.0)])[0][1].abs();
    let rel = (tip - oracle.tip_deflection).abs() / oracle.tip_deflection;
    assert!(
        rel < 0.10,
        "tip deflection {tip:.5} vs {:.5} (off by {:.1}%)",
        oracle.tip_deflection,
        rel * 100.0
    );
    println!("[ 7/11] laminate tip deflection within 10% of bending oracle: PASS");
}

// ---- 8: bimaterial interface physics of the single-network field ----

#[test]
fn a08_interface_continuity_properties() {
    let spec = builtin("cantilever_straight").unwrap();
    // reduced density: coarser spline grid and mesh than the full run
    let network = kan(&[2, 5, 5, 5, 2], 5, 3, (0.0, 1.0));
    let problem = assemble(&spec, network, Scheme::TriangleCentroid, 0.1, 101).unwrap();
    let (theta, _) = train(&problem, 800, 42);

    let pts: Vec<Point2> =
        (0..50).map(|i| Point2::new((i as f64 + 0.5) * 8.0 / 50.0, 1.0)).collect();

    // (a) one network, one field: both-sided evaluation is identical
    let ua = displacements(&problem.field, &theta, &pts);
    let ub = displacements(&problem.field, &theta, &pts);
    for (a, b) in ua.iter().zip(&ub) {
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    // (b) traction continuity across y = 1 from one-sided strain probes.
    // Known limitation, kept as a red marker: the single smooth network
    // cannot carry the strain jump the bimaterial solution needs, so at
    // probe offsets far below the quadrature scale both sides see the
    // same strain and the tractions differ by the stiffness ratio
    // (1 - 8500/43000 = 80.2%) no matter how long training runs.
    let off = 1e-3;
    let above: Vec<Point2> = pts.iter().map(|p| Point2::new(p.x, p.y + off)).collect();
    let below: Vec<Point2> = pts.iter().map(|p| Point2::new(p.x, p.y - off)).collect();
    let ga = displacement_gradients(&problem.field, &theta, &above);
    let gb = displacement_gradients(&problem.field, &theta, &below);
    let mat_below = &problem.materials[0];
    let mat_above = &problem.materials[1];
    let traction_y = |g: &[[f64; 2]; 2], m: &Material| {
        let s = stress(m, &strain_from_gradient(g[0][0], g[0][1], g[1][0], g[1][1]));
        (s.xy, s.yy) // sigma . n with n = (0, 1)
    };
    let mismatches: Vec<f64> = ga
        .iter()
        .zip(&gb)
        .map(|(g1, g2)| {
            let ta = traction_y(g1, mat_above);
            let tb = traction_y(g2, mat_below);
            let diff = (ta.0 - tb.0).hypot(ta.1 - tb.1);
            let scale = ta.0.hypot(ta.1).max(tb.0.hypot(tb.1));
            diff / scale
        })
        .collect();
    let med = median(mismatches);
    assert!(med < 0.15, "median interface traction mismatch {:.1}%", med * 100.0);
    println!("[ 8/11] interface displacement continuity and traction balance: PASS");
}

// ---- 9: domain-decomposition comparator ----

fn straight_beam_cenn(beta: f64) -> CennProblem {
    let spec = builtin("cantilever_straight").unwrap();
    let shape = vec![2usize, 10, 10, 2];
    let n_each = baseline::mlp_param_count(&shape);
    let fields: Vec<AdmissibleField<Mlp>> = (0..spec.materials.len())
        .map(|k| AdmissibleField {
            network: Mlp::new(shape.clone()).unwrap().with_offset(k * n_each),
            normalization: spec.normalization,
            distance: spec.distance.clone(),
            extension: spec.extension.clone(),
        })
        .collect();
    let interior = problems::interior_rule(&spec, Scheme::TriangleCentroid, 0.15).unwrap();
    let tractions = problems::traction_samples(&spec, 51)
        .unwrap()
        .into_iter()
        .map(|s| {
            let region = spec.domain.region_of(s.p).unwrap();
            (s, region)
        })
        .collect();
    let interface_points =
        baseline::interface_samples(&spec.domain, 40, 1e-6 * spec.normalization.length).unwrap();
    CennProblem {
        fields,
        interior,
        materials: spec.materials.clone(),
        tractions,
        interface_points,
        beta,
    }
}

#[test]
fn a09_penalty_comparator_sanity() {
    // penalty weight at an interface/domain sample ratio of 0.01
    let beta = baseline::penalty_weight(1, 100);
    assert!(
        (beta - 4605.2035).abs() < 0.01,
        "penalty weight at ratio 0.01: {beta}"
    );

    // stronger penalties produce smaller interface mismatches
    let cfg = LbfgsConfig { epochs: 300, ..Default::default() };
    let mut mismatches = Vec::new();
    for beta in [1e2, 1e3, 1e4] {
        let problem = straight_beam_cenn(beta);
        let result = baseline::cenn_solve(&problem, &cfg, 42, |_, _| {}).unwrap();
        mismatches.push(problem.interface_mismatch(&result.theta).unwrap());
    }
    assert!(
        mismatches[0] > mismatches[1] && mismatches[1] > mismatches[2],
        "interface mismatch not monotone in the penalty: {mismatches:?}"
    );
    println!("[ 9/11] penalty comparator weight formula and monotone coupling: PASS");
}

// ---- 10: bit-exact reruns ----

#[test]
fn a10_deterministic_reruns() {
    let started = Instant::now();
    let run = || -> Vec<u64> {
        let spec = builtin("cantilever_homogeneous").unwrap();
        let network = kan(&[2, 5, 5, 5, 2], 20, 3, (0.0, 1.0));
        let problem =
            assemble(&spec, network, Scheme::TriangleCentroid, 0.05, spec.defaults.boundary_points)
                .unwrap();
        let (_, losses) = train(&problem, 50, 42);
        losses.iter().map(|l| l.to_bits()).collect()
    };
    let first = run();
    let second = run();
    assert_eq!(first.len(), 50);
    assert_eq!(first, second, "loss histories differ between identical runs");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "two 50-step runs took {elapsed:.0}s");
    println!("[10/11] bit-identical loss histories across reruns ({elapsed:.0}s): PASS");
}

// ---- 11: optimizer on the standard stiff valley ----

#[test]
fn a11_optimizer_rosenbrock() {
    let cfg = LbfgsConfig { epochs: 100, ..Default::default() };
    let result = minimize(
        |t| {
            let (x, y) = (t[0], t[1]);
            let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
            let g = vec![
                -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
                200.0 * (y - x * x),
            ];
            Ok((f, g))
        },
        &[-1.2, 1.0],
        &cfg,
        |_, _| {},
    )
    .unwrap();
    let dist = ((result.theta[0] - 1.0).powi(2) + (result.theta[1] - 1.0).powi(2)).sqrt();
    assert!(dist < 1e-6, "distance to optimum {dist:e}");
    println!("[11/11] optimizer reaches the Rosenbrock optimum in 100 steps: PASS");
}
