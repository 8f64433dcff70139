//! 2D computational domains: material regions, boundary segments, sample
//! point generation and quadrature rules.

mod mesh;

pub use mesh::{centroid_rule, delaunay_area_rule, triangulate, TriMesh};

use crate::error::{PikanError, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Boundary and interface curves. Arcs are parameterized by angle, swept
/// linearly from `theta0` to `theta1` (either orientation).
#[derive(Debug, Clone)]
pub enum Curve {
    Segment { a: Point2, b: Point2 },
    Arc { center: Point2, radius: f64, theta0: f64, theta1: f64 },
}

impl Curve {
    pub fn point(&self, t: f64) -> Point2 {
        match self {
            Curve::Segment { a, b } => Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)),
            Curve::Arc { center, radius, theta0, theta1 } => {
                let th = theta0 + t * (theta1 - theta0);
                Point2::new(center.x + radius * th.cos(), center.y + radius * th.sin())
            }
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Curve::Segment { a, b } => a.dist(b),
            Curve::Arc { radius, theta0, theta1, .. } => radius * (theta1 - theta0).abs(),
        }
    }

    /// Chord vertices approximating the curve: chord length at most
    /// `max_len` and, for arcs, sagitta at most `max_sagitta`.
    pub fn polyline(&self, max_len: f64, max_sagitta: f64) -> Vec<Point2> {
        let n = match self {
            Curve::Segment { .. } => (self.length() / max_len).ceil().max(1.0) as usize,
            Curve::Arc { radius, theta0, theta1, .. } => {
                let sweep = (theta1 - theta0).abs();
                // sagitta of one chord: r (1 - cos(dtheta/2))
                let by_sag = if max_sagitta < *radius {
                    let dth = 2.0 * (1.0 - max_sagitta / radius).acos();
                    (sweep / dth).ceil() as usize
                } else {
                    1
                };
                let by_len = (self.length() / max_len).ceil() as usize;
                by_sag.max(by_len).max(1)
            }
        };
        (0..=n).map(|i| self.point(i as f64 / n as f64)).collect()
    }
}

pub type Predicate = Arc<dyn Fn(Point2) -> bool + Send + Sync>;
pub type TractionFn = Arc<dyn Fn(Point2) -> (f64, f64) + Send + Sync>;
pub type DisplacementFn = Arc<dyn Fn(Point2) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
pub struct MaterialRegion {
    /// Region index, 1-based as reported in outputs; ties on interfaces
    /// resolve to the lowest id via first-match ordering.
    pub id: usize,
    pub membership: Predicate,
    pub material_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Essential,
    Natural,
}

#[derive(Clone)]
pub enum Prescribed {
    /// Essential data: displacement value and a per-component mask saying
    /// which components the segment constrains.
    Displacement { value: DisplacementFn, mask: (bool, bool) },
    /// Natural data: traction in N/mm.
    Traction(TractionFn),
}

#[derive(Clone)]
pub struct BoundarySegment {
    pub kind: BoundaryKind,
    pub curve: Curve,
    pub prescribed: Prescribed,
}

impl BoundarySegment {
    pub fn essential(curve: Curve, value: DisplacementFn, mask: (bool, bool)) -> Self {
        BoundarySegment {
            kind: BoundaryKind::Essential,
            curve,
            prescribed: Prescribed::Displacement { value, mask },
        }
    }

    pub fn natural(curve: Curve, traction: TractionFn) -> Self {
        BoundarySegment {
            kind: BoundaryKind::Natural,
            curve,
            prescribed: Prescribed::Traction(traction),
        }
    }
}

/// An immutable 2D domain: membership predicate, polygonalizable boundary
/// loops, interface chains and material regions.
#[derive(Clone)]
pub struct Domain {
    pub contains: Predicate,
    pub bbox: (Point2, Point2),
    /// Closed outer boundary loops (counterclockwise).
    pub outer_loops: Vec<Vec<Curve>>,
    /// Closed hole loops.
    pub hole_loops: Vec<Vec<Curve>>,
    /// Open interface chains separating material regions.
    pub interface_chains: Vec<Vec<Curve>>,
    pub regions: Vec<MaterialRegion>,
}

impl Domain {
    pub fn width(&self) -> f64 {
        self.bbox.1.x - self.bbox.0.x
    }

    pub fn height(&self) -> f64 {
        self.bbox.1.y - self.bbox.0.y
    }

    /// Region claiming `p`; first match in id order, so interface ties go
    /// to the lowest id.
    pub fn region_of(&self, p: Point2) -> Option<usize> {
        self.regions
            .iter()
            .find(|r| (r.membership)(p))
            .map(|r| r.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    MonteCarlo,
    Trapezoid,
    Simpson,
    TriangleCentroid,
    DelaunayArea,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub p: Point2,
    /// Control area in mm^2.
    pub weight: f64,
    pub region: usize,
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub scheme: Scheme,
    pub points: Vec<QuadPoint>,
}

impl QuadratureRule {
    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.points.iter().map(|q| q.weight).collect::<Vec<_>>())
    }

    /// Integrates a function over the rule; test and diagnostics helper.
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        let terms: Vec<f64> = self.points.iter().map(|q| q.weight * f(q.p)).collect();
        pairwise_sum(&terms)
    }
}

/// Fixed-shape pairwise (tree) summation; deterministic independent of
/// chunking by callers.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn lattice_counts(domain: &Domain, spacing: f64) -> Result<(usize, usize)> {
    if spacing <= 0.0 {
        return Err(PikanError::Geometry("spacing must be positive".into()));
    }
    let (w, h) = (domain.width(), domain.height());
    if w <= 0.0 || h <= 0.0 {
        return Err(PikanError::Geometry(format!(
            "degenerate domain extent {w} x {h}"
        )));
    }
    if spacing > w || spacing > h {
        return Err(PikanError::Geometry(format!(
            "spacing {spacing} exceeds domain extent {w} x {h}"
        )));
    }
    let nx = cells_along(w, spacing) + 1;
    let ny = cells_along(h, spacing) + 1;
    Ok((nx, ny))
}

fn cells_along(extent: f64, spacing: f64) -> usize {
    let ratio = extent / spacing;
    let rounded = ratio.round();
    if (ratio - rounded).abs() < 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.floor() as usize
    }
}

/// Axis-aligned lattice at `spacing`, clipped to domain membership.
/// Emitted in row-major (y-outer) order.
pub fn uniform_grid(domain: &Domain, spacing: f64) -> Result<Vec<(Point2, usize)>> {
    let (nx, ny) = lattice_counts(domain, spacing)?;
    let origin = domain.bbox.0;
    let mut out = Vec::new();
    for iy in 0..ny {
        let y = origin.y + iy as f64 * spacing;
        for ix in 0..nx {
            let x = origin.x + ix as f64 * spacing;
            let p = Point2::new(x, y);
            if (domain.contains)(p) {
                if let Some(region) = domain.region_of(p) {
                    out.push((p, region));
                }
            }
        }
    }
    Ok(out)
}

/// Composite tensor-product rule on the bounding-box lattice. Points
/// outside the domain are dropped (their tensor weight is zeroed).
pub fn tensor_rule(domain: &Domain, nx: usize, ny: usize, scheme: Scheme) -> Result<QuadratureRule> {
    if nx < 2 || ny < 2 {
        return Err(PikanError::Quadrature("need at least a 2x2 grid".into()));
    }
    let (w, h) = (domain.width(), domain.height());
    let hx = w / (nx - 1) as f64;
    let hy = h / (ny - 1) as f64;
    let wx = axis_weights(nx, hx, scheme)?;
    let wy = axis_weights(ny, hy, scheme)?;
    let mc_weight = w * h / (nx * ny) as f64;
    let origin = domain.bbox.0;
    let mut points = Vec::new();
    for iy in 0..ny {
        let y = origin.y + iy as f64 * hy;
        for ix in 0..nx {
            let x = origin.x + ix as f64 * hx;
            let p = Point2::new(x, y);
            if !(domain.contains)(p) {
                continue;
            }
            let region = domain
                .region_of(p)
                .ok_or(PikanError::UnknownRegion { x: p.x, y: p.y })?;
            let weight = match scheme {
                Scheme::MonteCarlo => mc_weight,
                _ => wx[ix] * wy[iy],
            };
            points.push(QuadPoint { p, weight, region });
        }
    }
    Ok(QuadratureRule { scheme, points })
}

fn axis_weights(n: usize, h: f64, scheme: Scheme) -> Result<Vec<f64>> {
    match scheme {
        Scheme::Trapezoid | Scheme::MonteCarlo => {
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            Ok(w)
        }
        Scheme::Simpson => {
            if n % 2 == 0 {
                return Err(PikanError::Quadrature(format!(
                    "Simpson needs an odd point count per axis, got {n}"
                )));
            }
            if n < 3 {
                return Err(PikanError::Quadrature("Simpson needs at least 3 points".into()));
            }
            let mut w = vec![0.0; n];
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = if i == 0 || i == n - 1 {
                    h / 3.0
                } else if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
            }
            Ok(w)
        }
        _ => Err(PikanError::Quadrature(format!(
            "{scheme:?} is not a tensor-product scheme"
        ))),
    }
}

/// Seeded stochastic Monte Carlo variant: uniform points in the bounding
/// box, rejected outside the domain, equal weights bbox_area / n_total.
pub fn monte_carlo_random(domain: &Domain, n_total: usize, seed: u64) -> Result<QuadratureRule> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bbox;
    let weight = domain.width() * domain.height() / n_total as f64;
    let mut points = Vec::new();
    for _ in 0..n_total {
        let p = Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if (domain.contains)(p) {
            let region = domain
                .region_of(p)
                .ok_or(PikanError::UnknownRegion { x: p.x, y: p.y })?;
            points.push(QuadPoint { p, weight, region });
        }
    }
    Ok(QuadratureRule { scheme: Scheme::MonteCarlo, points })
}

/// Uniform parameter sampling of a natural segment with 1D trapezoid
/// weights over arc length (mm). Essential segments are never sampled.
pub fn boundary_rule(segment: &BoundarySegment, n_points: usize) -> Result<Vec<(Point2, f64)>> {
    if segment.kind == BoundaryKind::Essential {
        return Err(PikanError::Quadrature(
            "essential segments are enforced by construction, not sampled".into(),
        ));
    }
    if n_points < 2 {
        return Err(PikanError::Quadrature(format!(
            "boundary rule needs at least 2 points, got {n_points}"
        )));
    }
    let pts: Vec<Point2> = (0..n_points)
        .map(|i| segment.curve.point(i as f64 / (n_points - 1) as f64))
        .collect();
    let mut weights = vec![0.0; n_points];
    for i in 0..n_points - 1 {
        let seg = pts[i].dist(&pts[i + 1]);
        weights[i] += 0.5 * seg;
        weights[i + 1] += 0.5 * seg;
    }
    Ok(pts.into_iter().zip(weights).collect())
}


#[cfg(test)]
mod tests {
    use super::test_domains::*;
    use super::*;

    #[test]
    fn uniform_grid_unit_square() {
        let d = unit_square();
        let pts = uniform_grid(&d, 0.5).unwrap();
        assert_eq!(pts.len(), 9);
    }

    #[test]
    fn uniform_grid_beam_point_count() {
        let d = rect_domain(8.0, 2.0, Some(1.0));
        let pts = uniform_grid(&d, 0.02).unwrap();
        assert_eq!(pts.len(), 40_501);
    }

    #[test]
    fn uniform_grid_degenerate_domain_errors() {
        let tol = 0.0;
        let d = Domain {
            contains: Arc::new(move |p: Point2| p.x >= -tol && p.x <= tol),
            bbox: (Point2::new(0.0, 0.0), Point2::new(0.0, 1.0)),
            outer_loops: vec![],
            hole_loops: vec![],
            interface_chains: vec![],
            regions: vec![MaterialRegion { id: 1, membership: Arc::new(|_| true), material_id: 0 }],
        };
        assert!(uniform_grid(&d, 0.1).is_err());
    }

    #[test]
    fn uniform_grid_spacing_exceeds_extent() {
        let d = unit_square();
        assert!(uniform_grid(&d, 1.5).is_err());
    }

    #[test]
    fn interface_points_get_lowest_region_id() {
        let d = rect_domain(8.0, 2.0, Some(1.0));
        assert_eq!(d.region_of(Point2::new(3.0, 1.0)), Some(1));
        assert_eq!(d.region_of(Point2::new(3.0, 1.0001)), Some(2));
        assert_eq!(d.region_of(Point2::new(3.0, 0.5)), Some(1));
    }

    #[test]
    fn region_partition_on_random_points() {
        let d = rect_domain(8.0, 2.0, Some(1.0));
        let mut state = 0xabcdef12u64;
        let mut next = |range: f64| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 * range
        };
        for _ in 0..1_000_000 {
            let p = Point2::new(next(8.0), next(2.0));
            let claims = d.regions.iter().filter(|r| (r.membership)(p)).count();
            // region 2 is a catch-all, so strictly below the interface both
            // match and first-match picks id 1; what must never happen is
            // zero claims
            assert!(claims >= 1);
            assert!(d.region_of(p).is_some());
        }
    }

    #[test]
    fn simpson_exact_on_cubic_per_axis() {
        let d = unit_square();
        let rule = tensor_rule(&d, 3, 3, Scheme::Simpson).unwrap();
        let v = rule.integrate(|p| p.x * p.x * p.y * p.y);
        assert!((v - 1.0 / 9.0).abs() < 1e-12, "got {v}");
        let v3 = rule.integrate(|p| p.x * p.x * p.x * p.y * p.y * p.y);
        assert!((v3 - 1.0 / 16.0).abs() < 1e-12, "got {v3}");
    }

    #[test]
    fn trapezoid_constant_exact() {
        let d = unit_square();
        for n in [2usize, 5, 11] {
            let rule = tensor_rule(&d, n, n, Scheme::Trapezoid).unwrap();
            assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_second_order_convergence() {
        let d = unit_square();
        let exact = 1.0 / 3.0;
        let e1 = (tensor_rule(&d, 11, 11, Scheme::Trapezoid)
            .unwrap()
            .integrate(|p| p.x * p.x)
            - exact)
            .abs();
        let e2 = (tensor_rule(&d, 21, 21, Scheme::Trapezoid)
            .unwrap()
            .integrate(|p| p.x * p.x)
            - exact)
            .abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn simpson_rejects_even_counts() {
        let d = unit_square();
        assert!(tensor_rule(&d, 4, 5, Scheme::Simpson).is_err());
        assert!(tensor_rule(&d, 5, 4, Scheme::Simpson).is_err());
    }

    #[test]
    fn monte_carlo_lattice_covers_area() {
        let d = rect_domain(2.0, 1.0, None);
        let rule = tensor_rule(&d, 21, 11, Scheme::MonteCarlo).unwrap();
        assert!((rule.total_weight() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_random_is_seeded() {
        let d = unit_square();
        let a = monte_carlo_random(&d, 500, 9).unwrap();
        let b = monte_carlo_random(&d, 500, 9).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.p, q.p);
        }
        assert!((a.total_weight() - 1.0).abs() < 0.1);
    }

    #[test]
    fn boundary_rule_unit_edge() {
        let seg = BoundarySegment::natural(
            Curve::Segment { a: Point2::new(0.0, 0.0), b: Point2::new(0.0, 1.0) },
            Arc::new(|_| (1.0, 0.0)),
        );
        let pts = boundary_rule(&seg, 101).unwrap();
        let total: f64 = pts.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((pts[0].1 - 0.005).abs() < 1e-12);
        assert!((pts[100].1 - 0.005).abs() < 1e-12);
    }

    #[test]
    fn boundary_rule_beam_right_edge_spacing() {
        let seg = BoundarySegment::natural(
            Curve::Segment { a: Point2::new(8.0, 0.0), b: Point2::new(8.0, 2.0) },
            Arc::new(|_| (0.0, -6.0)),
        );
        let pts = boundary_rule(&seg, 101).unwrap();
        let dy = pts[1].0.y - pts[0].0.y;
        assert!((dy - 0.02).abs() < 1e-12);
    }

    #[test]
    fn boundary_rule_rejects_essential_and_single_point() {
        let ess = BoundarySegment::essential(
            Curve::Segment { a: Point2::new(0.0, 0.0), b: Point2::new(0.0, 1.0) },
            Arc::new(|_| (0.0, 0.0)),
            (true, true),
        );
        assert!(boundary_rule(&ess, 10).is_err());
        let nat = BoundarySegment::natural(
            Curve::Segment { a: Point2::new(0.0, 0.0), b: Point2::new(0.0, 1.0) },
            Arc::new(|_| (0.0, 0.0)),
        );
        assert!(boundary_rule(&nat, 1).is_err());
    }
}
