//! Constrained Delaunay meshing of domains and the triangle-based
//! quadrature rules built on top of it.

use super::{Curve, Domain, Point2, QuadPoint, QuadratureRule, Scheme};
use crate::error::{PikanError, Result};
use spade::{ConstrainedDelaunayTriangulation, Triangulation};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point2>,
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Material region id per triangle (by centroid membership).
    pub tri_region: Vec<usize>,
}

impl TriMesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y)).abs()
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        Point2::new((pa.x + pb.x + pc.x) / 3.0, (pa.y + pb.y + pc.y) / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        let areas: Vec<f64> = (0..self.triangles.len()).map(|t| self.triangle_area(t)).collect();
        super::pairwise_sum(&areas)
    }
}

/// Sparse hash grid used to keep lattice fill points away from constraint
/// vertices so the triangulation stays well shaped near boundaries.
struct ProximityGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<Point2>>,
}

impl ProximityGrid {
    fn new(cell: f64) -> Self {
        ProximityGrid { cell, cells: HashMap::new() }
    }

    fn key(&self, p: Point2) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point2) {
        self.cells.entry(self.key(p)).or_default().push(p);
    }

    fn near(&self, p: Point2, radius: f64) -> bool {
        let (kx, ky) = self.key(p);
        let reach = (radius / self.cell).ceil() as i64;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(bucket) = self.cells.get(&(kx + dx, ky + dy)) {
                    if bucket.iter().any(|q| q.dist(&p) < radius) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Merges constraint vertices that are numerically coincident. Curve
/// endpoints are computed independently (arcs via trigonometry), so shared
/// junctions — an arc ending on a boundary vertex, two arcs meeting — can
/// differ in the last few bits; the triangulation needs them to be the
/// exact same point or it sees crossing constraints.
struct VertexSnapper {
    cell: f64,
    tol: f64,
    cells: HashMap<(i64, i64), Vec<Point2>>,
}

impl VertexSnapper {
    fn new(tol: f64) -> Self {
        VertexSnapper { cell: tol.max(1e-300) * 4.0, tol, cells: HashMap::new() }
    }

    fn canon(&mut self, p: Point2) -> Point2 {
        let kx = (p.x / self.cell).floor() as i64;
        let ky = (p.y / self.cell).floor() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(kx + dx, ky + dy)) {
                    if let Some(&q) = bucket.iter().find(|q| q.dist(&p) <= self.tol) {
                        return q;
                    }
                }
            }
        }
        self.cells.entry((kx, ky)).or_default().push(p);
        p
    }

    fn canon_polyline(&mut self, pts: Vec<Point2>) -> Vec<Point2> {
        let mut out: Vec<Point2> = Vec::with_capacity(pts.len());
        for p in pts {
            let q = self.canon(p);
            if out.last().map_or(true, |last| last.dist(&q) > 0.0) {
                out.push(q);
            }
        }
        out
    }
}

fn polylinize_loop(curves: &[Curve], target: f64) -> Vec<Point2> {
    let mut pts = Vec::new();
    for c in curves {
        let mut poly = c.polyline(target, target * target);
        poly.pop(); // next curve re-adds the shared endpoint
        pts.extend(poly);
    }
    pts
}

fn polylinize_chain(curves: &[Curve], target: f64) -> Vec<Point2> {
    let mut pts = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        let poly = c.polyline(target, target * target);
        let skip = usize::from(i > 0); // drop duplicated joint vertex
        pts.extend(poly.into_iter().skip(skip));
    }
    pts
}

/// Meshes the domain at roughly uniform edge length `target`:
/// boundary loops and interface chains become constraint polylines, the
/// interior is filled with a lattice at `target` spacing (points too close
/// to a constraint vertex are skipped), and triangles whose centroid falls
/// outside the domain (holes, notches) are discarded.
pub fn triangulate(domain: &Domain, target: f64) -> Result<TriMesh> {
    if target <= 0.0 {
        return Err(PikanError::Geometry("mesh size must be positive".into()));
    }
    let mut cdt: ConstrainedDelaunayTriangulation<spade::Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut guard = ProximityGrid::new(target);
    let mut snapper = VertexSnapper::new(1e-9 * target.max(domain.width().max(domain.height())));

    let add_polyline = |cdt: &mut ConstrainedDelaunayTriangulation<spade::Point2<f64>>,
                            guard: &mut ProximityGrid,
                            pts: &[Point2],
                            closed: bool|
     -> Result<()> {
        for &p in pts {
            guard.insert(p);
        }
        cdt.add_constraint_edges(pts.iter().map(|p| spade::Point2::new(p.x, p.y)), closed)
            .map_err(|e| PikanError::Geometry(format!("constraint insertion failed: {e}")))?;
        Ok(())
    };

    for lp in &domain.outer_loops {
        let pts = snapper.canon_polyline(polylinize_loop(lp, target));
        add_polyline(&mut cdt, &mut guard, &pts, true)?;
    }
    for lp in &domain.hole_loops {
        let pts = snapper.canon_polyline(polylinize_loop(lp, target));
        add_polyline(&mut cdt, &mut guard, &pts, true)?;
    }
    for chain in &domain.interface_chains {
        let pts = snapper.canon_polyline(polylinize_chain(chain, target));
        add_polyline(&mut cdt, &mut guard, &pts, false)?;
    }

    // Interior fill lattice. Points within 0.7 * target of a constraint
    // vertex would create sliver triangles, so they are skipped.
    let keep_out = 0.7 * target;
    let origin = domain.bbox.0;
    let nx = (domain.width() / target).round() as usize + 1;
    let ny = (domain.height() / target).round() as usize + 1;
    let hx = domain.width() / (nx - 1).max(1) as f64;
    let hy = domain.height() / (ny - 1).max(1) as f64;
    for iy in 0..ny {
        for ix in 0..nx {
            let p = Point2::new(origin.x + ix as f64 * hx, origin.y + iy as f64 * hy);
            if !(domain.contains)(p) || guard.near(p, keep_out) {
                continue;
            }
            cdt.insert(spade::Point2::new(p.x, p.y))
                .map_err(|e| PikanError::Geometry(format!("point insertion failed: {e}")))?;
        }
    }

    let vertices: Vec<Point2> = cdt
        .vertices()
        .map(|v| Point2::new(v.position().x, v.position().y))
        .collect();
    let mut triangles = Vec::new();
    let mut tri_region = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let tri = [vs[0].index(), vs[1].index(), vs[2].index()];
        let c = Point2::new(
            (vertices[tri[0]].x + vertices[tri[1]].x + vertices[tri[2]].x) / 3.0,
            (vertices[tri[0]].y + vertices[tri[1]].y + vertices[tri[2]].y) / 3.0,
        );
        if !(domain.contains)(c) {
            continue;
        }
        let region = domain
            .region_of(c)
            .ok_or(PikanError::UnknownRegion { x: c.x, y: c.y })?;
        triangles.push(tri);
        tri_region.push(region);
    }
    if triangles.is_empty() {
        return Err(PikanError::Geometry("mesh produced no triangles".into()));
    }
    Ok(TriMesh { vertices, triangles, tri_region })
}

/// One point per triangle at the centroid, weighted by triangle area.
pub fn centroid_rule(mesh: &TriMesh) -> QuadratureRule {
    let points = (0..mesh.triangles.len())
        .map(|t| QuadPoint {
            p: mesh.centroid(t),
            weight: mesh.triangle_area(t),
            region: mesh.tri_region[t],
        })
        .collect();
    QuadratureRule { scheme: Scheme::TriangleCentroid, points }
}

/// One point per mesh vertex; each vertex controls one third of the area
/// of every incident triangle.
pub fn delaunay_area_rule(mesh: &TriMesh, domain: &Domain) -> Result<QuadratureRule> {
    let mut weight = vec![0.0; mesh.vertices.len()];
    for t in 0..mesh.triangles.len() {
        let share = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            weight[v] += share;
        }
    }
    let mut points = Vec::new();
    for (v, &w) in weight.iter().enumerate() {
        if w == 0.0 {
            continue; // vertex only touches discarded (hole) triangles
        }
        let p = mesh.vertices[v];
        let region = domain
            .region_of(p)
            .ok_or(PikanError::UnknownRegion { x: p.x, y: p.y })?;
        points.push(QuadPoint { p, weight: w, region });
    }
    Ok(QuadratureRule { scheme: Scheme::DelaunayArea, points })
}

#[cfg(test)]
mod tests {
    use super::super::test_domains::*;
    use super::*;
    use std::sync::Arc;

    #[test]
    fn mesh_covers_rectangle_area() {
        let d = rect_domain(8.0, 2.0, Some(1.0));
        let mesh = triangulate(&d, 0.1).unwrap();
        assert!((mesh.total_area() - 16.0).abs() < 1e-9, "area {}", mesh.total_area());
    }

    #[test]
    fn beam_mesh_density_near_structured_count() {
        // 0.05 spacing on an 8 x 2 rectangle: a structured split gives
        // 2 * 160 * 40 = 12,800 triangles; the unstructured mesh should
        // land within 5%.
        let d = rect_domain(8.0, 2.0, Some(1.0));
        let mesh = triangulate(&d, 0.05).unwrap();
        let n = mesh.triangles.len() as f64;
        assert!((n - 12_800.0).abs() / 12_800.0 < 0.05, "{n} triangles");
    }

    #[test]
    fn centroid_rule_weights_sum_to_area() {
        let d = rect_domain(2.0, 1.0, None);
        let mesh = triangulate(&d, 0.1).unwrap();
        let rule = centroid_rule(&mesh);
        assert_eq!(rule.points.len(), mesh.triangles.len());
        assert!((rule.total_weight() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn centroid_rule_exact_for_linear() {
        let d = rect_domain(2.0, 1.0, None);
        let mesh = triangulate(&d, 0.1).unwrap();
        let rule = centroid_rule(&mesh);
        // centroid quadrature integrates linear functions exactly
        let v = rule.integrate(|p| 3.0 * p.x - 2.0 * p.y + 1.0);
        let exact = 3.0 * 2.0 - 2.0 * 1.0 + 2.0; // over the 2 x 1 rectangle
        assert!((v - exact).abs() < 1e-9, "got {v}, want {exact}");
    }

    #[test]
    fn delaunay_area_rule_conserves_area() {
        let d = rect_domain(2.0, 1.0, None);
        let mesh = triangulate(&d, 0.1).unwrap();
        let rule = delaunay_area_rule(&mesh, &d).unwrap();
        assert_eq!(rule.points.len(), mesh.vertices.len());
        assert!((rule.total_weight() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn interface_separates_regions_cleanly() {
        let d = rect_domain(8.0, 2.0, Some(1.0));
        let mesh = triangulate(&d, 0.1).unwrap();
        // no triangle may straddle the interface: region-1 triangles have
        // all vertices at y <= 1, region-2 triangles at y >= 1
        for t in 0..mesh.triangles.len() {
            for &v in &mesh.triangles[t] {
                let y = mesh.vertices[v].y;
                match mesh.tri_region[t] {
                    1 => assert!(y <= 1.0 + 1e-9, "region 1 vertex at y={y}"),
                    2 => assert!(y >= 1.0 - 1e-9, "region 2 vertex at y={y}"),
                    r => panic!("unexpected region {r}"),
                }
            }
        }
        let a1: f64 = (0..mesh.triangles.len())
            .filter(|&t| mesh.tri_region[t] == 1)
            .map(|t| mesh.triangle_area(t))
            .sum();
        assert!((a1 - 8.0).abs() < 1e-9, "lower region area {a1}");
    }

    #[test]
    fn hole_is_excluded() {
        // unit square with a centered radius-0.25 circular hole
        let tol = 1e-9;
        let contains: super::super::Predicate = Arc::new(move |p: Point2| {
            let inside_sq = p.x >= -tol && p.x <= 1.0 + tol && p.y >= -tol && p.y <= 1.0 + tol;
            let r = (p.x - 0.5).hypot(p.y - 0.5);
            inside_sq && r >= 0.25 - tol
        });
        let mut d = rect_domain(1.0, 1.0, None);
        d.contains = contains.clone();
        d.regions[0].membership = contains;
        d.hole_loops = vec![vec![Curve::Arc {
            center: Point2::new(0.5, 0.5),
            radius: 0.25,
            theta0: 0.0,
            theta1: 2.0 * std::f64::consts::PI,
        }]];
        let mesh = triangulate(&d, 0.05).unwrap();
        let expected = 1.0 - std::f64::consts::PI * 0.25 * 0.25;
        let rel = (mesh.total_area() - expected).abs() / expected;
        assert!(rel < 5e-3, "area {} vs {expected}", mesh.total_area());
        for t in 0..mesh.triangles.len() {
            let c = mesh.centroid(t);
            assert!((c.x - 0.5).hypot(c.y - 0.5) > 0.24);
        }
    }

    #[test]
    fn arc_polyline_respects_sagitta() {
        let arc = Curve::Arc {
            center: Point2::new(0.0, 0.0),
            radius: 1.0,
            theta0: 0.0,
            theta1: std::f64::consts::FRAC_PI_2,
        };
        let target = 0.1;
        let pts = arc.polyline(target, target * target);
        for w in pts.windows(2) {
            let mid = Point2::new(0.5 * (w[0].x + w[1].x), 0.5 * (w[0].y + w[1].y));
            let sagitta = 1.0 - mid.x.hypot(mid.y);
            assert!(sagitta <= target * target + 1e-12);
            assert!(w[0].dist(&w[1]) <= target + 1e-12);
        }
        let first = pts.first().unwrap();
        let last = pts.last().unwrap();
        assert!((first.x - 1.0).abs() < 1e-12 && first.y.abs() < 1e-12);
        assert!(last.x.abs() < 1e-12 && (last.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_mesh_size() {
        let d = unit_square();
        assert!(triangulate(&d, 0.0).is_err());
        assert!(triangulate(&d, -1.0).is_err());
    }
}
