//! Run configuration: a single TOML file describing the problem, the
//! solver method, and every numerical knob. Unknown keys are rejected;
//! omitted sections fall back to the problem's recommended defaults.

use crate::dem::{DistanceFactor, Extension, Normalization};
use crate::elasticity::{Material, PlaneAssumption};
use crate::error::{PikanError, Result};
use crate::geometry::{
    BoundarySegment, Curve, Domain, MaterialRegion, Point2, Predicate, Scheme,
};
use crate::optimize::LbfgsConfig;
use crate::problems::{self, ProblemSpec, SolveDefaults};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Spline-network energy solver.
    Pikan,
    /// Same energy pipeline with a tanh MLP.
    DemMlp,
    /// Per-region MLP subnetworks with an interface penalty.
    Cenn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub shape: Vec<usize>,
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub grid_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub scheme: Scheme,
    pub mesh_size: f64,
    #[serde(default)]
    pub boundary_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemChoice {
    Builtin(String),
    Inline(Box<InlineProblem>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub e: f64,
    pub nu: f64,
    #[serde(default)]
    pub assumption: PlaneAssumption,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionConfig {
    pub edge: Edge,
    pub tx: f64,
    pub ty: f64,
}

/// Inline problem description: a rectangular domain, optionally split into
/// horizontal material strips, with constant edge tractions and clamped
/// edges. Distance factors come from a small expression whitelist; custom
/// curved geometry requires the library API.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub name: String,
    /// [[x0, y0], [x1, y1]].
    pub bbox: [[f64; 2]; 2],
    /// Horizontal interface heights, strictly increasing, strictly inside
    /// the box; strips are numbered bottom-to-top.
    #[serde(default)]
    pub interfaces: Vec<f64>,
    /// One material per strip, bottom-to-top.
    pub materials: Vec<MaterialConfig>,
    /// Distance expressions: "one", "x", "y", "x-<c>", "y-<c>",
    /// "point(<x>,<y>,<eps>)", or "softmin(<temperature>)" over the
    /// clamped edges.
    pub distance_x: String,
    pub distance_y: String,
    /// Affine boundary extension [a0, ax, ay] per component; omitted
    /// means zero prescribed displacement.
    #[serde(default)]
    pub extension_x: Option<[f64; 3]>,
    #[serde(default)]
    pub extension_y: Option<[f64; 3]>,
    pub tractions: Vec<TractionConfig>,
    pub clamped_edges: Vec<Edge>,
}

fn default_seed() -> u64 {
    42
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemChoice,
    pub method: Method,
    #[serde(default)]
    pub network: Option<NetworkConfig>,
    #[serde(default)]
    pub quadrature: Option<QuadratureConfig>,
    #[serde(default)]
    pub optimizer: LbfgsConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

/// Everything compute needs, after defaults are resolved and validated.
pub struct ResolvedRun {
    pub spec: ProblemSpec,
    pub method: Method,
    pub shape: Vec<usize>,
    pub grid_size: usize,
    pub order: usize,
    pub grid_range: (f64, f64),
    pub scheme: Scheme,
    pub mesh_size: f64,
    pub boundary_points: usize,
    pub optimizer: LbfgsConfig,
    pub seed: u64,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PikanError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| PikanError::Config(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let spec = match &self.problem {
            ProblemChoice::Builtin(name) => problems::builtin(name)?,
            ProblemChoice::Inline(inline) => build_inline(inline)?,
        };
        let d: &SolveDefaults = &spec.defaults;
        let shape = self
            .network
            .as_ref()
            .map(|n| n.shape.clone())
            .unwrap_or_else(|| d.shape.clone());
        if shape.len() < 3 || shape[0] != 2 || *shape.last().unwrap() != 2 {
            return Err(PikanError::Config(format!(
                "network shape must map 2 inputs to 2 outputs, got {shape:?}"
            )));
        }
        let grid_size = self
            .network
            .as_ref()
            .and_then(|n| n.grid_size)
            .unwrap_or(d.grid_size);
        let order = self.network.as_ref().and_then(|n| n.order).unwrap_or(d.order);
        let grid_range = self
            .network
            .as_ref()
            .and_then(|n| n.grid_range)
            .unwrap_or(d.grid_range);
        if grid_size == 0 || order == 0 || grid_range.0 >= grid_range.1 {
            return Err(PikanError::Config(format!(
                "invalid spline settings: grid_size {grid_size}, order {order}, range {grid_range:?}"
            )));
        }
        let scheme = self.quadrature.as_ref().map(|q| q.scheme).unwrap_or(d.scheme);
        let mesh_size = self
            .quadrature
            .as_ref()
            .map(|q| q.mesh_size)
            .unwrap_or(d.mesh_size);
        if mesh_size <= 0.0 {
            return Err(PikanError::Config(format!("mesh_size must be positive, got {mesh_size}")));
        }
        let boundary_points = self
            .quadrature
            .as_ref()
            .and_then(|q| q.boundary_points)
            .unwrap_or(d.boundary_points);
        if boundary_points < 2 {
            return Err(PikanError::Config("boundary_points must be at least 2".into()));
        }
        Ok(ResolvedRun {
            spec,
            method: self.method,
            shape,
            grid_size,
            order,
            grid_range,
            scheme,
            mesh_size,
            boundary_points,
            optimizer: self.optimizer.clone(),
            seed: self.seed,
            output: self.output.clone(),
        })
    }
}

fn parse_distance(expr: &str, inline: &InlineProblem) -> Result<DistanceFactor> {
    let e = expr.trim();
    let bad = || PikanError::Config(format!("unknown distance expression '{expr}'"));
    if e == "one" || e == "1" {
        return Ok(DistanceFactor::One);
    }
    if e == "x" {
        return Ok(DistanceFactor::XPlane { at: 0.0 });
    }
    if e == "y" {
        return Ok(DistanceFactor::YPlane { at: 0.0 });
    }
    if let Some(rest) = e.strip_prefix("x-") {
        let at: f64 = rest.trim().parse().map_err(|_| bad())?;
        return Ok(DistanceFactor::XPlane { at });
    }
    if let Some(rest) = e.strip_prefix("y-") {
        let at: f64 = rest.trim().parse().map_err(|_| bad())?;
        return Ok(DistanceFactor::YPlane { at });
    }
    if let Some(rest) = e.strip_prefix("point(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<f64> = rest
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        if parts.len() != 3 {
            return Err(bad());
        }
        return Ok(DistanceFactor::Point { x0: parts[0], y0: parts[1], eps: parts[2] });
    }
    if let Some(rest) = e.strip_prefix("softmin(").and_then(|r| r.strip_suffix(')')) {
        let temperature: f64 = rest.trim().parse().map_err(|_| bad())?;
        let [[x0, y0], [x1, y1]] = inline.bbox;
        let segments = inline
            .clamped_edges
            .iter()
            .map(|edge| match edge {
                Edge::Left => ((x0, y0), (x0, y1)),
                Edge::Right => ((x1, y0), (x1, y1)),
                Edge::Bottom => ((x0, y0), (x1, y0)),
                Edge::Top => ((x0, y1), (x1, y1)),
            })
            .collect();
        return Ok(DistanceFactor::SoftMinSegments { segments, temperature });
    }
    Err(bad())
}

fn edge_curve(edge: Edge, bbox: [[f64; 2]; 2]) -> Curve {
    let [[x0, y0], [x1, y1]] = bbox;
    let (a, b) = match edge {
        Edge::Left => ((x0, y0), (x0, y1)),
        Edge::Right => ((x1, y0), (x1, y1)),
        Edge::Bottom => ((x0, y0), (x1, y0)),
        Edge::Top => ((x0, y1), (x1, y1)),
    };
    Curve::Segment { a: Point2::new(a.0, a.1), b: Point2::new(b.0, b.1) }
}

fn build_inline(inline: &InlineProblem) -> Result<ProblemSpec> {
    let [[x0, y0], [x1, y1]] = inline.bbox;
    if !(x1 > x0 && y1 > y0) {
        return Err(PikanError::Config(format!("degenerate bbox {:?}", inline.bbox)));
    }
    for w in inline.interfaces.windows(2) {
        if w[1] <= w[0] {
            return Err(PikanError::Config("interfaces must be strictly increasing".into()));
        }
    }
    if inline.interfaces.iter().any(|&h| h <= y0 || h >= y1) {
        return Err(PikanError::Config("interfaces must lie strictly inside the box".into()));
    }
    if inline.materials.len() != inline.interfaces.len() + 1 {
        return Err(PikanError::Config(format!(
            "{} interfaces split the box into {} strips but {} materials given",
            inline.interfaces.len(),
            inline.interfaces.len() + 1,
            inline.materials.len()
        )));
    }
    if inline.clamped_edges.is_empty() {
        return Err(PikanError::Config("at least one clamped edge required".into()));
    }
    let scale = (x1 - x0).max(y1 - y0);
    let tol = 1e-9 * scale;
    let contains: Predicate = Arc::new(move |p: Point2| {
        p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol
    });
    let mut regions = Vec::new();
    for (i, m) in inline.materials.iter().enumerate() {
        let top = inline.interfaces.get(i).copied();
        let membership: Predicate = match top {
            Some(h) => Arc::new(move |p: Point2| p.y <= h + tol),
            None => Arc::new(|_| true),
        };
        if m.e <= 0.0 || m.nu <= -1.0 || m.nu >= 0.5 {
            return Err(PikanError::Config(format!(
                "material {}: E must be positive and nu in (-1, 0.5)",
                i + 1
            )));
        }
        regions.push(MaterialRegion { id: i + 1, membership, material_id: i });
    }
    let interface_chains = inline
        .interfaces
        .iter()
        .map(|&h| {
            vec![Curve::Segment { a: Point2::new(x0, h), b: Point2::new(x1, h) }]
        })
        .collect();
    let outer = vec![
        Curve::Segment { a: Point2::new(x0, y0), b: Point2::new(x1, y0) },
        Curve::Segment { a: Point2::new(x1, y0), b: Point2::new(x1, y1) },
        Curve::Segment { a: Point2::new(x1, y1), b: Point2::new(x0, y1) },
        Curve::Segment { a: Point2::new(x0, y1), b: Point2::new(x0, y0) },
    ];
    let domain = Domain {
        contains,
        bbox: (Point2::new(x0, y0), Point2::new(x1, y1)),
        outer_loops: vec![outer],
        hole_loops: vec![],
        interface_chains,
        regions,
    };
    let materials: Vec<Material> = inline
        .materials
        .iter()
        .map(|m| Material { e: m.e, nu: m.nu, assumption: m.assumption })
        .collect();
    let essential = inline
        .clamped_edges
        .iter()
        .map(|&edge| {
            BoundarySegment::essential(
                edge_curve(edge, inline.bbox),
                Arc::new(|_| (0.0, 0.0)),
                (true, true),
            )
        })
        .collect();
    let natural = inline
        .tractions
        .iter()
        .map(|t| {
            let (tx, ty) = (t.tx, t.ty);
            BoundarySegment::natural(
                edge_curve(t.edge, inline.bbox),
                Arc::new(move |_| (tx, ty)),
            )
        })
        .collect();
    let ext = |a: Option<[f64; 3]>| match a {
        None => Extension::Zero,
        Some([a0, ax, ay]) => Extension::Affine { a0, ax, ay },
    };
    Ok(ProblemSpec {
        name: inline.name.clone(),
        domain,
        materials,
        essential,
        natural,
        distance: [
            parse_distance(&inline.distance_x, inline)?,
            parse_distance(&inline.distance_y, inline)?,
        ],
        extension: [ext(inline.extension_x), ext(inline.extension_y)],
        normalization: Normalization {
            length: (x1 - x0).max(y1 - y0),
            origin: (x0, y0),
        },
        defaults: SolveDefaults {
            shape: vec![2, 5, 5, 5, 2],
            grid_size: 10,
            order: 3,
            grid_range: (0.0, 1.0),
            scheme: Scheme::TriangleCentroid,
            mesh_size: scale / 100.0,
            boundary_points: 101,
            epochs: 1000,
        },
    })
}
