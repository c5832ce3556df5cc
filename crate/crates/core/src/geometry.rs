//! Polygonal domains with Dirichlet/Neumann edge tags, vertex classification
//! and the exponents of the corner singular functions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Absolute tolerance used when comparing interior angles against the
/// breakpoints of the exponent table.
pub const ANGLE_TOL: f64 = 1e-12;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("expected {expected} edge tags, got {got}")]
    TagCountMismatch { expected: usize, got: usize },
    #[error("edge {0} has zero length")]
    DegenerateEdge(usize),
    #[error("polygon is not counterclockwise (signed area {0})")]
    NotCounterclockwise(f64),
    #[error("edges {0} and {1} intersect; polygon is not simple")]
    SelfIntersecting(usize, usize),
    #[error("vertex {vertex} has interior angle {angle} outside (0, 2pi)")]
    BadAngle { vertex: usize, angle: f64 },
    #[error("vertex {0} is a straight-angle vertex without a boundary-condition change")]
    StraightVertex(usize),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error("singular contributions at several vertices {0:?}; only one singular vertex is supported")]
    MultipleSingularVertices(Vec<usize>),
    #[error("boundary type {bc} is not available on domain {domain}")]
    UnsupportedCombination { domain: BuiltinDomain, bc: BoundaryType },
    #[error("domain file parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown {kind} '{value}'")]
    UnknownName { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcTag {
    Dirichlet,
    Neumann,
}

impl BcTag {
    pub fn letter(self) -> char {
        match self {
            BcTag::Dirichlet => 'D',
            BcTag::Neumann => 'N',
        }
    }
}

impl FromStr for BcTag {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "D" | "d" => Ok(BcTag::Dirichlet),
            "N" | "n" => Ok(BcTag::Neumann),
            other => Err(GeometryError::UnknownName { kind: "edge tag", value: other.to_string() }),
        }
    }
}

/// Straight boundary edge running from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub start: usize,
    pub end: usize,
    pub tag: BcTag,
}

/// Indicator set of a vertex, from the tags of its incoming and outgoing edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VertexClass {
    /// Dirichlet on both sides.
    D2,
    /// Neumann on both sides.
    N2,
    /// Incoming edge Neumann, outgoing edge Dirichlet.
    MPrime,
    /// Incoming edge Dirichlet, outgoing edge Neumann.
    MDoublePrime,
}

impl fmt::Display for VertexClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VertexClass::D2 => "D2",
            VertexClass::N2 => "N2",
            VertexClass::MPrime => "M'",
            VertexClass::MDoublePrime => "M''",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trig {
    Sin,
    Cos,
}

impl Trig {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Trig::Sin => x.sin(),
            Trig::Cos => x.cos(),
        }
    }

    /// Derivative of `eval` with respect to its argument.
    #[inline]
    pub fn eval_derivative(self, x: f64) -> f64 {
        match self {
            Trig::Sin => x.cos(),
            Trig::Cos => -x.sin(),
        }
    }
}

/// One singular function `r^{-beta} trig(beta * theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularExponent {
    pub beta: f64,
    pub trig: Trig,
}

/// Polar coordinates centred at a vertex, with `theta = 0` along the
/// outgoing edge and the interior at `0 < theta < omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Point,
    /// Unit direction of the outgoing edge.
    pub axis: [f64; 2],
    pub omega: f64,
}

impl LocalFrame {
    /// Coordinates of `p` relative to the frame, rotated so the axis is +x.
    #[inline]
    pub fn local(&self, p: Point) -> [f64; 2] {
        let dx = p[0] - self.origin[0];
        let dy = p[1] - self.origin[1];
        [dx * self.axis[0] + dy * self.axis[1], -dx * self.axis[1] + dy * self.axis[0]]
    }

    /// `(r, theta)` with theta in `[0, omega]` inside the cone. Outside it,
    /// theta is measured from the nearer side, so it is slightly negative
    /// just below the axis and slightly above `omega` just past the far edge.
    #[inline]
    pub fn polar(&self, p: Point) -> (f64, f64) {
        let [x, y] = self.local(p);
        let r = x.hypot(y);
        let mut theta = y.atan2(x);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        if theta > self.omega && 2.0 * PI - theta < theta - self.omega {
            theta -= 2.0 * PI;
        }
        (r, theta)
    }

    /// Global unit direction of the ray at local angle `theta`.
    #[inline]
    pub fn direction(&self, theta: f64) -> [f64; 2] {
        let (s, c) = theta.sin_cos();
        [c * self.axis[0] - s * self.axis[1], c * self.axis[1] + s * self.axis[0]]
    }
}

/// Singular functions attached to one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpec {
    pub vertex_index: usize,
    pub class: VertexClass,
    pub exponents: Vec<SingularExponent>,
    pub frame: LocalFrame,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerpDimension {
    pub d_perp: usize,
    pub contributing: Vec<usize>,
}

/// Simple counterclockwise polygon. Edge `k` runs from vertex `k` to vertex
/// `k + 1` (mod n), so vertex `j` has incoming edge `j - 1` and outgoing edge `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonDomain {
    vertices: Vec<Point>,
    edges: Vec<Edge>,
    angles: Vec<f64>,
}

impl PolygonDomain {
    pub fn new(vertices: Vec<Point>, tags: Vec<BcTag>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if tags.len() != n {
            return Err(GeometryError::TagCountMismatch { expected: n, got: tags.len() });
        }
        let edges: Vec<Edge> =
            tags.iter().enumerate().map(|(k, &tag)| Edge { start: k, end: (k + 1) % n, tag }).collect();
        for (k, e) in edges.iter().enumerate() {
            let a = vertices[e.start];
            let b = vertices[e.end];
            if (b[0] - a[0]).hypot(b[1] - a[1]) == 0.0 {
                return Err(GeometryError::DegenerateEdge(k));
            }
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            return Err(GeometryError::NotCounterclockwise(area));
        }
        check_simple(&vertices)?;

        let angles: Vec<f64> = (0..n)
            .map(|j| {
                let prev = vertices[(j + n - 1) % n];
                let cur = vertices[j];
                let next = vertices[(j + 1) % n];
                interior_angle(prev, cur, next)
            })
            .collect();
        for (j, &w) in angles.iter().enumerate() {
            if !(w > 0.0 && w < 2.0 * PI) {
                return Err(GeometryError::BadAngle { vertex: j, angle: w });
            }
            let same_tag = edges[(j + n - 1) % n].tag == edges[j].tag;
            if (w - PI).abs() <= ANGLE_TOL && same_tag {
                return Err(GeometryError::StraightVertex(j));
            }
        }
        Ok(Self { vertices, edges, angles })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn incoming_edge(&self, j: usize) -> &Edge {
        let n = self.vertices.len();
        &self.edges[(j + n - 1) % n]
    }

    pub fn outgoing_edge(&self, j: usize) -> &Edge {
        &self.edges[j]
    }

    pub fn has_dirichlet(&self) -> bool {
        self.edges.iter().any(|e| e.tag == BcTag::Dirichlet)
    }

    pub fn is_pure_neumann(&self) -> bool {
        !self.has_dirichlet()
    }

    pub fn edge_length(&self, k: usize) -> f64 {
        let e = &self.edges[k];
        let a = self.vertices[e.start];
        let b = self.vertices[e.end];
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    /// Polar frame at vertex `j`.
    pub fn frame(&self, j: usize) -> LocalFrame {
        let n = self.vertices.len();
        let q = self.vertices[j];
        let next = self.vertices[(j + 1) % n];
        let len = (next[0] - q[0]).hypot(next[1] - q[1]);
        LocalFrame { origin: q, axis: [(next[0] - q[0]) / len, (next[1] - q[1]) / len], omega: self.angles[j] }
    }

    /// The unique vertex carrying singular functions, if any.
    pub fn singular_spec(&self) -> Result<Option<SingularSpec>, GeometryError> {
        let perp = perp_dimension(self);
        match perp.contributing.as_slice() {
            [] => Ok(None),
            [j] => {
                let j = *j;
                let class = classify_vertex(self, j);
                let omega = self.angles[j];
                let spec = SingularSpec {
                    vertex_index: j,
                    class,
                    exponents: singular_exponents(class, omega),
                    frame: self.frame(j),
                };
                for (k, &w) in self.angles.iter().enumerate() {
                    if k != j && w > PI / 2.0 + ANGLE_TOL {
                        log::warn!("vertex {k} has interior angle {w:.6} > pi/2 besides the singular vertex {j}");
                    }
                }
                Ok(Some(spec))
            }
            many => Err(GeometryError::MultipleSingularVertices(many.to_vec())),
        }
    }

    /// Parses the plain-text domain description: one `x y` line per vertex
    /// followed by one `D`/`N` line per edge. `#` starts a comment.
    pub fn parse_description(text: &str) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        let mut tags = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [x, y] => {
                    if !tags.is_empty() {
                        return Err(GeometryError::Parse { line: i + 1, msg: "vertex line after edge tags".into() });
                    }
                    let parse = |s: &str| {
                        s.parse::<f64>().map_err(|e| GeometryError::Parse { line: i + 1, msg: e.to_string() })
                    };
                    vertices.push([parse(x)?, parse(y)?]);
                }
                [tag] => {
                    let tag =
                        tag.parse::<BcTag>().map_err(|e| GeometryError::Parse { line: i + 1, msg: e.to_string() })?;
                    tags.push(tag);
                }
                _ => return Err(GeometryError::Parse { line: i + 1, msg: format!("unrecognized line '{line}'") }),
            }
        }
        Self::new(vertices, tags)
    }

    pub fn to_description(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("{} {}\n", v[0], v[1]));
        }
        for e in &self.edges {
            out.push(e.tag.letter());
            out.push('\n');
        }
        out
    }

    /// Same polygon under a rotation by `angle` and a translation.
    pub fn transformed(&self, angle: f64, shift: Point) -> Result<Self, GeometryError> {
        let (s, c) = angle.sin_cos();
        let vertices =
            self.vertices.iter().map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]).collect();
        Self::new(vertices, self.edges.iter().map(|e| e.tag).collect())
    }

    /// Winding-number point-in-polygon test; points on the boundary count as outside.
    pub fn contains(&self, p: Point) -> bool {
        if self.on_boundary(p, 1e-12) {
            return false;
        }
        let mut winding = 0i32;
        let n = self.vertices.len();
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
            if a[1] <= p[1] {
                if b[1] > p[1] && side > 0.0 {
                    winding += 1;
                }
            } else if b[1] <= p[1] && side < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    /// Index of a domain edge whose closed segment contains `p`.
    pub fn edge_containing(&self, p: Point, tol: f64) -> Option<usize> {
        (0..self.edges.len()).find(|&k| {
            let e = &self.edges[k];
            point_segment_distance(p, self.vertices[e.start], self.vertices[e.end]) <= tol
        })
    }

    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        self.edge_containing(p, tol).is_some()
    }
}

pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for k in 0..n {
        let a = vertices[k];
        let b = vertices[(k + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Interior angle at `cur` of a counterclockwise polygon: `pi` minus the turning angle.
pub fn interior_angle(prev: Point, cur: Point, next: Point) -> f64 {
    let din = [cur[0] - prev[0], cur[1] - prev[1]];
    let dout = [next[0] - cur[0], next[1] - cur[1]];
    let cross = din[0] * dout[1] - din[1] * dout[0];
    let dot = din[0] * dout[0] + din[1] * dout[1];
    PI - cross.atan2(dot)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0].hypot(d[1])
}

fn check_simple(v: &[Point]) -> Result<(), GeometryError> {
    let n = v.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, d: f64| {
        d == 0.0 && p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

pub fn classify_vertex(domain: &PolygonDomain, j: usize) -> VertexClass {
    let incoming = domain.incoming_edge(j).tag;
    let outgoing = domain.outgoing_edge(j).tag;
    match (incoming, outgoing) {
        (BcTag::Dirichlet, BcTag::Dirichlet) => VertexClass::D2,
        (BcTag::Neumann, BcTag::Neumann) => VertexClass::N2,
        (BcTag::Neumann, BcTag::Dirichlet) => VertexClass::MPrime,
        (BcTag::Dirichlet, BcTag::Neumann) => VertexClass::MDoublePrime,
    }
}

/// Open-closed interval test `lo < w <= hi` with the angle tolerance.
fn in_open_closed(w: f64, lo: f64, hi: f64) -> bool {
    w > lo + ANGLE_TOL && w <= hi + ANGLE_TOL
}

fn in_open(w: f64, lo: f64, hi: f64) -> bool {
    w > lo + ANGLE_TOL && w < hi - ANGLE_TOL
}

/// Exponents of the singular functions that are square integrable but not in H^1.
pub fn singular_exponents(class: VertexClass, omega: f64) -> Vec<SingularExponent> {
    match class {
        VertexClass::D2 | VertexClass::N2 => {
            if in_open(omega, PI, 2.0 * PI) {
                let trig = if class == VertexClass::D2 { Trig::Sin } else { Trig::Cos };
                vec![SingularExponent { beta: PI / omega, trig }]
            } else {
                Vec::new()
            }
        }
        VertexClass::MPrime | VertexClass::MDoublePrime => {
            let trig = if class == VertexClass::MPrime { Trig::Sin } else { Trig::Cos };
            if in_open_closed(omega, PI / 2.0, 1.5 * PI) {
                vec![SingularExponent { beta: PI / (2.0 * omega), trig }]
            } else if in_open(omega, 1.5 * PI, 2.0 * PI) {
                (1..=2).map(|m| SingularExponent { beta: (2 * m - 1) as f64 * PI / (2.0 * omega), trig }).collect()
            } else {
                Vec::new()
            }
        }
    }
}

pub fn perp_dimension(domain: &PolygonDomain) -> PerpDimension {
    let mut d_perp = 0;
    let mut contributing = Vec::new();
    for j in 0..domain.num_vertices() {
        let k = singular_exponents(classify_vertex(domain, j), domain.angles()[j]).len();
        if k > 0 {
            d_perp += k;
            contributing.push(j);
        }
    }
    PerpDimension { d_perp, contributing }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinDomain {
    I,
    II,
    III,
    IV,
}

impl BuiltinDomain {
    pub const ALL: [BuiltinDomain; 4] = [BuiltinDomain::I, BuiltinDomain::II, BuiltinDomain::III, BuiltinDomain::IV];

    /// Interior angle at the corner `Q` at the origin.
    pub fn corner_angle(self) -> f64 {
        match self {
            BuiltinDomain::I => PI,
            BuiltinDomain::II => 1.25 * PI,
            BuiltinDomain::III => 1.5 * PI,
            BuiltinDomain::IV => 1.75 * PI,
        }
    }

    /// Vertices starting at `Q = (0, 0)`: the first edge is the outgoing
    /// edge along the positive x-axis, the last edge comes back into `Q`.
    fn outline(self) -> Vec<Point> {
        match self {
            BuiltinDomain::I => vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [-2.0, 2.0], [-2.0, 0.0]],
            BuiltinDomain::II => vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0]],
            BuiltinDomain::III => {
                vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0], [0.0, -2.0]]
            }
            BuiltinDomain::IV => {
                vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0], [2.0, -2.0]]
            }
        }
    }
}

impl fmt::Display for BuiltinDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BuiltinDomain::I => "I",
            BuiltinDomain::II => "II",
            BuiltinDomain::III => "III",
            BuiltinDomain::IV => "IV",
        };
        f.write_str(s)
    }
}

impl FromStr for BuiltinDomain {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(BuiltinDomain::I),
            "II" | "2" => Ok(BuiltinDomain::II),
            "III" | "3" => Ok(BuiltinDomain::III),
            "IV" | "4" => Ok(BuiltinDomain::IV),
            _ => Err(GeometryError::UnknownName { kind: "domain", value: s.to_string() }),
        }
    }
}

/// Boundary-condition layouts. All edges away from `Q` are Dirichlet except
/// under `B5`; the two edges at `Q` are set per type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryType {
    /// Dirichlet everywhere.
    B1,
    /// Both edges at `Q` Neumann.
    B2,
    /// Incoming edge at `Q` Neumann, outgoing Dirichlet.
    B3,
    /// Incoming edge at `Q` Dirichlet, outgoing Neumann.
    B4,
    /// Neumann everywhere.
    B5,
}

impl BoundaryType {
    pub const ALL: [BoundaryType; 5] =
        [BoundaryType::B1, BoundaryType::B2, BoundaryType::B3, BoundaryType::B4, BoundaryType::B5];

    /// Tags of (incoming, outgoing) edges at `Q` and of the remaining edges.
    fn tags(self) -> (BcTag, BcTag, BcTag) {
        use BcTag::*;
        match self {
            BoundaryType::B1 => (Dirichlet, Dirichlet, Dirichlet),
            BoundaryType::B2 => (Neumann, Neumann, Dirichlet),
            BoundaryType::B3 => (Neumann, Dirichlet, Dirichlet),
            BoundaryType::B4 => (Dirichlet, Neumann, Dirichlet),
            BoundaryType::B5 => (Neumann, Neumann, Neumann),
        }
    }
}

impl fmt::Display for BoundaryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B{}", *self as usize + 1)
    }
}

impl FromStr for BoundaryType {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B1" | "1" => Ok(BoundaryType::B1),
            "B2" | "2" => Ok(BoundaryType::B2),
            "B3" | "3" => Ok(BoundaryType::B3),
            "B4" | "4" => Ok(BoundaryType::B4),
            "B5" | "5" => Ok(BoundaryType::B5),
            _ => Err(GeometryError::UnknownName { kind: "boundary type", value: s.to_string() }),
        }
    }
}

/// One of the four test domains: the square `[-2, 2]^2` centred at `Q = 0`
/// with a sector removed. On domain I the point `Q` is kept as a vertex
/// only where the boundary condition changes there.
pub fn builtin_domain(name: BuiltinDomain, bc: BoundaryType) -> Result<PolygonDomain, GeometryError> {
    let mut vertices = name.outline();
    let n = vertices.len();
    let (incoming, outgoing, rest) = bc.tags();
    let mut tags = vec![rest; n];
    tags[0] = outgoing;
    tags[n - 1] = incoming;
    if name == BuiltinDomain::I && incoming == outgoing {
        // Q sits on a straight edge with one condition: merge the two halves.
        vertices.remove(0);
        tags.remove(0);
        let m = vertices.len();
        tags[m - 1] = incoming;
    }
    PolygonDomain::new(vertices, tags)
}

/// `[0, 1]^2` with one condition on the whole boundary.
pub fn unit_square(tag: BcTag) -> PolygonDomain {
    PolygonDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![tag; 4])
        .expect("unit square is a valid polygon")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn index_of(domain: &PolygonDomain, p: Point) -> usize {
        domain.vertices().iter().position(|v| *v == p).unwrap()
    }

    #[test]
    fn classify_builtin_corners() {
        let l = builtin_domain(BuiltinDomain::III, BoundaryType::B1).unwrap();
        assert_eq!(classify_vertex(&l, 0), VertexClass::D2);
        let d = builtin_domain(BuiltinDomain::I, BoundaryType::B3).unwrap();
        assert_eq!(classify_vertex(&d, 0), VertexClass::MPrime);
        let d = builtin_domain(BuiltinDomain::I, BoundaryType::B4).unwrap();
        assert_eq!(classify_vertex(&d, 0), VertexClass::MDoublePrime);
    }

    #[test]
    fn exponent_table_rows() {
        let e = singular_exponents(VertexClass::D2, 1.5 * PI);
        assert_eq!(e.len(), 1);
        assert_relative_eq!(e[0].beta, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(e[0].trig, Trig::Sin);

        let e = singular_exponents(VertexClass::MPrime, 1.75 * PI);
        assert_eq!(e.len(), 2);
        assert_relative_eq!(e[0].beta, 2.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(e[1].beta, 6.0 / 7.0, epsilon = 1e-15);
        assert!(e.iter().all(|x| x.trig == Trig::Sin));

        assert!(singular_exponents(VertexClass::D2, PI / 2.0).is_empty());
        assert_eq!(singular_exponents(VertexClass::N2, 1.5 * PI)[0].trig, Trig::Cos);
        assert_eq!(singular_exponents(VertexClass::MDoublePrime, 1.25 * PI)[0].trig, Trig::Cos);
    }

    #[test]
    fn breakpoints_follow_interval_ends() {
        // (pi, 2pi) is open for D2/N2.
        assert!(singular_exponents(VertexClass::D2, PI).is_empty());
        assert!(singular_exponents(VertexClass::N2, PI + 1e-14).is_empty());
        // (pi/2, 3pi/2] is closed on the right for the M types.
        assert_eq!(singular_exponents(VertexClass::MPrime, 1.5 * PI).len(), 1);
        assert_eq!(singular_exponents(VertexClass::MPrime, 1.5 * PI + 1e-13).len(), 1);
        assert!(singular_exponents(VertexClass::MPrime, PI / 2.0).is_empty());
        assert_eq!(singular_exponents(VertexClass::MDoublePrime, PI).len(), 1);
    }

    #[test]
    fn perp_dimension_of_builtins() {
        let d = builtin_domain(BuiltinDomain::III, BoundaryType::B1).unwrap();
        assert_eq!(perp_dimension(&d), PerpDimension { d_perp: 1, contributing: vec![0] });
        let d = builtin_domain(BuiltinDomain::IV, BoundaryType::B3).unwrap();
        assert_eq!(perp_dimension(&d), PerpDimension { d_perp: 2, contributing: vec![0] });
        let sq = PolygonDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![BcTag::Dirichlet; 4])
            .unwrap();
        assert_eq!(perp_dimension(&sq), PerpDimension { d_perp: 0, contributing: vec![] });
        // Domain I: only the mixed cases are singular.
        for bc in BoundaryType::ALL {
            let d = builtin_domain(BuiltinDomain::I, bc).unwrap();
            let expected = matches!(bc, BoundaryType::B3 | BoundaryType::B4) as usize;
            assert_eq!(perp_dimension(&d).d_perp, expected, "{bc}");
        }
    }

    #[test]
    fn builtin_shapes() {
        let d = builtin_domain(BuiltinDomain::I, BoundaryType::B3).unwrap();
        assert_relative_eq!(d.area(), 8.0);
        assert_relative_eq!(d.angles()[0], PI, epsilon = 1e-14);
        let d = builtin_domain(BuiltinDomain::III, BoundaryType::B1).unwrap();
        assert_relative_eq!(d.area(), 12.0);
        assert!(!d.contains([1.0, -1.0]));
        assert!(d.contains([-1.0, -1.0]));
        let d = builtin_domain(BuiltinDomain::IV, BoundaryType::B4).unwrap();
        assert_relative_eq!(d.area(), 14.0);
        assert_relative_eq!(d.angles()[0], 1.75 * PI, epsilon = 1e-14);
        assert!(!d.contains([1.5, -0.5]));
        assert!(d.contains([0.5, -1.5]));
        let d = builtin_domain(BuiltinDomain::II, BoundaryType::B3).unwrap();
        assert_relative_eq!(d.angles()[0], 1.25 * PI, epsilon = 1e-14);
        assert_relative_eq!(d.area(), 10.0);
        let d = builtin_domain(BuiltinDomain::I, BoundaryType::B1).unwrap();
        assert_eq!(d.num_vertices(), 4);
    }

    #[test]
    fn b5_is_all_neumann() {
        for name in BuiltinDomain::ALL {
            let d = builtin_domain(name, BoundaryType::B5).unwrap();
            assert!(d.is_pure_neumann());
        }
    }

    #[test]
    fn non_corner_edges_are_dirichlet() {
        let d = builtin_domain(BuiltinDomain::III, BoundaryType::B2).unwrap();
        let n = d.num_vertices();
        for k in 1..n - 1 {
            assert_eq!(d.edges()[k].tag, BcTag::Dirichlet);
        }
        assert_eq!(d.edges()[0].tag, BcTag::Neumann);
        assert_eq!(d.edges()[n - 1].tag, BcTag::Neumann);
        // Far corner next to a Neumann edge has a right angle and no singularity.
        let j = index_of(&d, [2.0, 0.0]);
        assert_eq!(classify_vertex(&d, j), VertexClass::MPrime);
        assert!(singular_exponents(classify_vertex(&d, j), d.angles()[j]).is_empty());
    }

    #[test]
    fn rejects_bad_polygons() {
        let cw = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            PolygonDomain::new(cw, vec![BcTag::Dirichlet; 4]),
            Err(GeometryError::NotCounterclockwise(_))
        ));
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(PolygonDomain::new(bowtie, vec![BcTag::Dirichlet; 4]).is_err());
        let straight = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        assert_eq!(
            PolygonDomain::new(straight.clone(), vec![BcTag::Dirichlet; 5]),
            Err(GeometryError::StraightVertex(1))
        );
        let tags = vec![BcTag::Dirichlet, BcTag::Neumann, BcTag::Dirichlet, BcTag::Dirichlet, BcTag::Dirichlet];
        assert!(PolygonDomain::new(straight, tags).is_ok());
    }

    #[test]
    fn frame_puts_interior_inside_cone() {
        let d = builtin_domain(BuiltinDomain::IV, BoundaryType::B3).unwrap();
        let f = d.frame(0);
        let (r, t) = f.polar([1.0, 0.0]);
        assert_relative_eq!(r, 1.0);
        assert_relative_eq!(t, 0.0);
        let (_, t) = f.polar([1.0, -1.0]);
        assert_relative_eq!(t, 1.75 * PI, epsilon = 1e-14);
        let (_, t) = f.polar([0.0, 1.0]);
        assert_relative_eq!(t, PI / 2.0, epsilon = 1e-14);
        let dir = f.direction(PI / 2.0);
        assert_relative_eq!(dir[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(dir[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn description_round_trip() {
        let d = builtin_domain(BuiltinDomain::III, BoundaryType::B3).unwrap();
        let text = d.to_description();
        let back = PolygonDomain::parse_description(&text).unwrap();
        assert_eq!(back, d);
        assert!(PolygonDomain::parse_description("0 0\n1 0\n0 1\nD\nX\nD\n").is_err());
    }

    #[test]
    fn turning_angles_sum_to_two_pi() {
        for name in BuiltinDomain::ALL {
            let d = builtin_domain(name, BoundaryType::B3).unwrap();
            let turning: f64 = d.angles().iter().map(|w| PI - w).sum();
            assert_relative_eq!(turning, 2.0 * PI, epsilon = 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn classification_invariant_under_rigid_motion(angle in -3.0f64..3.0, sx in -5.0f64..5.0, sy in -5.0f64..5.0) {
            for name in BuiltinDomain::ALL {
                for bc in BoundaryType::ALL {
                    let d = builtin_domain(name, bc).unwrap();
                    let moved = d.transformed(angle, [sx, sy]).unwrap();
                    for j in 0..d.num_vertices() {
                        proptest::prop_assert_eq!(classify_vertex(&d, j), classify_vertex(&moved, j));
                        proptest::prop_assert!((d.angles()[j] - moved.angles()[j]).abs() < 1e-9);
                    }
                    proptest::prop_assert_eq!(perp_dimension(&d), perp_dimension(&moved));
                }
            }
        }

        #[test]
        fn exponents_lie_in_unit_interval(omega in 0.01f64..(2.0 * PI - 0.01)) {
            for class in [VertexClass::D2, VertexClass::N2, VertexClass::MPrime, VertexClass::MDoublePrime] {
                let e = singular_exponents(class, omega);
                for x in &e {
                    proptest::prop_assert!(x.beta > 0.0 && x.beta < 1.0);
                }
                if let Some(min) = e.iter().map(|x| x.beta).reduce(f64::min) {
                    let expected = match class {
                        VertexClass::D2 | VertexClass::N2 => PI / omega,
                        _ => PI / (2.0 * omega),
                    };
                    proptest::prop_assert!((min - expected).abs() < 1e-14);
                }
            }
        }
    }
}
