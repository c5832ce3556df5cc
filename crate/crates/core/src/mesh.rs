//! Conforming triangulations on the integer grid, red refinement and P1
//! prolongation between nested levels.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{BcTag, Point, PolygonDomain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("domain vertex {0:?} is not on the integer grid")]
    OffGrid(Point),
    #[error("domain is not representable by unit-grid triangles (covered area {covered}, polygon area {area})")]
    NotRepresentable { covered: f64, area: f64 },
    #[error("boundary mesh edge ({0}, {1}) does not lie on any domain edge")]
    StrayBoundaryEdge(usize, usize),
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mesh file parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BcTag,
    /// Index of the domain edge the segment lies on, when known.
    pub domain_edge: Option<usize>,
}

/// Nodes `0..coarse_nodes` of the fine mesh are the coarse nodes; fine node
/// `coarse_nodes + k` is the midpoint of coarse edge `midpoints[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prolongation {
    pub coarse_nodes: usize,
    pub midpoints: Vec<[usize; 2]>,
}

impl Prolongation {
    pub fn fine_nodes(&self) -> usize {
        self.coarse_nodes + self.midpoints.len()
    }

    /// P1 interpolation of a coarse nodal vector onto the fine nodes.
    pub fn apply(&self, coarse: &[f64]) -> Result<Vec<f64>, MeshError> {
        if coarse.len() != self.coarse_nodes {
            return Err(MeshError::DimensionMismatch { expected: self.coarse_nodes, got: coarse.len() });
        }
        let mut fine = Vec::with_capacity(self.fine_nodes());
        fine.extend_from_slice(coarse);
        fine.extend(self.midpoints.iter().map(|&[a, b]| 0.5 * (coarse[a] + coarse[b])));
        Ok(fine)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    dirichlet: Vec<bool>,
    level: usize,
    prolongation: Option<Prolongation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformityReport {
    pub interior_edges: usize,
    pub boundary_edges: usize,
    /// Edges used by more than two triangles, or boundary segments missing from the list.
    pub nonconforming_edges: usize,
    pub nonpositive_triangles: usize,
    pub min_area: f64,
    pub total_area: f64,
}

impl ConformityReport {
    pub fn is_conforming(&self) -> bool {
        self.nonconforming_edges == 0 && self.nonpositive_triangles == 0
    }
}

impl TriMesh {
    /// Builds a mesh from raw parts; Dirichlet flags are derived from the
    /// boundary edges (junction nodes of D and N edges count as Dirichlet).
    pub fn from_parts(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_edges: Vec<BoundaryEdge>) -> Self {
        let dirichlet = dirichlet_flags(nodes.len(), &boundary_edges);
        Self { nodes, triangles, boundary_edges, dirichlet, level: 0, prolongation: None }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn dirichlet_nodes(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Map from the next coarser level, if this mesh came from refinement.
    pub fn prolongation(&self) -> Option<&Prolongation> {
        self.prolongation.as_ref()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        triangle_area(self.triangle_points(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn find_node(&self, p: Point, tol: f64) -> Option<usize> {
        self.nodes.iter().position(|q| (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol)
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for tri in &self.triangles {
            for k in 0..3 {
                let a = self.nodes[tri[k]];
                let b = self.nodes[tri[(k + 1) % 3]];
                h = h.max((b[0] - a[0]).hypot(b[1] - a[1]));
            }
        }
        h
    }

    /// Undirected edges sorted by node pair.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> =
            self.triangles.iter().flat_map(|t| (0..3).map(move |k| sorted_pair(t[k], t[(k + 1) % 3]))).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn check_conformity(&self) -> ConformityReport {
        let mut count: HashMap<[usize; 2], usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *count.entry(sorted_pair(t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut listed: HashMap<[usize; 2], usize> = HashMap::new();
        for e in &self.boundary_edges {
            *listed.entry(sorted_pair(e.nodes[0], e.nodes[1])).or_default() += 1;
        }
        let mut interior = 0;
        let mut boundary = 0;
        let mut bad = 0;
        for (edge, &c) in &count {
            match c {
                1 => {
                    boundary += 1;
                    if listed.get(edge) != Some(&1) {
                        bad += 1;
                    }
                }
                2 => {
                    interior += 1;
                    if listed.contains_key(edge) {
                        bad += 1;
                    }
                }
                _ => bad += 1,
            }
        }
        bad += listed.keys().filter(|e| !count.contains_key(*e)).count();
        let areas: Vec<f64> = (0..self.triangles.len()).map(|t| self.triangle_area(t)).collect();
        ConformityReport {
            interior_edges: interior,
            boundary_edges: boundary,
            nonconforming_edges: bad,
            nonpositive_triangles: areas.iter().filter(|&&a| a <= 0.0).count(),
            min_area: areas.iter().copied().fold(f64::INFINITY, f64::min),
            total_area: areas.iter().sum(),
        }
    }

    /// Red refinement: every triangle is split into four through its edge midpoints.
    pub fn refine_uniform(&self) -> TriMesh {
        let n = self.nodes.len();
        let mut nodes = self.nodes.clone();
        let mut midpoint_of: HashMap<[usize; 2], usize> = HashMap::with_capacity(self.triangles.len() * 2);
        let mut midpoints = Vec::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point>| -> usize {
            let key = sorted_pair(a, b);
            *midpoint_of.entry(key).or_insert_with(|| {
                let pa = nodes[key[0]];
                let pb = nodes[key[1]];
                nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                midpoints.push(key);
                n + midpoints.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut boundary_edges = Vec::with_capacity(self.boundary_edges.len() * 2);
        for e in &self.boundary_edges {
            let m = mid(e.nodes[0], e.nodes[1], &mut nodes);
            boundary_edges.push(BoundaryEdge { nodes: [e.nodes[0], m], ..*e });
            boundary_edges.push(BoundaryEdge { nodes: [m, e.nodes[1]], ..*e });
        }
        let dirichlet = dirichlet_flags(nodes.len(), &boundary_edges);
        TriMesh {
            nodes,
            triangles,
            boundary_edges,
            dirichlet,
            level: self.level + 1,
            prolongation: Some(Prolongation { coarse_nodes: n, midpoints }),
        }
    }

    /// Plain-text export: header `nodes N triangles T bedges B`, then node
    /// coordinates, triangle node triples and boundary edges `i j tag`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "nodes {} triangles {} bedges {}",
            self.nodes.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for p in &self.nodes {
            let _ = writeln!(out, "{} {}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.letter());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MeshError> {
        let err = |m: &str| MeshError::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| err("empty file"))?.split_whitespace().collect();
        let (n, t, b) = match header.as_slice() {
            ["nodes", n, "triangles", t, "bedges", b] => {
                let p = |s: &str| s.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string()));
                (p(n)?, p(t)?, p(b)?)
            }
            _ => return Err(err("bad header")),
        };
        let mut next_fields = |k: usize| -> Result<Vec<String>, MeshError> {
            let line = lines.next().ok_or_else(|| err("unexpected end of file"))?;
            let f: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if f.len() != k {
                return Err(MeshError::Parse(format!("expected {k} fields in '{line}'")));
            }
            Ok(f)
        };
        let pf = |s: &str| s.parse::<f64>().map_err(|e| MeshError::Parse(e.to_string()));
        let pu = |s: &str, n: usize| -> Result<usize, MeshError> {
            let v = s.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string()))?;
            if v >= n {
                return Err(MeshError::Parse(format!("node index {v} out of range")));
            }
            Ok(v)
        };
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let f = next_fields(2)?;
            nodes.push([pf(&f[0])?, pf(&f[1])?]);
        }
        let mut triangles = Vec::with_capacity(t);
        for _ in 0..t {
            let f = next_fields(3)?;
            triangles.push([pu(&f[0], n)?, pu(&f[1], n)?, pu(&f[2], n)?]);
        }
        let mut boundary_edges = Vec::with_capacity(b);
        for _ in 0..b {
            let f = next_fields(3)?;
            let tag = f[2].parse::<BcTag>().map_err(|e| MeshError::Parse(e.to_string()))?;
            boundary_edges.push(BoundaryEdge { nodes: [pu(&f[0], n)?, pu(&f[1], n)?], tag, domain_edge: None });
        }
        Ok(Self::from_parts(nodes, triangles, boundary_edges))
    }
}

pub fn triangle_area(p: [Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

#[inline]
fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn dirichlet_flags(n: usize, boundary_edges: &[BoundaryEdge]) -> Vec<bool> {
    let mut flags = vec![false; n];
    for e in boundary_edges.iter().filter(|e| e.tag == BcTag::Dirichlet) {
        flags[e.nodes[0]] = true;
        flags[e.nodes[1]] = true;
    }
    flags
}

/// Vertex with the largest interior angle; orients the cell diagonals.
fn anchor_point(domain: &PolygonDomain) -> Point {
    let j = domain
        .angles()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, &w)| if w > best.1 + 1e-12 { (j, w) } else { best })
        .0;
    domain.vertices()[j]
}

/// Triangulates the unit cells of the integer grid clipped to the domain.
/// Each cell is split along the diagonal that points at the anchor corner
/// (the largest interior angle), or along the other diagonal when only that
/// one follows a slanted domain edge.
pub fn initial_mesh(domain: &PolygonDomain) -> Result<TriMesh, MeshError> {
    for v in domain.vertices() {
        if (v[0] - v[0].round()).abs() > 1e-12 || (v[1] - v[1].round()).abs() > 1e-12 {
            return Err(MeshError::OffGrid(*v));
        }
    }
    let xs = domain.vertices().iter().map(|v| v[0].round() as i64);
    let ys = domain.vertices().iter().map(|v| v[1].round() as i64);
    let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
    let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
    let anchor = anchor_point(domain);

    let mut node_of: HashMap<(i64, i64), usize> = HashMap::new();
    let mut nodes: Vec<Point> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut covered = 0.0;

    for j in y0..y1 {
        for i in x0..x1 {
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let slash = [[c[0], c[1], c[2]], [c[0], c[2], c[3]]];
            let backslash = [[c[0], c[1], c[3]], [c[1], c[2], c[3]]];
            let centre = [i as f64 + 0.5, j as f64 + 0.5];
            let prefer_slash = (centre[0] - anchor[0]) * (centre[1] - anchor[1]) > 0.0;
            let (first, second) = if prefer_slash { (slash, backslash) } else { (backslash, slash) };
            let keep = |cands: &[[(i64, i64); 3]; 2]| -> Vec<[(i64, i64); 3]> {
                cands.iter().copied().filter(|t| triangle_inside(domain, t)).collect()
            };
            let a = keep(&first);
            let b = keep(&second);
            let chosen = if b.len() > a.len() { b } else { a };
            for t in chosen {
                let idx = t.map(|(x, y)| {
                    *node_of.entry((x, y)).or_insert_with(|| {
                        nodes.push([x as f64, y as f64]);
                        nodes.len() - 1
                    })
                });
                covered += 0.5;
                triangles.push(idx);
            }
        }
    }
    let area = domain.area();
    if (covered - area).abs() > 1e-9 * area.max(1.0) {
        return Err(MeshError::NotRepresentable { covered, area });
    }

    let mut count: HashMap<[usize; 2], (usize, [usize; 2])> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            count.entry(sorted_pair(a, b)).or_insert((0, [a, b])).0 += 1;
        }
    }
    let mut boundary: Vec<[usize; 2]> = count.values().filter(|(c, _)| *c == 1).map(|(_, e)| *e).collect();
    boundary.sort_unstable();
    let mut boundary_edges = Vec::with_capacity(boundary.len());
    for [a, b] in boundary {
        let mid = [0.5 * (nodes[a][0] + nodes[b][0]), 0.5 * (nodes[a][1] + nodes[b][1])];
        let k = domain.edge_containing(mid, 1e-9).ok_or(MeshError::StrayBoundaryEdge(a, b))?;
        boundary_edges.push(BoundaryEdge { nodes: [a, b], tag: domain.edges()[k].tag, domain_edge: Some(k) });
    }
    Ok(TriMesh::from_parts(nodes, triangles, boundary_edges))
}

fn triangle_inside(domain: &PolygonDomain, t: &[(i64, i64); 3]) -> bool {
    let p = t.map(|(x, y)| [x as f64, y as f64]);
    let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
    if !domain.contains(centroid) {
        return false;
    }
    (0..3).all(|k| {
        let a = p[k];
        let b = p[(k + 1) % 3];
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        domain.contains(m) || domain.on_boundary(m, 1e-12)
    })
}

/// Level-0 mesh refined `levels` times; entry `j` is the level-`j` mesh.
pub fn mesh_hierarchy(domain: &PolygonDomain, levels: usize) -> Result<Vec<TriMesh>, MeshError> {
    let mut out = vec![initial_mesh(domain)?];
    for _ in 0..levels {
        let next = out.last().unwrap().refine_uniform();
        out.push(next);
    }
    Ok(out)
}
