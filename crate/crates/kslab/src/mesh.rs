//! Uniform triangulation of a rectangle and its barycentric dual geometry.
//!
//! An `a x a` grid of cells is split along the lower-left to upper-right
//! diagonal into `2 a^2` counterclockwise triangles (one fixed orientation,
//! so meshes are bit-reproducible). Around each vertex `P_i` the barycentric
//! dual cell `D_i` is bounded, inside each incident triangle, by the two
//! adjacent edge midpoints and the barycenter; its area is one third of the
//! incident triangle area, which is what makes mass lumping equal row-sum
//! lumping for P1 elements. The upwind scheme needs, per ordered neighbor
//! pair `(i, j)` and shared triangle `K`, the midpoint-to-barycenter segment
//! `(dD_i n dD_j)|_K` with its measure and the unit normal exterior to `D_i`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivisions,
    #[error("domain rectangle is degenerate: {0:?}")]
    DegenerateDomain(Rect),
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Structured triangulation of a rectangle: `(a+1)^2` vertices in row-major
/// order, `2 a^2` counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct StructuredTriMesh {
    pub domain: Rect,
    /// Subdivisions per side.
    pub a: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Maximal element diameter, `sqrt(dx^2 + dy^2)`.
    pub h: f64,
}

impl StructuredTriMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive for counterclockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        let p = self.vertices[i];
        let q = self.vertices[j];
        let r = self.vertices[k];
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
    }

    /// Gradients of the three P1 barycentric basis functions on triangle `t`.
    pub fn p1_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [i, j, k] = self.triangles[t];
        let p = self.vertices[i];
        let q = self.vertices[j];
        let r = self.vertices[k];
        let two_a = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        // grad lambda_v = perp(edge opposite v) / (2 A), perp((x,y)) = (-y, x).
        [
            [-(r[1] - q[1]) / two_a, (r[0] - q[0]) / two_a],
            [-(p[1] - r[1]) / two_a, (p[0] - r[0]) / two_a],
            [-(q[1] - p[1]) / two_a, (q[0] - p[0]) / two_a],
        ]
    }
}

/// Build the uniform triangulation with `a` subdivisions per side.
pub fn build_uniform(domain: Rect, a: usize) -> Result<StructuredTriMesh, MeshError> {
    if a == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    if !(domain.width() > 0.0) || !(domain.height() > 0.0) {
        return Err(MeshError::DegenerateDomain(domain));
    }
    let n = a + 1;
    let dx = domain.width() / a as f64;
    let dy = domain.height() / a as f64;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push([domain.x0 + i as f64 * dx, domain.y0 + j as f64 * dy]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * a * a);
    for j in 0..a {
        for i in 0..a {
            let v00 = j * n + i;
            let v10 = v00 + 1;
            let v01 = v00 + n;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Ok(StructuredTriMesh {
        domain,
        a,
        vertices,
        triangles,
        h: (dx * dx + dy * dy).sqrt(),
    })
}

/// One piece of a dual-cell boundary: the midpoint-to-barycenter segment of
/// a directed neighbor pair inside one shared triangle.
#[derive(Debug, Clone, Copy)]
pub struct DualSegment {
    pub triangle: usize,
    pub measure: f64,
    /// Unit normal exterior to the dual cell of the edge's source vertex.
    pub normal: [f64; 2],
}

/// Barycentric dual-cell geometry of a triangulation.
#[derive(Debug, Clone)]
pub struct DualGeometry {
    /// `meas(D_i)` per vertex; sums to the domain area.
    pub cell_measure: Vec<f64>,
    /// CSR offsets into `neighbors`.
    pub adj_offsets: Vec<usize>,
    /// Edge-sharing neighbors of each vertex, ascending.
    pub neighbors: Vec<usize>,
    /// CSR offsets into `segments`, one slot per directed edge.
    pub seg_offsets: Vec<usize>,
    /// Dual boundary segments per directed edge (two for interior edges,
    /// one on the boundary).
    pub segments: Vec<DualSegment>,
}

impl DualGeometry {
    pub fn vertex_count(&self) -> usize {
        self.cell_measure.len()
    }

    pub fn directed_edge_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Neighbors `Lambda_i` of vertex `i`.
    pub fn neighbors_of(&self, i: usize) -> &[usize] {
        &self.neighbors[self.adj_offsets[i]..self.adj_offsets[i + 1]]
    }

    /// Directed edge id of `(i, j)`, if `j` is a neighbor of `i`.
    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.adj_offsets[i];
        let hi = self.adj_offsets[i + 1];
        self.neighbors[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|p| lo + p)
    }

    pub fn segments_of(&self, edge: usize) -> &[DualSegment] {
        &self.segments[self.seg_offsets[edge]..self.seg_offsets[edge + 1]]
    }
}

/// Construct the barycentric dual geometry of a mesh.
pub fn dual_geometry(mesh: &StructuredTriMesh) -> DualGeometry {
    let nv = mesh.vertex_count();

    // Adjacency (edge-sharing neighbors), CSR with ascending columns.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for tri in &mesh.triangles {
        for (p, q) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            adj[p].push(q);
            adj[q].push(p);
        }
    }
    let mut adj_offsets = Vec::with_capacity(nv + 1);
    let mut neighbors = Vec::new();
    adj_offsets.push(0);
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
        neighbors.extend_from_slice(list);
        adj_offsets.push(neighbors.len());
    }

    let edge_id = |i: usize, j: usize| -> usize {
        let lo = adj_offsets[i];
        let hi = adj_offsets[i + 1];
        lo + neighbors[lo..hi].binary_search(&j).expect("adjacent pair")
    };

    // Dual cell measures: one third of each incident triangle.
    let mut cell_measure = vec![0.0; nv];
    for t in 0..mesh.triangle_count() {
        let third = mesh.signed_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            cell_measure[v] += third;
        }
    }

    // Dual boundary segments. Count first, then fill.
    let ne = neighbors.len();
    let mut counts = vec![0usize; ne];
    for tri in &mesh.triangles {
        for (p, q) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            counts[edge_id(p, q)] += 1;
            counts[edge_id(q, p)] += 1;
        }
    }
    let mut seg_offsets = Vec::with_capacity(ne + 1);
    seg_offsets.push(0);
    for &c in &counts {
        seg_offsets.push(seg_offsets.last().unwrap() + c);
    }
    let mut fill = seg_offsets.clone();
    let mut segments = vec![
        DualSegment {
            triangle: 0,
            measure: 0.0,
            normal: [0.0, 0.0]
        };
        *seg_offsets.last().unwrap()
    ];

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let bary = {
            let a = mesh.vertices[tri[0]];
            let b = mesh.vertices[tri[1]];
            let c = mesh.vertices[tri[2]];
            [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
        };
        for (p, q) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            let pp = mesh.vertices[p];
            let pq = mesh.vertices[q];
            let mid = [0.5 * (pp[0] + pq[0]), 0.5 * (pp[1] + pq[1])];
            let seg = [bary[0] - mid[0], bary[1] - mid[1]];
            let measure = (seg[0] * seg[0] + seg[1] * seg[1]).sqrt();
            // Normal to the segment, oriented from the p side toward q so it
            // is exterior to D_p; the reverse edge stores the exact negation.
            let mut normal = [seg[1] / measure, -seg[0] / measure];
            if normal[0] * (pq[0] - pp[0]) + normal[1] * (pq[1] - pp[1]) < 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            let e_pq = edge_id(p, q);
            segments[fill[e_pq]] = DualSegment {
                triangle: t,
                measure,
                normal,
            };
            fill[e_pq] += 1;
            let e_qp = edge_id(q, p);
            segments[fill[e_qp]] = DualSegment {
                triangle: t,
                measure,
                normal: [-normal[0], -normal[1]],
            };
            fill[e_qp] += 1;
        }
    }

    DualGeometry {
        cell_measure,
        adj_offsets,
        neighbors,
        seg_offsets,
        segments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = build_uniform(Rect::unit(), 1).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.triangle_count(), 2);
        assert!((m.h - 2.0_f64.sqrt()).abs() < 1e-15);

        let m64 = build_uniform(Rect::unit(), 64).unwrap();
        assert_eq!(m64.vertex_count(), 4225);
        assert_eq!(m64.triangle_count(), 8192);
        assert!((m64.h - 2.0_f64.sqrt() / 64.0).abs() < 1e-15);

        let big = build_uniform(Rect::new(0.0, 0.0, 2.0, 2.0), 100).unwrap();
        assert!((big.h - 2.0_f64.sqrt() / 50.0).abs() < 1e-15);
    }

    #[test]
    fn triangles_are_counterclockwise() {
        let m = build_uniform(Rect::new(-1.0, 2.0, 3.0, 5.0), 7).unwrap();
        for t in 0..m.triangle_count() {
            assert!(m.signed_area(t) > 0.0);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            build_uniform(Rect::unit(), 0),
            Err(MeshError::ZeroSubdivisions)
        ));
        assert!(build_uniform(Rect::new(0.0, 0.0, 0.0, 1.0), 4).is_err());
    }

    #[test]
    fn dual_partitions_domain() {
        for a in [1usize, 2, 8, 32] {
            let m = build_uniform(Rect::unit(), a).unwrap();
            let d = dual_geometry(&m);
            let total: f64 = d.cell_measure.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "a={a}: total={total}");
        }
    }

    #[test]
    fn dual_measures_are_incident_thirds() {
        let m = build_uniform(Rect::unit(), 5).unwrap();
        let d = dual_geometry(&m);
        let mut incident = vec![0.0; m.vertex_count()];
        for t in 0..m.triangle_count() {
            for &v in &m.triangles[t] {
                incident[v] += m.signed_area(t);
            }
        }
        for v in 0..m.vertex_count() {
            assert!((d.cell_measure[v] - incident[v] / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn two_triangle_square_measures() {
        let m = build_uniform(Rect::unit(), 1).unwrap();
        let d = dual_geometry(&m);
        // Diagonal runs (0,0)-(1,1): those two corners collect both
        // triangles (1/3 each), the others one triangle (1/6).
        assert!((d.cell_measure[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.cell_measure[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.cell_measure[2] - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.cell_measure[3] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_right_triangle_dual() {
        // Hand-built single triangle with legs 1.
        let m = StructuredTriMesh {
            domain: Rect::unit(),
            a: 1,
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            h: 2.0_f64.sqrt(),
        };
        let d = dual_geometry(&m);
        for v in 0..3 {
            assert!((d.cell_measure[v] - 1.0 / 6.0).abs() < 1e-15);
        }
        // Segment for edge (0,1): midpoint (0.5, 0) to barycenter (1/3, 1/3).
        let e = d.edge_id(0, 1).unwrap();
        let segs = d.segments_of(e);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].measure - 5.0_f64.sqrt() / 6.0).abs() < 1e-15);
        assert!((segs[0].measure - 0.372678).abs() < 1e-6);
    }

    #[test]
    fn normals_are_unit_and_antisymmetric() {
        let m = build_uniform(Rect::unit(), 4).unwrap();
        let d = dual_geometry(&m);
        for i in 0..m.vertex_count() {
            for &j in d.neighbors_of(i) {
                let e_ij = d.edge_id(i, j).unwrap();
                let e_ji = d.edge_id(j, i).unwrap();
                let si = d.segments_of(e_ij);
                let sj = d.segments_of(e_ji);
                assert_eq!(si.len(), sj.len());
                for (a, b) in si.iter().zip(sj.iter()) {
                    assert_eq!(a.triangle, b.triangle);
                    assert_eq!(a.measure, b.measure);
                    assert_eq!(a.normal[0], -b.normal[0]);
                    assert_eq!(a.normal[1], -b.normal[1]);
                    let norm = (a.normal[0].powi(2) + a.normal[1].powi(2)).sqrt();
                    assert!((norm - 1.0).abs() < 1e-14);
                }
                assert!(si.iter().map(|s| s.measure).all(|x| x > 0.0));
            }
        }
    }

    #[test]
    fn interior_vertices_have_six_neighbors() {
        let a = 6;
        let m = build_uniform(Rect::unit(), a).unwrap();
        let d = dual_geometry(&m);
        let n = a + 1;
        for j in 1..a {
            for i in 1..a {
                assert_eq!(d.neighbors_of(j * n + i).len(), 6);
            }
        }
        // Corners on the split diagonal see 3 neighbors, the others 2.
        assert_eq!(d.neighbors_of(0).len(), 3);
        assert_eq!(d.neighbors_of(n - 1).len(), 2);
    }

    #[test]
    fn p1_gradients_reproduce_linear_fields() {
        let m = build_uniform(Rect::new(0.0, 0.0, 2.0, 1.0), 3).unwrap();
        // For u(x, y) = 3x - 2y + 1 the elementwise gradient is (3, -2).
        let vals: Vec<f64> = m
            .vertices
            .iter()
            .map(|p| 3.0 * p[0] - 2.0 * p[1] + 1.0)
            .collect();
        for t in 0..m.triangle_count() {
            let g = m.p1_gradients(t);
            let [i, j, k] = m.triangles[t];
            let gx = vals[i] * g[0][0] + vals[j] * g[1][0] + vals[k] * g[2][0];
            let gy = vals[i] * g[0][1] + vals[j] * g[1][1] + vals[k] * g[2][1];
            assert!((gx - 3.0).abs() < 1e-12 && (gy + 2.0).abs() < 1e-12);
        }
    }
}
