//! P1 finite-element assembly: lumped and consistent mass, stiffness, the
//! discrete Green operator, and the upwind drift form.
//!
//! The drift term is the upwind trilinear form
//!
//! ```text
//! b_h(u, v, w) = sum_i w_i sum_{j in Lambda_i} (v_i beta+_ij(u) - v_j beta-_ij(u)),
//! beta+-_ij(u) = sum_K meas((dD_i n dD_j)|_K) [grad(G_h u)|_K . nu_ij|_K]_+-,
//! ```
//!
//! where `G_h` solves the discrete Helmholtz problem
//! `(grad v, grad w) + alpha (v, w) = (f, w)` with natural boundary
//! conditions. Because `[s]_- = [-s]_+` and the dual normals flip sign
//! exactly between `(i,j)` and `(j,i)`, the coefficients satisfy
//! `beta-_ij = beta+_ji` bit for bit, which is what makes the assembled
//! drift matrix have exactly zero column sums (discrete mass conservation)
//! and the sign structure of an M-matrix contribution.

use crate::mesh::{DualGeometry, StructuredTriMesh};
use crate::solver::{cg_solve, SolveError, SolveStats};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("alpha must be positive for the Green operator, got {0}")]
    NonpositiveAlpha(f64),
    #[error("field has {got} values but the mesh has {expected} vertices")]
    FieldSize { got: usize, expected: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Nodal coefficient vector of a P1 finite-element function.
#[derive(Debug, Clone, PartialEq)]
pub struct FemField {
    pub values: Vec<f64>,
}

impl FemField {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn linf_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl From<Vec<f64>> for FemField {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// Diagonal of the lumped mass operator: `diag(i) = meas(D_i)`.
#[derive(Debug, Clone)]
pub struct LumpedMass {
    pub diag: Vec<f64>,
}

impl LumpedMass {
    /// Mass-lumped inner product `(v, w)_h = sum_i meas(D_i) v_i w_i`.
    pub fn inner(&self, v: &FemField, w: &FemField) -> f64 {
        self.diag
            .iter()
            .zip(v.values.iter().zip(&w.values))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }
}

/// Lumped mass from the barycentric dual cells.
pub fn lumped_mass(dual: &DualGeometry) -> LumpedMass {
    LumpedMass {
        diag: dual.cell_measure.clone(),
    }
}

/// Compressed-row sparse matrix. All operators assembled here share the
/// vertex-adjacency-plus-diagonal pattern, so linear combinations can act on
/// the value arrays directly.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    /// Build from (row, col, value) triplets, summing duplicates; columns
    /// sorted ascending within each row.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(p) => self.values[lo + p],
            Err(_) => 0.0,
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                sums[self.col_idx[k]] += self.values[k];
            }
        }
        sums
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// `sum_k coeff_k * op_k` for operators sharing one sparsity pattern,
    /// plus an optional diagonal term.
    pub fn combine(terms: &[(f64, &SparseOperator)], diagonal: Option<&[f64]>) -> SparseOperator {
        let first = terms.first().expect("at least one term").1;
        let mut out = first.clone();
        for v in out.values.iter_mut() {
            *v *= terms[0].0;
        }
        for &(c, op) in &terms[1..] {
            assert!(
                out.same_pattern(op),
                "operators must share a sparsity pattern"
            );
            for (dst, src) in out.values.iter_mut().zip(&op.values) {
                *dst += c * src;
            }
        }
        if let Some(d) = diagonal {
            for i in 0..out.n {
                let lo = out.row_ptr[i];
                let hi = out.row_ptr[i + 1];
                let p = out.col_idx[lo..hi]
                    .binary_search(&i)
                    .expect("diagonal entry present");
                out.values[lo + p] += d[i];
            }
        }
        out
    }

    /// Dense copy, for small-system oracle comparisons.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dense[i][self.col_idx[k]] = self.values[k];
            }
        }
        dense
    }

    /// Coordinate-format text dump (`row col value` per line) for debugging.
    pub fn to_coo_string(&self) -> String {
        use std::fmt::Write as _;
        let mut s = format!("{} {} {}\n", self.n, self.n, self.values.len());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(s, "{} {} {}", i, self.col_idx[k], self.values[k]).unwrap();
            }
        }
        s
    }
}

/// P1 stiffness matrix `(grad phi_j, grad phi_i)`; symmetric positive
/// semidefinite with the constants in its kernel (pure Neumann).
pub fn stiffness(mesh: &StructuredTriMesh) -> SparseOperator {
    let mut triplets = Vec::with_capacity(9 * mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let area = mesh.signed_area(t);
        let grads = mesh.p1_gradients(t);
        let idx = mesh.triangles[t];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let v = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                triplets.push((i, j, v));
            }
        }
    }
    SparseOperator::from_triplets(mesh.vertex_count(), &triplets)
}

/// Consistent P1 mass matrix `(phi_j, phi_i)`: element blocks
/// `area/12 * (1 + delta_ij)`.
pub fn consistent_mass(mesh: &StructuredTriMesh) -> SparseOperator {
    let mut triplets = Vec::with_capacity(9 * mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let area = mesh.signed_area(t);
        let idx = mesh.triangles[t];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let v = if a == b { area / 6.0 } else { area / 12.0 };
                triplets.push((i, j, v));
            }
        }
    }
    SparseOperator::from_triplets(mesh.vertex_count(), &triplets)
}

/// Which mass discretization multiplies the zeroth-order term of the Green
/// system. The right-hand side inner product always uses the consistent
/// mass (the true L2 product of the defining variational problem).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassKind {
    Consistent,
    Lumped,
}

/// Discrete Green operator `G_h`: solves
/// `(grad v, grad w) + alpha (v, w) = (f, w)` for `v = G_h f`.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    system: SparseOperator,
    rhs_mass: SparseOperator,
    pub alpha: f64,
    pub tol: f64,
}

impl GreenOperator {
    pub fn new(
        mesh: &StructuredTriMesh,
        dual: &DualGeometry,
        mass_kind: MassKind,
        alpha: f64,
        tol: f64,
    ) -> Result<Self, AssemblyError> {
        if !(alpha > 0.0) {
            return Err(AssemblyError::NonpositiveAlpha(alpha));
        }
        let stiff = stiffness(mesh);
        let mass = consistent_mass(mesh);
        let system = match mass_kind {
            MassKind::Consistent => SparseOperator::combine(&[(1.0, &stiff), (alpha, &mass)], None),
            MassKind::Lumped => {
                let scaled: Vec<f64> = dual.cell_measure.iter().map(|m| alpha * m).collect();
                SparseOperator::combine(&[(1.0, &stiff)], Some(&scaled))
            }
        };
        Ok(Self {
            system,
            rhs_mass: mass,
            alpha,
            tol,
        })
    }

    /// Apply `G_h` to a nodal field.
    pub fn apply(&self, f: &FemField) -> Result<(FemField, SolveStats), AssemblyError> {
        if f.len() != self.system.n {
            return Err(AssemblyError::FieldSize {
                got: f.len(),
                expected: self.system.n,
            });
        }
        let rhs = self.rhs_mass.matvec_alloc(&f.values);
        let (v, stats) = cg_solve(&self.system, &rhs, self.tol)?;
        Ok((FemField::from(v), stats))
    }
}

/// One-shot Green solve (see [`GreenOperator`] for the reusable form).
pub fn green_operator(
    mesh: &StructuredTriMesh,
    dual: &DualGeometry,
    mass_kind: MassKind,
    alpha: f64,
    f: &FemField,
) -> Result<FemField, AssemblyError> {
    let op = GreenOperator::new(mesh, dual, mass_kind, alpha, 1e-12)?;
    Ok(op.apply(f)?.0)
}

/// Upwind flux coefficients `beta+-_ij(u)` indexed by directed edge id
/// (the position of `j` in the adjacency row of `i`).
#[derive(Debug, Clone)]
pub struct UpwindCoefficients {
    pub beta_plus: Vec<f64>,
    pub beta_minus: Vec<f64>,
}

/// Compute the upwind coefficients for drift argument `u`: solves
/// `v = G_h u`, takes the per-triangle constant gradient of `v`, and splits
/// the flux through each dual segment into its positive and negative parts.
/// Returns the coefficients together with the Green solve statistics.
pub fn upwind_coeffs(
    mesh: &StructuredTriMesh,
    dual: &DualGeometry,
    green: &GreenOperator,
    u: &FemField,
) -> Result<(UpwindCoefficients, SolveStats), AssemblyError> {
    let (v, stats) = green.apply(u)?;
    let mut tri_grad = vec![[0.0_f64; 2]; mesh.triangle_count()];
    for t in 0..mesh.triangle_count() {
        let grads = mesh.p1_gradients(t);
        let [i, j, k] = mesh.triangles[t];
        let (vi, vj, vk) = (v.values[i], v.values[j], v.values[k]);
        tri_grad[t] = [
            vi * grads[0][0] + vj * grads[1][0] + vk * grads[2][0],
            vi * grads[0][1] + vj * grads[1][1] + vk * grads[2][1],
        ];
    }
    let ne = dual.directed_edge_count();
    let mut beta_plus = vec![0.0; ne];
    let mut beta_minus = vec![0.0; ne];
    for e in 0..ne {
        let (mut bp, mut bm) = (0.0, 0.0);
        for seg in dual.segments_of(e) {
            let g = tri_grad[seg.triangle];
            let flux = g[0] * seg.normal[0] + g[1] * seg.normal[1];
            bp += seg.measure * flux.max(0.0);
            bm += seg.measure * (-flux).max(0.0);
        }
        beta_plus[e] = bp;
        beta_minus[e] = bm;
    }
    Ok((
        UpwindCoefficients {
            beta_plus,
            beta_minus,
        },
        stats,
    ))
}

/// Apply the upwind form in its vector shape:
/// `r_i = sum_{j in Lambda_i} (v_i beta+_ij - v_j beta-_ij)`, so that
/// `b_h(u, v, w) = sum_i w_i r_i`.
pub fn apply_bh(
    dual: &DualGeometry,
    coeffs: &UpwindCoefficients,
    v: &FemField,
) -> Result<Vec<f64>, AssemblyError> {
    let n = dual.vertex_count();
    if v.len() != n {
        return Err(AssemblyError::FieldSize {
            got: v.len(),
            expected: n,
        });
    }
    let mut r = vec![0.0; n];
    for i in 0..n {
        let lo = dual.adj_offsets[i];
        let hi = dual.adj_offsets[i + 1];
        let mut acc = 0.0;
        for e in lo..hi {
            let j = dual.neighbors[e];
            acc += v.values[i] * coeffs.beta_plus[e] - v.values[j] * coeffs.beta_minus[e];
        }
        r[i] = acc;
    }
    Ok(r)
}

/// Matrix form of the upwind term: `B_ii = sum_j beta+_ij`,
/// `B_ij = -beta-_ij`. Nonnegative diagonal, nonpositive off-diagonal,
/// column sums exactly zero.
pub fn assemble_drift_matrix(dual: &DualGeometry, coeffs: &UpwindCoefficients) -> SparseOperator {
    let n = dual.vertex_count();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let lo = dual.adj_offsets[i];
        let hi = dual.adj_offsets[i + 1];
        let diag: f64 = coeffs.beta_plus[lo..hi].iter().sum();
        let mut placed_diag = false;
        for e in lo..hi {
            let j = dual.neighbors[e];
            if !placed_diag && j > i {
                col_idx.push(i);
                values.push(diag);
                placed_diag = true;
            }
            col_idx.push(j);
            values.push(-coeffs.beta_minus[e]);
        }
        if !placed_diag {
            col_idx.push(i);
            values.push(diag);
        }
        row_ptr.push(col_idx.len());
    }
    SparseOperator {
        n,
        row_ptr,
        col_idx,
        values,
    }
}
