//! Assembly of the partitioned susceptance matrix and solves against its
//! load-side block.
//!
//! Ordering machine internal nodes before load buses, the augmented network
//! matrix is the weighted graph Laplacian
//!
//! ```text
//!         ┌ B_GG  B_GB ┐   n machine rows
//!     B = │            │
//!         └ B_BG  B_BB ┘   m load-bus rows
//! ```
//!
//! `B_GG` is diagonal (each machine touches the network through one internal
//! branch), `B_GB` (with `B_BG` its exact transpose) couples machines to
//! their terminals, and `B_BB`
//! carries the line Laplacian plus internal-branch contributions on its
//! diagonal. Because every row of the full Laplacian sums to zero while
//! `B_BB`'s diagonal also absorbs machine branches, `B_BB` is an irreducibly
//! diagonally dominant M-matrix for any connected grid — hence invertible,
//! which [`certify_invertible`] checks numerically rather than assumes.
//!
//! All power-flow style computations downstream reduce to solves against
//! `B_BB`; [`SusceptanceBlocks::solve_bbb`] factors it once (LU with partial
//! pivoting on a diagonally equilibrated copy) and reuses the factorization.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{validate_grid, BusId, GridModel, ValidationReport};
use crate::tol;

/// Partitioned susceptance blocks plus the id ↔ index maps that fix row and
/// column meaning. Machine rows follow `grid.generators` order; load-bus rows
/// follow `grid.load_buses` order.
#[derive(Debug)]
pub struct SusceptanceBlocks {
    b_gg: DMatrix<f64>,
    b_gb: DMatrix<f64>,
    b_bg: DMatrix<f64>,
    b_bb: DMatrix<f64>,
    gen_ids: Vec<BusId>,
    load_ids: Vec<BusId>,
    gen_index: HashMap<BusId, usize>,
    load_index: HashMap<BusId, usize>,
    factor: OnceLock<Result<EquilibratedLu, SusceptanceError>>,
}

/// LU factorization of `D^{-1/2} B_BB D^{-1/2}` together with the scaling
/// that maps solutions back to the original variables.
#[derive(Debug)]
struct EquilibratedLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    d_inv_sqrt: DVector<f64>,
    rcond: f64,
}

/// Proof that the load-side block was safely invertible when factored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertibilityCertificate {
    /// Reciprocal 1-norm condition estimate of the equilibrated block.
    pub rcond: f64,
    /// Number of load buses (rows of `B_BB`).
    pub dimension: usize,
}

#[derive(Debug, Clone, Error)]
pub enum SusceptanceError {
    /// The grid failed validation; assembly refuses to build blocks whose
    /// meaning would be ambiguous. The report lists every problem.
    #[error("grid failed validation:\n{}", .0.render())]
    InvalidGrid(ValidationReport),
    /// A load bus contributes nothing to the diagonal — it is electrically
    /// floating, and the block cannot be equilibrated or inverted.
    #[error("load bus {bus} has zero susceptance to the rest of the network")]
    ZeroDiagonal { bus: BusId },
    /// The equilibrated block is numerically singular or too close to it.
    #[error(
        "load-side susceptance block is numerically singular \
         (rcond {rcond:.3e} < {min:.3e})",
        min = tol::RCOND_MIN
    )]
    NearSingular { rcond: f64 },
    /// A solve against the factored block left a residual large enough to
    /// distrust the factorization.
    #[error(
        "solve against load-side block left relative residual {residual:.3e} \
         (limit {limit:.3e})",
        limit = tol::SOLVE_RESIDUAL_REL
    )]
    SolveResidual { residual: f64 },
}

/// Builds the partitioned susceptance blocks for a validated grid.
///
/// Fails with the full [`ValidationReport`] if the grid has any
/// error-severity issue; warnings (such as a zero-inertia machine) do not
/// block assembly because the matrices do not involve inertia.
pub fn assemble_blocks(grid: &GridModel) -> Result<SusceptanceBlocks, SusceptanceError> {
    let report = validate_grid(grid);
    if !report.ok() {
        return Err(SusceptanceError::InvalidGrid(report));
    }
    Ok(blocks_from_grid(grid))
}

/// Raw assembly without validation. Kept separate so tests can build blocks
/// for deliberately broken topologies and watch the certificate fail.
pub(crate) fn blocks_from_grid(grid: &GridModel) -> SusceptanceBlocks {
    let n = grid.generators.len();
    let m = grid.load_buses.len();
    let load_index: HashMap<BusId, usize> = grid
        .load_buses
        .iter()
        .enumerate()
        .map(|(j, b)| (b.clone(), j))
        .collect();
    let gen_index: HashMap<BusId, usize> = grid
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id.clone(), i))
        .collect();

    let mut b_gg = DMatrix::zeros(n, n);
    let mut b_gb = DMatrix::zeros(n, m);
    let mut b_bb = DMatrix::zeros(m, m);

    for (i, gen) in grid.generators.iter().enumerate() {
        let j = load_index[&gen.terminal];
        let b = gen.b_internal_pu;
        b_gg[(i, i)] = b;
        b_gb[(i, j)] = -b;
        b_bb[(j, j)] += b;
    }
    for line in &grid.lines {
        let j = load_index[&line.from];
        let k = load_index[&line.to];
        let b = line.b_pu;
        b_bb[(j, j)] += b;
        b_bb[(k, k)] += b;
        b_bb[(j, k)] -= b;
        b_bb[(k, j)] -= b;
    }

    let b_bg = b_gb.transpose();
    SusceptanceBlocks {
        b_gg,
        b_gb,
        b_bg,
        b_bb,
        gen_ids: grid.generators.iter().map(|g| g.id.clone()).collect(),
        load_ids: grid.load_buses.clone(),
        gen_index,
        load_index,
        factor: OnceLock::new(),
    }
}

/// Certifies that the load-side block can be inverted safely.
///
/// The block is diagonally equilibrated to `D^{-1/2} B_BB D^{-1/2}` (unit
/// diagonal) before estimating its reciprocal 1-norm condition number, so
/// the verdict does not depend on the absolute susceptance scale. Fails if
/// any diagonal entry is non-positive or the estimate falls below
/// [`tol::RCOND_MIN`].
pub fn certify_invertible(
    blocks: &SusceptanceBlocks,
) -> Result<InvertibilityCertificate, SusceptanceError> {
    let factor = blocks.factor()?;
    Ok(InvertibilityCertificate {
        rcond: factor.rcond,
        dimension: blocks.load_ids.len(),
    })
}

impl SusceptanceBlocks {
    pub fn b_gg(&self) -> &DMatrix<f64> {
        &self.b_gg
    }

    pub fn b_gb(&self) -> &DMatrix<f64> {
        &self.b_gb
    }

    pub fn b_bg(&self) -> &DMatrix<f64> {
        &self.b_bg
    }

    pub fn b_bb(&self) -> &DMatrix<f64> {
        &self.b_bb
    }

    /// Machine ids in row order of `B_GG` / `B_GB`.
    pub fn gen_ids(&self) -> &[BusId] {
        &self.gen_ids
    }

    /// Load-bus ids in row order of `B_BG` / `B_BB`.
    pub fn load_ids(&self) -> &[BusId] {
        &self.load_ids
    }

    pub fn gen_index(&self, id: &BusId) -> Option<usize> {
        self.gen_index.get(id).copied()
    }

    pub fn load_index(&self, id: &BusId) -> Option<usize> {
        self.load_index.get(id).copied()
    }

    /// The full `(n + m) × (n + m)` augmented matrix, machines first.
    ///
    /// Every row and column sums to zero: the matrix is the Laplacian of the
    /// network graph, which is what makes the load-side block an M-matrix.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let n = self.gen_ids.len();
        let m = self.load_ids.len();
        let mut full = DMatrix::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n)).copy_from(&self.b_gg);
        full.view_mut((0, n), (n, m)).copy_from(&self.b_gb);
        full.view_mut((n, 0), (m, n)).copy_from(&self.b_bg);
        full.view_mut((n, n), (m, m)).copy_from(&self.b_bb);
        full
    }

    /// Solves `B_BB x = rhs` through the cached equilibrated factorization
    /// and verifies the residual before returning.
    pub fn solve_bbb(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, SusceptanceError> {
        assert_eq!(rhs.len(), self.load_ids.len(), "rhs must match load count");
        let factor = self.factor()?;
        let scaled_rhs = rhs.component_mul(&factor.d_inv_sqrt);
        let scaled_x = factor
            .lu
            .solve(&scaled_rhs)
            .ok_or(SusceptanceError::NearSingular { rcond: 0.0 })?;
        let x = scaled_x.component_mul(&factor.d_inv_sqrt);

        let residual = (&self.b_bb * &x - rhs).amax();
        let scale = rhs.amax().max(f64::MIN_POSITIVE);
        if residual > tol::SOLVE_RESIDUAL_REL * scale {
            return Err(SusceptanceError::SolveResidual {
                residual: residual / scale,
            });
        }
        Ok(x)
    }

    fn factor(&self) -> Result<&EquilibratedLu, SusceptanceError> {
        self.factor
            .get_or_init(|| self.build_factor())
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn build_factor(&self) -> Result<EquilibratedLu, SusceptanceError> {
        let m = self.load_ids.len();
        let mut d_inv_sqrt = DVector::zeros(m);
        for j in 0..m {
            let d = self.b_bb[(j, j)];
            if d <= 0.0 || !d.is_finite() {
                return Err(SusceptanceError::ZeroDiagonal {
                    bus: self.load_ids[j].clone(),
                });
            }
            d_inv_sqrt[j] = 1.0 / d.sqrt();
        }

        let mut equilibrated = self.b_bb.clone();
        for j in 0..m {
            for k in 0..m {
                equilibrated[(j, k)] *= d_inv_sqrt[j] * d_inv_sqrt[k];
            }
        }

        let norm = one_norm(&equilibrated);
        let lu = equilibrated.lu();
        let rcond = match lu.try_inverse() {
            Some(inverse) => {
                let inv_norm = one_norm(&inverse);
                if norm * inv_norm == 0.0 {
                    0.0
                } else {
                    1.0 / (norm * inv_norm)
                }
            }
            None => 0.0,
        };
        if !rcond.is_finite() || rcond < tol::RCOND_MIN {
            return Err(SusceptanceError::NearSingular { rcond });
        }
        Ok(EquilibratedLu {
            lu,
            d_inv_sqrt,
            rcond,
        })
    }
}

/// Maximum absolute column sum.
fn one_norm(matrix: &DMatrix<f64>) -> f64 {
    (0..matrix.ncols())
        .map(|k| matrix.column(k).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
