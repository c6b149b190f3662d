//! Relaxed normalized-cut and ratio-cut losses on soft memberships.
//!
//! With memberships `Y` (`m × k`) and a per-cluster scale `Λ̃`, set
//! `B = Y Λ̃⁻¹`. The loss is `trace(Bᵀ L B) + (γ/2) ‖Bᵀ W B − I‖²_F` where
//! `W = D` for the normalized cut and `W = I` for the ratio cut. `Λ̃` holds
//! square roots of soft volumes (Ncut) or soft sizes (Rcut); it is
//! re-estimated from the current `Y` before each step and treated as a
//! constant when differentiating.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::AffinityGraph;
use crate::matrix::Matrix;

/// Relative floor for estimated cluster masses: `1e-8 · Σ_i D_ii` for
/// volumes, `1e-8 · m` for sizes.
pub const MASS_FLOOR: f64 = 1e-8;

/// Soft per-cluster mass and the diagonal of `Λ̃⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMass {
    /// Floored soft volumes (or sizes).
    pub masses: Vec<f64>,
    /// `masses^{-1/2}`.
    pub lambda_inv_diag: Vec<f64>,
    pub floor: f64,
}

/// Soft volumes `Σ_i y_iℓ D_ii`, used by the normalized cut.
pub type VolumeEstimate = ClusterMass;
/// Soft sizes `Σ_i y_iℓ`, used by the ratio cut.
pub type SizeEstimate = ClusterMass;

impl ClusterMass {
    fn from_weights(y: &Matrix, weights: Option<&[f64]>) -> Self {
        let k = y.cols();
        let mut masses = alloc::vec![0.0; k];
        let mut total = 0.0;
        for i in 0..y.rows() {
            let w = weights.map_or(1.0, |d| d[i]);
            total += w;
            for (m, yv) in masses.iter_mut().zip(y.row(i)) {
                *m += yv * w;
            }
        }
        let floor = MASS_FLOOR * total;
        for m in &mut masses {
            *m = m.max(floor);
        }
        let lambda_inv_diag = masses.iter().map(|&v| 1.0 / libm::sqrt(v)).collect();
        Self { masses, lambda_inv_diag, floor }
    }
}

/// `vol[ℓ] = Σ_i Y[i,ℓ] · degrees[i]`, floored at `1e-8 · Σ degrees`.
pub fn estimate_volumes(y: &Matrix, degrees: &[f64]) -> Result<VolumeEstimate> {
    if degrees.len() != y.rows() {
        return Err(Error::InvalidInput(format!(
            "{} degrees for {} membership rows",
            degrees.len(),
            y.rows()
        )));
    }
    Ok(ClusterMass::from_weights(y, Some(degrees)))
}

/// `size[ℓ] = Σ_i Y[i,ℓ]`, floored at `1e-8 · m`.
pub fn estimate_sizes(y: &Matrix) -> SizeEstimate {
    ClusterMass::from_weights(y, None)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    /// `trace(Bᵀ L B)`.
    pub lap: f64,
    /// `‖Bᵀ W B − I‖²_F`.
    pub orth: f64,
    /// `lap + (γ/2)·orth`.
    pub total: f64,
    pub gamma: f64,
}

/// Which cut the loss relaxes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Cut {
    #[default]
    Normalized,
    Ratio,
}

impl Cut {
    /// Estimates `Λ̃` for this cut from the current memberships.
    pub fn estimate(self, y: &Matrix, graph: &AffinityGraph) -> Result<ClusterMass> {
        match self {
            Cut::Normalized => estimate_volumes(y, graph.degrees()),
            Cut::Ratio => {
                check_shapes(y, graph)?;
                Ok(estimate_sizes(y))
            }
        }
    }

    /// Loss and `∂total/∂Y` with `Λ̃` held fixed.
    pub fn loss_and_grad(
        self,
        y: &Matrix,
        graph: &AffinityGraph,
        mass: &ClusterMass,
        gamma: f64,
    ) -> Result<(LossBreakdown, Matrix)> {
        evaluate(self, y, graph, mass, gamma, true).map(|(l, g)| (l, g.expect("gradient requested")))
    }

    pub fn loss(self, y: &Matrix, graph: &AffinityGraph, mass: &ClusterMass, gamma: f64) -> Result<LossBreakdown> {
        evaluate(self, y, graph, mass, gamma, false).map(|(l, _)| l)
    }
}

fn check_shapes(y: &Matrix, graph: &AffinityGraph) -> Result<()> {
    if y.rows() != graph.size() {
        return Err(Error::InvalidInput(format!(
            "memberships have {} rows, graph has {} vertices",
            y.rows(),
            graph.size()
        )));
    }
    Ok(())
}

fn evaluate(
    cut: Cut,
    y: &Matrix,
    graph: &AffinityGraph,
    mass: &ClusterMass,
    gamma: f64,
    with_grad: bool,
) -> Result<(LossBreakdown, Option<Matrix>)> {
    check_shapes(y, graph)?;
    let k = y.cols();
    if mass.lambda_inv_diag.len() != k {
        return Err(Error::InvalidInput(format!(
            "mass estimate has {} clusters, memberships have {k}",
            mass.lambda_inv_diag.len()
        )));
    }
    let degrees = graph.degrees();
    let b = y.scale_columns(&mass.lambda_inv_diag);
    // L B = D B − A B
    let ab = graph.affinity_times(&b);
    let mut lb = b.scale_rows(degrees);
    lb.add_scaled(&ab, -1.0);
    let lap = b.t_matmul(&lb).trace();

    let wb = match cut {
        Cut::Normalized => b.scale_rows(degrees),
        Cut::Ratio => b.clone(),
    };
    let mut gram = b.t_matmul(&wb);
    for l in 0..k {
        gram[(l, l)] -= 1.0;
    }
    let orth = gram.frobenius_norm_sq();
    let total = lap + 0.5 * gamma * orth;
    if !total.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss (lap = {lap}, orth = {orth})")));
    }
    let breakdown = LossBreakdown { lap, orth, total, gamma };
    if !with_grad {
        return Ok((breakdown, None));
    }
    // ∂/∂B = 2 L B + 2γ W B (BᵀWB − I), then scale column ℓ by λ⁻¹_ℓ
    let mut grad_b = lb;
    for v in grad_b.as_mut_slice() {
        *v *= 2.0;
    }
    grad_b.add_scaled(&wb.matmul(&gram), 2.0 * gamma);
    let grad = grad_b.scale_columns(&mass.lambda_inv_diag);
    if !grad.is_finite() {
        return Err(Error::Numerical("non-finite loss gradient".into()));
    }
    Ok((breakdown, Some(grad)))
}

pub fn neuncut_loss(y: &Matrix, graph: &AffinityGraph, vol: &VolumeEstimate, gamma: f64) -> Result<LossBreakdown> {
    Cut::Normalized.loss(y, graph, vol, gamma)
}

pub fn neuncut_loss_grad(y: &Matrix, graph: &AffinityGraph, vol: &VolumeEstimate, gamma: f64) -> Result<Matrix> {
    Ok(Cut::Normalized.loss_and_grad(y, graph, vol, gamma)?.1)
}

pub fn neurcut_loss(y: &Matrix, graph: &AffinityGraph, sizes: &SizeEstimate, gamma: f64) -> Result<LossBreakdown> {
    Cut::Ratio.loss(y, graph, sizes, gamma)
}

pub fn neurcut_loss_grad(y: &Matrix, graph: &AffinityGraph, sizes: &SizeEstimate, gamma: f64) -> Result<Matrix> {
    Ok(Cut::Ratio.loss_and_grad(y, graph, sizes, gamma)?.1)
}

/// `(Y Λ̃⁻¹)ᵀ D (Y Λ̃⁻¹)`, the matrix the orthogonality penalty compares to
/// the identity.
pub fn normalized_gram(y: &Matrix, degrees: &[f64], vol: &VolumeEstimate) -> Matrix {
    let b = y.scale_columns(&vol.lambda_inv_diag);
    b.t_matmul(&b.scale_rows(degrees))
}
