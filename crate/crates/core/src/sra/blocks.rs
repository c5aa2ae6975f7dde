//! Splitting `L^2 = H_1 ⊕ H_2` with `H_2 = N(E M_u)`.

use crate::error::Result;
use crate::hilbert::{kernel_with, project, LinOperator, MFunction, Subspace, C64};
use crate::settings::Tolerances;
use crate::wce::{support, WceOp};

#[derive(Debug, Clone)]
pub struct BlockDecomp {
    /// `span{conj(u) chi_B}` over blocks where `u` is not identically zero.
    pub h1: Subspace,
    /// `N(E M_u) = {f : E(uf) = 0}`.
    pub h2: Subspace,
    pub p1: LinOperator,
    pub p2: LinOperator,
    /// Partition block of each `H_1` basis vector, in basis order.
    pub h1_blocks: Vec<usize>,
    /// Largest principal-angle sine between the kernel route and the
    /// constraint route to `H_2`.
    pub route_sine: f64,
    /// Part of `H_1` on which `q_m -> inf`: `conj(u) chi_B` for live peak
    /// blocks with `E(|w|^2) > 0`.
    pub divergent: Subspace,
    /// Projection onto `divergent`.
    pub p_div: LinOperator,
    /// Projection onto the orthocomplement of `divergent`, where `R_m` stays
    /// bounded with a bounded inverse.
    pub p_rest: LinOperator,
}

pub fn block_decompose(t: &WceOp, tol: &Tolerances) -> Result<BlockDecomp> {
    let space = t.space();
    let part = t.partition();
    let live = support(t.e_u2(), tol.supp);
    let ubar = t.u().conj();

    let w_live = support(t.e_w2(), tol.supp);
    let mut peak = vec![false; space.dim()];
    for i in t.peak_atoms(tol.peak) {
        peak[i] = true;
    }

    let mut h1_vectors = Vec::new();
    let mut div_vectors = Vec::new();
    let mut h1_blocks = Vec::new();
    for (b, block) in part.blocks().iter().enumerate() {
        let a = block[0];
        if !live[a] {
            continue;
        }
        let v = ubar.mul(&MFunction::indicator(space, block));
        let norm = v.norm();
        let v = v.scale(C64::new(1.0 / norm, 0.0));
        if peak[a] && w_live[a] {
            div_vectors.push(v.clone());
        }
        h1_vectors.push(v);
        h1_blocks.push(b);
    }
    let divergent = Subspace::from_orthonormal(space, &div_vectors, 1e-12)?;
    let p_div = project(&divergent);
    // Disjoint supports make these orthonormal already.
    let h1 = Subspace::from_orthonormal(space, &h1_vectors, 1e-12)?;
    // One linear constraint sum_{i in B} mu_i u_i f_i = 0 per live block:
    // H_2 is the orthocomplement of the constraint vectors.
    let h2 = h1.complement();

    let via_kernel = kernel_with(&t.e_mu(), tol.rank);
    let route_sine = if via_kernel.dim() == h2.dim() {
        via_kernel.max_sine_to(&h2).max(h2.max_sine_to(&via_kernel))
    } else {
        1.0
    };

    Ok(BlockDecomp {
        p_rest: &LinOperator::identity(space) - &p_div,
        p_div,
        divergent,
        p1: project(&h1),
        p2: project(&h2),
        h1,
        h2,
        h1_blocks,
        route_sine,
    })
}

impl BlockDecomp {
    pub fn n(&self) -> usize {
        self.h1.dim() + self.h2.dim()
    }

    /// The four blocks `(X, Y, Z, W)` of `S` as operators on the whole space:
    /// `X = P1 S P1`, `Y = P1 S P2`, `Z = P2 S P1`, `W = P2 S P2`.
    pub fn blocks_of(&self, s: &LinOperator) -> [LinOperator; 4] {
        let (p1, p2) = (&self.p1, &self.p2);
        [
            &(p1 * s) * p1,
            &(p1 * s) * p2,
            &(p2 * s) * p1,
            &(p2 * s) * p2,
        ]
    }
}
