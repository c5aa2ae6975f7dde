//! Sub-sigma-algebras of a finite space as partitions, and conditional
//! expectation as weighted block averaging.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::{LinOperator, MFunction, MeasureSpace, CMatrix, CVector, C64, ZERO};

/// Partition of the atoms into disjoint nonempty blocks.
///
/// Blocks are canonical: each is sorted and blocks are ordered by their
/// least atom, so structural equality is partition equality.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    space: Arc<MeasureSpace>,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    block_measure: Vec<f64>,
}

impl Partition {
    pub fn new(space: &Arc<MeasureSpace>, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n = space.dim();
        let mut owner = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::validation(format!("blocks[{b}]"), "blocks must be nonempty"));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::validation(
                        format!("blocks[{b}]"),
                        format!("atom {i} out of range (space has {n} atoms)"),
                    ));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::validation(
                        format!("blocks[{b}]"),
                        format!("blocks must be disjoint (atom {i} repeated)"),
                    ));
                }
                owner[i] = b;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::validation(
                "blocks",
                format!("blocks must cover every atom (atom {i} missing)"),
            ));
        }
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort_by_key(|b| b[0]);
        Ok(Self::from_canonical(space, blocks))
    }

    fn from_canonical(space: &Arc<MeasureSpace>, blocks: Vec<Vec<usize>>) -> Self {
        let mut block_of = vec![0; space.dim()];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                block_of[i] = b;
            }
        }
        let w = space.weights();
        let block_measure = blocks
            .iter()
            .map(|b| b.iter().map(|&i| w[i]).sum())
            .collect();
        Partition {
            space: Arc::clone(space),
            blocks,
            block_of,
            block_measure,
        }
    }

    /// The trivial sigma-algebra: one block holding every atom.
    pub fn trivial(space: &Arc<MeasureSpace>) -> Self {
        Self::from_canonical(space, vec![(0..space.dim()).collect()])
    }

    /// The full power set: every atom is its own block.
    pub fn discrete(space: &Arc<MeasureSpace>) -> Self {
        Self::from_canonical(space, (0..space.dim()).map(|i| vec![i]).collect())
    }

    /// Builds a partition from a block label per atom.
    pub fn from_labels(space: &Arc<MeasureSpace>, labels: &[usize]) -> Result<Self> {
        if labels.len() != space.dim() {
            return Err(Error::usage("one label per atom is required"));
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        Self::new(space, groups.into_values().collect())
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, atom: usize) -> usize {
        self.block_of[atom]
    }

    pub fn block_measure(&self, b: usize) -> f64 {
        self.block_measure[b]
    }

    /// Block averages of `f`: `(sum_{i in B} mu_i f_i) / mu(B)` for each block.
    pub fn block_averages(&self, f: &MFunction) -> Vec<C64> {
        let w = self.space.weights();
        self.blocks
            .iter()
            .zip(&self.block_measure)
            .map(|(b, m)| b.iter().map(|&i| f.get(i) * w[i]).sum::<C64>() / *m)
            .collect()
    }

    /// Lifts one value per block to an A-measurable function.
    pub fn lift(&self, per_block: &[C64]) -> MFunction {
        let v = CVector::from_iterator(
            self.space.dim(),
            self.block_of.iter().map(|&b| per_block[b]),
        );
        MFunction::from_vector(&self.space, v)
    }

    /// `E f`, computed blockwise without forming the matrix.
    pub fn expect(&self, f: &MFunction) -> MFunction {
        self.lift(&self.block_averages(f))
    }
}

/// Matrix of the conditional expectation onto the A-measurable functions.
pub fn cond_expect(p: &Partition) -> LinOperator {
    let n = p.space.dim();
    let w = p.space.weights();
    let m = CMatrix::from_fn(n, n, |i, j| {
        let b = p.block_of[i];
        if p.block_of[j] == b {
            C64::new(w[j] / p.block_measure[b], 0.0)
        } else {
            ZERO
        }
    });
    LinOperator::from_matrix(&p.space, m)
}

/// True when `f` is constant on every block, within `tol * max|f|`.
pub fn is_measurable(p: &Partition, f: &MFunction, tol: f64) -> bool {
    let scale = f.sup_norm();
    p.blocks.iter().all(|b| {
        let first = f.get(b[0]);
        b.iter().all(|&i| (f.get(i) - first).norm() <= tol * scale)
    })
}

/// True when every block of `q` lies inside a block of `p`, i.e. the
/// sigma-algebra of `p` is contained in that of `q`.
pub fn refines(q: &Partition, p: &Partition) -> Result<bool> {
    if q.space.weights() != p.space.weights() {
        return Err(Error::usage("partitions live on different spaces"));
    }
    Ok(q
        .blocks
        .iter()
        .all(|b| b.iter().all(|&i| p.block_of[i] == p.block_of[b[0]])))
}

/// Checks `E^A M_u E^B = E^B E^A M_u` for nested `A ⊆ B` and A-measurable `u`.
pub fn tower_check(a: &Partition, b: &Partition, u: &MFunction, tol: f64) -> Result<bool> {
    if !refines(b, a)? {
        return Err(Error::usage("the second partition must refine the first"));
    }
    if !is_measurable(a, u, 1e-10) {
        return Err(Error::usage("u must be measurable for the coarser partition"));
    }
    let ea = cond_expect(a);
    let eb = cond_expect(b);
    let mu = LinOperator::multiplication(u);
    let lhs = &(&ea * &mu) * &eb;
    let rhs = &eb * &(&ea * &mu);
    Ok(lhs.max_abs_diff(&rhs) <= tol)
}
