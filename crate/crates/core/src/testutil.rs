//! Shared helpers for unit tests.

use std::sync::Arc;

pub use crate::harness::gen::{random_matrix, Profile};
use crate::hilbert::{MFunction, MeasureSpace, C64};
use crate::wce::WceOp;

pub fn instance_i1() -> WceOp {
    crate::fixtures::i1().wce()
}

pub fn instance_i2() -> WceOp {
    crate::fixtures::i2().wce()
}

pub fn cvec(space: &Arc<MeasureSpace>, vals: &[(f64, f64)]) -> MFunction {
    MFunction::new(space, vals.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
}

pub fn random_wce(seed: u64, profile: Profile) -> WceOp {
    crate::harness::gen::gen_instance(seed, profile).unwrap().wce()
}

/// Unit `x, y` from the rank-one profile.
pub fn random_pair(seed: u64) -> (MFunction, MFunction) {
    crate::harness::gen::gen_instance(seed, Profile::RankOne)
        .unwrap()
        .rank_one
        .unwrap()
}

pub fn random_function(space: &Arc<MeasureSpace>, seed: u64) -> MFunction {
    let m = random_matrix(seed, space.dim());
    MFunction::new(space, m.column(0).iter().copied().collect()).unwrap()
}

pub fn instance_i1_space() -> (Arc<MeasureSpace>, crate::condexp::Partition) {
    let p = crate::fixtures::four_atom_partition();
    (p.space().clone(), p)
}
