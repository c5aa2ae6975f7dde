//! Small reference instances.
//!
//! Both live on four atoms of measure 1/4 with blocks `{0, 1}` and `{2, 3}`.
//! `i1` has `u = (1, 2, 1, 1)`, `w = (2, 0, 1, 1)`, so `E(uw) = 1` and
//! `r(T) = 1`; `i2` has `u = (1, -1, 1, 1)`, `w = (1, 1, 0, 0)`, so
//! `E(uw) = 0` and `T^2 = 0`.

use crate::condexp::Partition;
use crate::harness::instance::Instance;
use crate::hilbert::{MFunction, MeasureSpace};

pub fn four_atom_partition() -> Partition {
    let space = MeasureSpace::uniform(4);
    Partition::new(&space, vec![vec![0, 1], vec![2, 3]]).expect("valid blocks")
}

fn build(u: &[f64], w: &[f64]) -> Instance {
    let p = four_atom_partition();
    let space = p.space().clone();
    Instance::new(
        p,
        MFunction::from_real(&space, u).expect("four values"),
        MFunction::from_real(&space, w).expect("four values"),
    )
}

pub fn i1() -> Instance {
    build(&[1.0, 2.0, 1.0, 1.0], &[2.0, 0.0, 1.0, 1.0])
}

pub fn i2() -> Instance {
    build(&[1.0, -1.0, 1.0, 1.0], &[1.0, 1.0, 0.0, 0.0])
}
