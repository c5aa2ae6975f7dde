//! Seeded random instances and test-operator batches.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::condexp::Partition;
use crate::error::{Error, Result};
use crate::harness::instance::Instance;
use crate::hilbert::{op_norm, CMatrix, LinOperator, MFunction, MeasureSpace, C64, ZERO};
use crate::sra::BlockDecomp;

pub const MAX_ATOMS: usize = 10;
pub const MAX_BLOCKS: usize = 4;
/// Upper bound of `|E(uw)| / sqrt(E(|u|^2) E(|w|^2))` in the homogeneous
/// profile; keeps `q_m` above `1e6` at `m = 2^14`.
pub const HOMOGENEOUS_MAX_OVERLAP: f64 = 3e-3;
/// Upper bound of `|<x, y>|` in the rank-one profile; keeps `lambda_m`
/// above `1e3` at `m = 2^14`.
pub const RANK_ONE_MAX_OVERLAP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Generic,
    /// `E(|u|^2)`, `E(|w|^2)`, `|E(uw)|` constant across atoms.
    Homogeneous,
    /// `E(uw) = 0`.
    Nilpotent,
    /// `u, w > 0`.
    Nonneg,
    /// Generic WCE data plus unit `x, y` with `|<x, y>| <= 1e-3`.
    RankOne,
}

impl Profile {
    pub const ALL: [Profile; 5] = [
        Profile::Generic,
        Profile::Homogeneous,
        Profile::Nilpotent,
        Profile::Nonneg,
        Profile::RankOne,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Generic => "generic",
            Profile::Homogeneous => "homogeneous",
            Profile::Nilpotent => "nilpotent",
            Profile::Nonneg => "nonneg",
            Profile::RankOne => "rank-one",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Profile::Generic => 0x11,
            Profile::Homogeneous => 0x22,
            Profile::Nilpotent => 0x33,
            Profile::Nonneg => 0x44,
            Profile::RankOne => 0x55,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown profile '{s}'")))
    }
}

pub(crate) fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn normal(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> std::sync::Arc<MeasureSpace> {
    MeasureSpace::new((0..n).map(|_| rng.random_range(0.1..2.0)).collect()).expect("positive")
}

/// Random partition of `n` atoms into `k` blocks of at least `min_size` atoms.
fn random_partition(
    rng: &mut ChaCha8Rng,
    space: &std::sync::Arc<MeasureSpace>,
    k: usize,
    min_size: usize,
) -> Partition {
    let n = space.dim();
    let mut atoms: Vec<usize> = (0..n).collect();
    atoms.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &a) in atoms.iter().enumerate() {
        labels[a] = if pos < k * min_size {
            pos / min_size
        } else {
            rng.random_range(0..k)
        };
    }
    Partition::from_labels(space, &labels).expect("labels cover every atom")
}

fn random_function(rng: &mut ChaCha8Rng, space: &std::sync::Arc<MeasureSpace>) -> MFunction {
    MFunction::new(space, (0..space.dim()).map(|_| normal(rng)).collect()).expect("dimension")
}

/// Block inner product `sum_{i in B} mu_i f_i conj(g_i)`.
fn block_inner(space: &MeasureSpace, block: &[usize], f: &[C64], g: &[C64]) -> C64 {
    block
        .iter()
        .map(|&i| f[i] * g[i].conj() * space.weights()[i])
        .sum()
}

/// Projects `w` blockwise so that `E(uw) = 0`. A one-atom block where `u`
/// is nonzero admits no nonzero such `w`, and is rejected.
pub fn make_nilpotent(p: &Partition, u: &MFunction, w: &MFunction) -> Result<MFunction> {
    let space = p.space();
    let uv: Vec<C64> = u.values().iter().copied().collect();
    let ubar: Vec<C64> = uv.iter().map(|z| z.conj()).collect();
    let mut out: Vec<C64> = w.values().iter().copied().collect();
    for block in p.blocks() {
        let uu = block_inner(space, block, &ubar, &ubar);
        if uu.re == 0.0 {
            continue;
        }
        if block.len() == 1 {
            return Err(Error::Generation(format!(
                "nilpotent profile needs blocks of at least two atoms where u is nonzero (atom {})",
                block[0]
            )));
        }
        // sum mu u w = <w, conj(u)>_B
        let c = block_inner(space, block, &out, &ubar) / uu;
        for &i in block {
            out[i] -= c * ubar[i];
        }
    }
    MFunction::new(space, out)
}

fn homogeneous(rng: &mut ChaCha8Rng, p: &Partition) -> Result<(MFunction, MFunction)> {
    let space = p.space();
    let n = space.dim();
    let big_u: f64 = rng.random_range(0.5..2.0);
    let big_w: f64 = rng.random_range(0.5..2.0);
    let rho = if rng.random_bool(0.5) {
        0.0
    } else {
        rng.random_range(0.0..HOMOGENEOUS_MAX_OVERLAP)
    };
    let r = rho * (big_u * big_w).sqrt();
    let mut u = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for (b, block) in p.blocks().iter().enumerate() {
        if block.len() < 2 {
            return Err(Error::Generation(
                "homogeneous profile needs blocks of at least two atoms".into(),
            ));
        }
        let mb = p.block_measure(b);
        let raw: Vec<C64> = (0..n).map(|_| normal(rng)).collect();
        let eu2 = block_inner(space, block, &raw, &raw).re / mb;
        let s = (big_u / eu2).sqrt();
        for &i in block {
            u[i] = raw[i] * s;
        }
        let ubar: Vec<C64> = u.iter().map(|z| z.conj()).collect();
        let mut z: Vec<C64> = (0..n).map(|_| normal(rng)).collect();
        let c = block_inner(space, block, &z, &ubar) / block_inner(space, block, &ubar, &ubar);
        for &i in block {
            z[i] -= c * ubar[i];
        }
        let ez2 = block_inner(space, block, &z, &z).re / mb;
        let target = big_w - r * r / big_u;
        let sz = (target / ez2).sqrt();
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let coef = C64::from_polar(r / big_u, theta);
        for &i in block {
            w[i] = coef * ubar[i] + z[i] * sz;
        }
    }
    Ok((MFunction::new(space, u)?, MFunction::new(space, w)?))
}

/// Unit `x, y` with `|<x, y>|` either `0` or uniform in `[0, 1e-3)`.
fn rank_one_pair(rng: &mut ChaCha8Rng, space: &std::sync::Arc<MeasureSpace>) -> (MFunction, MFunction) {
    let x = random_function(rng, space);
    let x = x.scale(C64::new(1.0 / x.norm(), 0.0));
    let y0 = random_function(rng, space);
    let y0 = y0.sub(&x.scale(crate::hilbert::inner_unchecked(&y0, &x)));
    let y0 = y0.scale(C64::new(1.0 / y0.norm(), 0.0));
    let s = if rng.random_bool(0.5) {
        0.0
    } else {
        rng.random_range(0.0..RANK_ONE_MAX_OVERLAP)
    };
    let phase = C64::from_polar(s, rng.random_range(0.0..std::f64::consts::TAU));
    let y = y0.scale(C64::new((1.0 - s * s).sqrt(), 0.0)).add(&x.scale(phase));
    (x, y)
}

/// Deterministic instance for `(seed, profile)`: at most 10 atoms and 4
/// blocks; homogeneous and nilpotent blocks have at least two atoms.
pub fn gen_instance(seed: u64, profile: Profile) -> Result<Instance> {
    let mut rng = rng_for(seed, profile.salt());
    let min_size = match profile {
        Profile::Homogeneous | Profile::Nilpotent => 2,
        _ => 1,
    };
    let min_atoms = if profile == Profile::RankOne { 2 } else { min_size };
    let n = rng.random_range(min_atoms..=MAX_ATOMS);
    let k = rng.random_range(1..=MAX_BLOCKS.min(n / min_size));
    let space = random_space(&mut rng, n);
    let p = random_partition(&mut rng, &space, k, min_size);

    let (u, w) = match profile {
        Profile::Generic | Profile::RankOne => {
            let mut u = random_function(&mut rng, &space);
            let mut w = random_function(&mut rng, &space);
            // Occasionally switch u or w off on a block to exercise supports.
            if k > 1 && rng.random_bool(0.2) {
                let b = rng.random_range(0..k);
                let off = MFunction::one(&space).sub(&MFunction::indicator(&space, &p.blocks()[b]));
                if rng.random_bool(0.5) {
                    u = u.mul(&off);
                } else {
                    w = w.mul(&off);
                }
            }
            (u, w)
        }
        Profile::Homogeneous => homogeneous(&mut rng, &p)?,
        Profile::Nilpotent => {
            let u = random_function(&mut rng, &space);
            let w = random_function(&mut rng, &space);
            let w = make_nilpotent(&p, &u, &w)?;
            (u, w)
        }
        Profile::Nonneg => {
            let pos = |rng: &mut ChaCha8Rng| {
                MFunction::from_real(
                    &space,
                    &(0..n).map(|_| rng.random_range(0.05..2.0)).collect::<Vec<_>>(),
                )
                .expect("dimension")
            };
            let u = pos(&mut rng);
            (u, pos(&mut rng))
        }
    };
    let mut inst = Instance::new(p, u, w);
    if profile == Profile::RankOne {
        inst.rank_one = Some(rank_one_pair(&mut rng, &space));
    }
    Ok(inst)
}

/// Random complex `n x n` matrix (standard coordinates).
pub fn random_matrix(seed: u64, n: usize) -> CMatrix {
    let mut rng = rng_for(seed, 0x66);
    CMatrix::from_fn(n, n, |_, _| normal(&mut rng))
}

pub fn random_operator(space: &std::sync::Arc<MeasureSpace>, seed: u64) -> LinOperator {
    LinOperator::new(space, random_matrix(seed, space.dim())).expect("finite entries")
}

/// `a` plus `part` rescaled to the norm of `a` (or unit norm when `a = 0`).
fn add_comparable(a: &LinOperator, part: &LinOperator) -> LinOperator {
    let pn = op_norm(part).unwrap_or(0.0);
    if pn == 0.0 {
        return a.clone();
    }
    let an = op_norm(a).unwrap_or(0.0);
    a + &part.scale_real(if an > 0.0 { an / pn } else { 1.0 / pn })
}

/// Constructed members and non-members of an algebra.
#[derive(Debug, Clone)]
pub struct TestOperators {
    pub members: Vec<LinOperator>,
    pub non_members: Vec<LinOperator>,
}

/// `B_T` batch: members `A - P1 A P2`; non-members add a nonzero
/// `P1 B P2` block. Non-members are empty when `H1` or `H2` is trivial.
pub fn bt_test_operators(d: &BlockDecomp, seed: u64, count: usize) -> TestOperators {
    let space = d.p1.space().clone();
    let mut members = Vec::new();
    let mut non_members = Vec::new();
    for k in 0..count as u64 {
        let a = random_operator(&space, seed.wrapping_mul(31).wrapping_add(2 * k));
        let b = random_operator(&space, seed.wrapping_mul(31).wrapping_add(2 * k + 1));
        let member = &a - &(&(&d.p1 * &a) * &d.p2);
        if d.h1.dim() > 0 && d.h2.dim() > 0 {
            let y = &(&d.p1 * &b) * &d.p2;
            non_members.push(add_comparable(&member, &y));
        }
        members.push(member);
    }
    TestOperators {
        members,
        non_members,
    }
}

/// `Q_T` batch: members `P2 A P1`; non-members add an `X`, `W` or `Y`
/// block in rotation (whichever is available).
pub fn qt_test_operators(d: &BlockDecomp, seed: u64, count: usize) -> TestOperators {
    let space = d.p1.space().clone();
    let mut members = Vec::new();
    let mut non_members = Vec::new();
    for k in 0..count as u64 {
        let a = random_operator(&space, seed.wrapping_mul(37).wrapping_add(2 * k));
        let b = random_operator(&space, seed.wrapping_mul(37).wrapping_add(2 * k + 1));
        let member = &(&d.p2 * &a) * &d.p1;
        let parts: Vec<LinOperator> = [
            (d.h1.dim() > 0).then(|| &(&d.p1 * &b) * &d.p1),
            (d.h2.dim() > 0).then(|| &(&d.p2 * &b) * &d.p2),
            (d.h1.dim() > 0 && d.h2.dim() > 0).then(|| &(&d.p1 * &b) * &d.p2),
        ]
        .into_iter()
        .flatten()
        .collect();
        if !parts.is_empty() {
            let part = &parts[k as usize % parts.len()];
            non_members.push(add_comparable(&member, part));
        }
        members.push(member);
    }
    TestOperators {
        members,
        non_members,
    }
}

/// Exact-split `B_T` batch: members `A - P_div A P_rest`; non-members add
/// a nonzero `P_div B P_rest` block. Non-members are empty when the
/// divergent part is `{0}` or everything.
pub fn bt_exact_test_operators(d: &BlockDecomp, seed: u64, count: usize) -> TestOperators {
    let space = d.p1.space().clone();
    let k = d.divergent.dim();
    let mut members = Vec::new();
    let mut non_members = Vec::new();
    for j in 0..count as u64 {
        let a = random_operator(&space, seed.wrapping_mul(41).wrapping_add(2 * j));
        let b = random_operator(&space, seed.wrapping_mul(41).wrapping_add(2 * j + 1));
        let member = &a - &(&(&d.p_div * &a) * &d.p_rest);
        if k > 0 && k < d.n() {
            let y = &(&d.p_div * &b) * &d.p_rest;
            non_members.push(add_comparable(&member, &y));
        }
        members.push(member);
    }
    TestOperators {
        members,
        non_members,
    }
}

/// Exact-split `Q_T` batch: members `P_rest A P_div`; non-members add the
/// complementary part `B - P_rest B P_div`.
pub fn qt_exact_test_operators(d: &BlockDecomp, seed: u64, count: usize) -> TestOperators {
    let space = d.p1.space().clone();
    let mut members = Vec::new();
    let mut non_members = Vec::new();
    for j in 0..count as u64 {
        let a = random_operator(&space, seed.wrapping_mul(43).wrapping_add(2 * j));
        let b = random_operator(&space, seed.wrapping_mul(43).wrapping_add(2 * j + 1));
        let member = &(&d.p_rest * &a) * &d.p_div;
        let rest = &b - &(&(&d.p_rest * &b) * &d.p_div);
        non_members.push(add_comparable(&member, &rest));
        members.push(member);
    }
    TestOperators {
        members,
        non_members,
    }
}

/// Seeded complex function with standard normal entries.
pub fn seeded_function(space: &std::sync::Arc<MeasureSpace>, seed: u64, salt: u64) -> MFunction {
    random_function(&mut rng_for(seed, salt), space)
}

/// Seeded `A`-measurable function: uniform on `[0, 2)` per block when
/// `nonneg`, complex standard normal otherwise.
pub fn seeded_measurable(p: &Partition, seed: u64, salt: u64, nonneg: bool) -> MFunction {
    let mut rng = rng_for(seed, salt);
    let vals: Vec<C64> = (0..p.num_blocks())
        .map(|_| {
            if nonneg {
                C64::new(rng.random_range(0.0..2.0), 0.0)
            } else {
                normal(&mut rng)
            }
        })
        .collect();
    p.lift(&vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sra::{block_decompose, RmFamily};
    use crate::settings::Tolerances;

    #[test]
    fn deterministic_per_seed_and_profile() {
        for p in Profile::ALL {
            let a = gen_instance(7, p).unwrap();
            let b = gen_instance(7, p).unwrap();
            assert_eq!(a.digest(), b.digest(), "{p}");
            let c = gen_instance(8, p).unwrap();
            assert_ne!(a.digest(), c.digest(), "{p}");
        }
    }

    #[test]
    fn nilpotent_profile_kills_e_uw() {
        for seed in 0..50 {
            let t = gen_instance(seed, Profile::Nilpotent).unwrap().wce();
            assert!(t.e_uw().sup_norm() < 1e-14, "seed {seed}");
        }
    }

    #[test]
    fn nilpotent_rejects_live_singletons() {
        let s = MeasureSpace::uniform(3);
        let p = Partition::new(&s, vec![vec![0], vec![1, 2]]).unwrap();
        let one = MFunction::one(&s);
        assert!(matches!(make_nilpotent(&p, &one, &one), Err(Error::Generation(_))));
    }

    #[test]
    fn homogeneous_profile_is_homogeneous() {
        for seed in 0..50 {
            let t = gen_instance(seed, Profile::Homogeneous).unwrap().wce();
            let spread = |f: &MFunction| {
                let v: Vec<f64> = f.values().iter().map(|z| z.norm()).collect();
                v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
            };
            assert!(spread(t.e_u2()) < 1e-12);
            assert!(spread(t.e_w2()) < 1e-12);
            assert!(spread(t.e_uw()) < 1e-12);
            let fam = RmFamily::wce(&t);
            for m in [1, 64, 1 << 14] {
                assert!(spread(&fam.q(m).unwrap()) <= 1e-9 * fam.max_q(m));
            }
            assert!(fam.max_q(1 << 14) > 1e6, "seed {seed}");
        }
    }

    #[test]
    fn nonneg_and_rank_one_profiles() {
        for seed in 0..20 {
            let i = gen_instance(seed, Profile::Nonneg).unwrap();
            assert!(i.u.values().iter().chain(i.w.values().iter()).all(|z| z.re > 0.0 && z.im == 0.0));
            let i = gen_instance(seed, Profile::RankOne).unwrap();
            let (x, y) = i.rank_one.unwrap();
            assert!((x.norm() - 1.0).abs() < 1e-12 && (y.norm() - 1.0).abs() < 1e-12);
            assert!(crate::hilbert::inner(&x, &y).unwrap().norm() < RANK_ONE_MAX_OVERLAP);
        }
    }

    #[test]
    fn test_operator_batches_have_the_intended_blocks() {
        for seed in 0..10 {
            let t = gen_instance(seed, Profile::Homogeneous).unwrap().wce();
            let d = block_decompose(&t, &Tolerances::default()).unwrap();
            let bt = bt_test_operators(&d, seed, 5);
            assert_eq!(bt.members.len(), 5);
            for s in &bt.members {
                let [_, y, _, _] = d.blocks_of(s);
                assert!(y.max_abs() < 1e-12);
            }
            let qt = qt_test_operators(&d, seed, 5);
            for s in &qt.members {
                let [x, y, _, w] = d.blocks_of(s);
                assert!(x.max_abs().max(y.max_abs()).max(w.max_abs()) < 1e-12);
            }
        }
    }
}
