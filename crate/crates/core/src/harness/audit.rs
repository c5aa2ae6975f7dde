//! Claim catalog and the audit runner.
//!
//! Each claim pairs a closed form or structural criterion with an
//! independent evaluation (dense products, truncated series, sampled
//! conjugation norms, Monte-Carlo bounds) on seeded random instances. Hard
//! claims are expected to hold on their native profile and drive the exit
//! status; soft claims are statements whose general form fails and are
//! audited for counterexamples only.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condexp::cond_expect;
use crate::error::{Error, Result};
use crate::harness::gen::{
    bt_exact_test_operators, bt_test_operators, gen_instance, qt_exact_test_operators,
    qt_test_operators, random_operator, seeded_function, seeded_measurable, Profile, TestOperators,
};
use crate::harness::instance::{digest_file, Instance, InstanceFile};
use crate::harness::report::AuditReport;
use crate::hilbert::{
    adjoint, kernel_with, op_norm_with, project, rank_one, singular_values, spectral_radius_dense,
    LinOperator, MFunction, PowerIteration, Subspace, C64,
};
use crate::majorize::{
    majorizes, natural_delta, qt_majorization_suite, rank_one_majorization, Implication,
};
use crate::settings::Settings;
use crate::sra::membership::power_params;
use crate::sra::rm::SERIES_MAX_TERMS;
use crate::sra::{
    block_decompose, bt_equals_full, bt_kernel_criterion_with, bt_member_definitional,
    bt_member_divergence_criterion, bt_member_kernel_criterion, conjugation_norms,
    isometry_multiple_check, nilpotent_invariant_subspace, qt_member_divergence_criterion,
    qt_member_with, rank_one_bt_criterion, rank_one_bt_invariance, rank_one_in_bt_wce,
    rank_one_qt, rank_one_rm, rm_closed, rm_series, BlockDecomp, RmFamily, Verdict,
};
use crate::wce::{polar, wce_build, WceOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClaimVerdict {
    Pass,
    Counterexample,
    Skipped,
}

impl ClaimVerdict {
    pub fn name(self) -> &'static str {
        match self {
            ClaimVerdict::Pass => "PASS",
            ClaimVerdict::Counterexample => "COUNTEREXAMPLE",
            ClaimVerdict::Skipped => "SKIPPED",
        }
    }
}

/// Named scalar evidence. Non-finite numbers are stored as the strings
/// `"NaN"`, `"inf"` and `"-inf"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence(pub BTreeMap<String, serde_json::Value>);

pub fn json_number(x: f64) -> serde_json::Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => serde_json::Value::Number(n),
        None if x.is_nan() => "NaN".into(),
        None if x > 0.0 => "inf".into(),
        None => "-inf".into(),
    }
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, key: &str, x: f64) -> Self {
        self.0.insert(key.into(), json_number(x));
        self
    }

    pub fn count(mut self, key: &str, n: usize) -> Self {
        self.0.insert(key.into(), n.into());
        self
    }

    pub fn flag(mut self, key: &str, b: bool) -> Self {
        self.0.insert(key.into(), b.into());
        self
    }

    pub fn text(mut self, key: &str, s: impl Into<String>) -> Self {
        self.0.insert(key.into(), serde_json::Value::String(s.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&serde_json::Value> {
        self.0.get(key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub verdict: ClaimVerdict,
    pub evidence: Evidence,
}

impl Outcome {
    fn check(ok: bool, evidence: Evidence) -> Self {
        Outcome {
            verdict: if ok {
                ClaimVerdict::Pass
            } else {
                ClaimVerdict::Counterexample
            },
            evidence,
        }
    }

    fn skip(reason: &str, evidence: Evidence) -> Self {
        Outcome {
            verdict: ClaimVerdict::Skipped,
            evidence: evidence.text("skip_reason", reason),
        }
    }
}

/// One evaluation context: a generated instance and the trial seed.
pub struct Trial<'a> {
    pub instance: &'a Instance,
    pub seed: u64,
    pub settings: &'a Settings,
}

impl Trial<'_> {
    fn wce(&self) -> WceOp {
        self.instance.wce()
    }

    fn params(&self) -> PowerIteration {
        power_params(self.settings)
    }

    fn norm(&self, a: &LinOperator) -> Result<f64> {
        op_norm_with(a, &self.params())
    }
}

pub type Evaluator = fn(&Trial<'_>) -> Result<Outcome>;

/// A registered claim.
#[derive(Debug)]
pub struct Claim {
    pub id: &'static str,
    /// Profile instances are drawn from unless overridden.
    pub profile: Profile,
    /// Failures on the native profile are fatal to the audit.
    pub hard: bool,
    pub statement: &'static str,
    pub evaluate: Evaluator,
}

macro_rules! claim {
    ($id:literal, $profile:ident, $hard:literal, $eval:ident, $stmt:literal) => {
        Claim {
            id: $id,
            profile: Profile::$profile,
            hard: $hard,
            statement: $stmt,
            evaluate: $eval,
        }
    };
}

static CATALOG: &[Claim] = &[
    claim!("condexp-axioms", Generic, true, condexp_axioms,
        "E^2 = E, E* = E, E1 = 1 and blockwise integrals are preserved"),
    claim!("norm-formula", Generic, true, norm_formula,
        "||M_w E M_u|| = ||(E|w|^2)^(1/2) (E|u|^2)^(1/2)||_inf"),
    claim!("power-formula", Generic, true, power_formula,
        "T^n = M_{E(uw)^(n-1) w} E M_u for n <= 8"),
    claim!("spectral-radius-gelfand", Generic, true, spectral_radius_gelfand,
        "r(T) = ||E(uw)||_inf against dense eigenvalues; ||T^50||^(1/50) matches its closed form and bounds r"),
    claim!("nilpotent-square-zero", Nilpotent, true, nilpotent_square_zero,
        "E(uw) = 0 gives T^2 = 0"),
    claim!("rm-closed-vs-series", Generic, true, rm_closed_vs_series,
        "closed-form R_m equals the square root of the defining series"),
    claim!("rm-inverse", Generic, true, rm_inverse_claim,
        "R_m R_m^{-1} = I and ||R_m^{-1}|| <= 1"),
    claim!("rm-inverse-paper-denominator", Generic, false, rm_inverse_printed,
        "R_m^{-2} = I - M_{v/(v E|u|^2 - 1) conj(u)} E M_u"),
    claim!("bt-kernel-criterion", Homogeneous, true, bt_kernel_homogeneous,
        "S in B_T iff N(E M_u) is S-invariant"),
    claim!("bt-kernel-criterion-general", Generic, false, bt_kernel_general,
        "S in B_T iff N(E M_u) is S-invariant, on arbitrary instances"),
    claim!("bt-divergence-criterion", Generic, false, bt_divergence,
        "S in B_T iff the complement of the divergent part is S-invariant"),
    claim!("qt-criterion", Homogeneous, true, qt_homogeneous,
        "S in Q_T iff S = P_2 S P_1"),
    claim!("qt-criterion-general", Generic, false, qt_general,
        "S in Q_T iff S = P_2 S P_1, on arbitrary instances"),
    claim!("qt-divergence-criterion", Generic, false, qt_divergence,
        "S in Q_T iff S = P_rest S P_div"),
    claim!("qt-kernel-only-criterion", Homogeneous, false, qt_kernel_only,
        "S in Q_T iff N(E M_u) is S-invariant and contained in N(S)"),
    claim!("commutation", Generic, true, commutation,
        "||R_m M_{a conj(u)} E M_u R_m^{-1}|| = ||M_{a conj(u)} E M_u|| for measurable a >= 0"),
    claim!("multiplier-in-bt", Generic, true, multiplier_in_bt,
        "M_a is in B_T for every bounded measurable a"),
    claim!("aluthge", Nonneg, true, aluthge,
        "closed-form Aluthge transform equals |T|^(1/2) U |T|^(1/2) and keeps E(uw)"),
    claim!("aluthge-complex", Generic, false, aluthge_complex,
        "the Aluthge closed form without sign assumptions on u, w"),
    claim!("aluthge-in-bt", Nonneg, true, aluthge_in_bt,
        "the Aluthge transform of T lies in B_T when u, w > 0"),
    claim!("aluthge-equal-algebras", Nonneg, true, aluthge_equal_algebras,
        "B_T = B_{T~} when u, w >= 0"),
    claim!("equal-algebras", Homogeneous, true, equal_algebras_homogeneous,
        "B_{M_w' E M_u} = B_{M_w E M_u} for homogeneous data"),
    claim!("equal-algebras-general", Generic, false, equal_algebras_general,
        "B_{M_w' E M_u} = B_{M_w E M_u} for arbitrary w, w'"),
    claim!("trivial-kernel-full-algebra", Generic, false, trivial_kernel_full,
        "N(E M_u) = {0} gives B_T = B(L^2)"),
    claim!("bt-full-sup-condition", Generic, false, bt_full_sup,
        "B_T = B(L^2) iff the sup condition on v_m is finite"),
    claim!("isometry-sup-condition", Generic, false, isometry_sup,
        "T is a multiple of an isometry iff the sup condition on v_m is finite"),
    claim!("nilpotent-invariant-subspace", Nilpotent, false, nilpotent_invariant,
        "E(uw) = 0 gives B_T a nontrivial invariant subspace"),
    claim!("rank-one-rm", RankOne, true, rank_one_rm_claim,
        "closed-form R_m of x (x) y equals the series"),
    claim!("rank-one-qt", RankOne, true, rank_one_qt_claim,
        "S in Q_{x (x) y} iff S = (I - P) S P"),
    claim!("rank-one-bt-invariance", RankOne, true, rank_one_bt_invariance_claim,
        "B_{x (x) w} = B_{y (x) w}"),
    claim!("rank-one-in-bt-product", Generic, true, rank_one_in_bt_product,
        "||R_m (f (x) g) R_m^{-1}|| = ||R_m f|| ||R_m^{-1} g||"),
    claim!("rank-one-in-bt-printed", Generic, false, rank_one_in_bt_printed,
        "f (x) g in B_T iff the printed alpha_m expression stays bounded"),
    claim!("majorize-kernel", Generic, true, majorize_kernel,
        "T majorizes S iff N(T) is contained in N(S), with the minimal constant"),
    claim!("majorize-qt-wce", Nonneg, true, majorize_qt_wce,
        "u >= 0, E(u) >= delta and S in Q_T give E M_u majorizing S"),
    claim!("majorize-qt-rank-one", RankOne, true, majorize_qt_rank_one,
        "S in Q_{x (x) y} gives x (x) y majorizing S"),
    claim!("closed-range", Nonneg, true, closed_range,
        "E(u) >= delta bounds the nonzero singular values of E M_u below by delta"),
];

pub fn catalog() -> &'static [Claim] {
    CATALOG
}

pub fn find_claim(id: &str) -> Option<&'static Claim> {
    CATALOG.iter().find(|c| c.id == id)
}

/// Parses `all` or a comma-separated list of claim ids; result sorted by id
/// and deduplicated.
pub fn select_claims(list: &str) -> Result<Vec<&'static Claim>> {
    let mut out: Vec<&'static Claim> = Vec::new();
    for id in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if id == "all" {
            out.extend(CATALOG.iter());
            continue;
        }
        out.push(find_claim(id).ok_or_else(|| {
            Error::Usage(format!("unknown claim '{id}' (see `audit --list`)"))
        })?);
    }
    if out.is_empty() {
        return Err(Error::usage("no claims selected"));
    }
    out.sort_by_key(|c| c.id);
    out.dedup_by_key(|c| c.id);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    /// `numerical`, `generation` or `validation`.
    pub kind: String,
    pub message: String,
}

/// Outcome of one claim on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub claim: String,
    pub trial: usize,
    pub profile: Profile,
    /// Instance seed; `gen_instance(seed, profile)` reproduces the instance.
    pub seed: u64,
    pub hard: bool,
    pub digest: Option<String>,
    pub verdict: ClaimVerdict,
    pub evidence: Evidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RecordError>,
    /// Embedded for counterexamples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceFile>,
}

impl AuditRecord {
    pub fn is_numerical_failure(&self) -> bool {
        self.error.as_ref().is_some_and(|e| e.kind == "numerical")
    }
}

/// Seed of trial `k` under audit seed `seed`.
pub fn trial_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64)
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Numerical { .. } => "numerical",
        Error::Generation(_) => "generation",
        Error::Validation { .. } => "validation",
        Error::Parse { .. } => "parse",
        Error::Usage(_) => "usage",
    }
}

fn failed(claim: &Claim, trial: usize, profile: Profile, seed: u64, hard: bool, e: &Error) -> AuditRecord {
    AuditRecord {
        claim: claim.id.into(),
        trial,
        profile,
        seed,
        hard,
        digest: None,
        verdict: ClaimVerdict::Skipped,
        evidence: Evidence::new(),
        error: Some(RecordError {
            kind: error_kind(e).into(),
            message: e.to_string(),
        }),
        instance: None,
    }
}

/// Evaluates `claim` on `instance`.
pub fn evaluate_on(
    claim: &Claim,
    instance: &Instance,
    trial: usize,
    profile: Profile,
    seed: u64,
    settings: &Settings,
) -> AuditRecord {
    let hard = claim.hard && profile == claim.profile;
    let file = instance.to_file();
    let digest = digest_file(&file);
    let ctx = Trial {
        instance,
        seed,
        settings,
    };
    match (claim.evaluate)(&ctx) {
        Ok(outcome) => AuditRecord {
            claim: claim.id.into(),
            trial,
            profile,
            seed,
            hard,
            digest: Some(digest),
            verdict: outcome.verdict,
            evidence: outcome.evidence,
            error: None,
            instance: (outcome.verdict == ClaimVerdict::Counterexample).then_some(file),
        },
        Err(e) => {
            let mut rec = failed(claim, trial, profile, seed, hard, &e);
            rec.digest = Some(digest);
            rec.instance = Some(file);
            rec
        }
    }
}

fn run_trial(claim: &Claim, trial: usize, seed: u64, profile: Option<Profile>, settings: &Settings) -> AuditRecord {
    let profile = profile.unwrap_or(claim.profile);
    let iseed = trial_seed(seed, trial);
    match gen_instance(iseed, profile) {
        Ok(instance) => evaluate_on(claim, &instance, trial, profile, iseed, settings),
        Err(e) => failed(claim, trial, profile, iseed, claim.hard && profile == claim.profile, &e),
    }
}

/// Audit options.
#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub claims: Vec<&'static Claim>,
    pub trials: usize,
    pub seed: u64,
    /// Replaces every claim's native profile.
    pub profile: Option<Profile>,
}

/// Runs every selected claim on `trials` instances. Trials run in parallel;
/// records are ordered by (claim id, trial index).
pub fn run_audit(config: &AuditConfig, settings: &Settings) -> AuditReport {
    let jobs: Vec<(&Claim, usize)> = config
        .claims
        .iter()
        .flat_map(|&c| (0..config.trials).map(move |k| (c, k)))
        .collect();
    let records: Vec<AuditRecord> = jobs
        .par_iter()
        .map(|&(c, k)| run_trial(c, k, config.seed, config.profile, settings))
        .collect();
    AuditReport::new(
        settings.clone(),
        config.seed,
        config.trials,
        config.profile,
        config.claims.iter().map(|c| c.id.to_string()).collect(),
        records,
    )
}

/// Re-evaluates a record from its embedded instance (or regenerates it
/// from its seed when none is embedded).
pub fn replay(record: &AuditRecord, settings: &Settings) -> Result<AuditRecord> {
    let claim = find_claim(&record.claim)
        .ok_or_else(|| Error::Usage(format!("unknown claim '{}'", record.claim)))?;
    let instance = match &record.instance {
        Some(file) => file.validate()?,
        None => gen_instance(record.seed, record.profile)?,
    };
    Ok(evaluate_on(claim, &instance, record.trial, record.profile, record.seed, settings))
}

// ---------------------------------------------------------------------------
// Evaluators

const SALT_F: u64 = 0xA1;
const SALT_G: u64 = 0xA2;
const SALT_A: u64 = 0xA3;
const SALT_W: u64 = 0xA4;
const SALT_OPS: u64 = 0xA5;

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

/// `err / scale`, with `scale = 0` meaning the error must itself vanish.
fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn is_nonneg(f: &MFunction) -> bool {
    f.values().iter().all(|z| z.im == 0.0 && z.re >= 0.0)
}

fn condexp_axioms(tr: &Trial<'_>) -> Result<Outcome> {
    let p = &tr.instance.partition;
    let space = tr.instance.space();
    let e = cond_expect(p);
    let f = seeded_function(space, tr.seed, SALT_F);
    let one = MFunction::one(space);
    let ef = e.apply(&f);
    let w = space.weights();
    let idempotent = (&e * &e).max_abs_diff(&e);
    let self_adjoint = adjoint(&e).max_abs_diff(&e);
    let unit = e.apply(&one).max_abs_diff(&one);
    let averaging = relative(ef.max_abs_diff(&p.expect(&f)), f.sup_norm());
    let integral = max_of(p.blocks().iter().map(|b| {
        let diff: C64 = b.iter().map(|&i| (ef.get(i) - f.get(i)) * w[i]).sum();
        let mass: f64 = b.iter().map(|&i| f.get(i).norm() * w[i]).sum();
        relative(diff.norm(), mass)
    }));
    let worst = max_of([idempotent, self_adjoint, unit, averaging, integral]);
    Ok(Outcome::check(
        worst <= 1e-12,
        Evidence::new()
            .num("idempotence", idempotent)
            .num("self_adjointness", self_adjoint)
            .num("unit", unit)
            .num("averaging", averaging)
            .num("integral", integral),
    ))
}

fn norm_formula(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let closed = t.norm();
    let direct = tr.norm(t.matrix())?;
    let rel = relative((closed - direct).abs(), closed);
    Ok(Outcome::check(
        rel <= 1e-8,
        Evidence::new()
            .num("closed", closed)
            .num("power_iteration", direct)
            .num("relative_error", rel),
    ))
}

fn power_formula(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let a = t.matrix();
    let norm = t.norm();
    let mut worst: f64 = 0.0;
    let mut worst_n = 0u32;
    let mut product = a.clone();
    for n in 1..=8u32 {
        if n > 1 {
            product = &product * a;
        }
        let err = relative(tr.norm(&(&t.power(n) - &product))?, norm.powi(n as i32));
        if err > worst {
            worst = err;
            worst_n = n;
        }
    }
    Ok(Outcome::check(
        worst <= 1e-10,
        Evidence::new()
            .num("worst_relative_error", worst)
            .count("worst_n", worst_n as usize)
            .num("norm", norm),
    ))
}

/// Gelfand exponent used by `spectral-radius-gelfand`.
pub const GELFAND_K: u32 = 50;

fn spectral_radius_gelfand(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let r = t.spectral_radius();
    let ev = Evidence::new().num("r_closed", r);
    if r <= 1e-6 {
        return Ok(Outcome::skip("r <= 1e-6", ev));
    }
    let norm = t.norm();
    // ||T^k||^(1/k) from the dense power of T / ||T|| to avoid underflow.
    let scaled = t.matrix().scale_real(1.0 / norm).pow(GELFAND_K);
    let gelfand = tr.norm(&scaled)?.powf(1.0 / GELFAND_K as f64) * norm;
    let closed = t.gelfand_estimate(GELFAND_K);
    let closed_err = (gelfand - closed).abs() / closed;
    let dense = spectral_radius_dense(t.matrix());
    let dense_err = relative((dense - r).abs(), norm);
    let gelfand_rel = (gelfand - r).abs() / r;
    Ok(Outcome::check(
        closed_err <= 1e-8 && gelfand >= r * (1.0 - 1e-8) && dense_err <= 1e-6,
        ev.num("gelfand_k50", gelfand)
            .num("gelfand_closed_form", closed)
            .num("gelfand_closed_form_error", closed_err)
            .num("gelfand_relative_error", gelfand_rel)
            .flag("gelfand_within_5pct", gelfand_rel <= 0.05)
            .num("overlap", r / norm)
            .num("r_dense", dense)
            .num("dense_error_over_norm", dense_err),
    ))
}

fn nilpotent_square_zero(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let euw = t.e_uw().sup_norm();
    let sq = t.matrix().pow(2).max_abs();
    Ok(Outcome::check(
        euw < 1e-14 && sq < 1e-14,
        Evidence::new().num("sup_e_uw", euw).num("max_entry_t2", sq),
    ))
}

const SERIES_GRID: [u64; 5] = [1, 2, 4, 8, 16];

fn rm_closed_vs_series(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let mut worst: f64 = 0.0;
    for m in SERIES_GRID {
        let series = rm_series(t.matrix(), t.spectral_radius(), m, SERIES_MAX_TERMS)?;
        worst = worst.max(rm_closed(&t, m).max_abs_diff(&series));
    }
    Ok(Outcome::check(
        worst < 1e-9,
        Evidence::new().num("max_entry_error", worst),
    ))
}

fn rm_inverse_claim(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let fam = RmFamily::wce(&t);
    let id = LinOperator::identity(t.space());
    let (mut residual, mut inv_norm) = (0.0f64, 0.0f64);
    for m in tr.settings.m_grid() {
        let ri = fam.r_m_inv(m);
        residual = residual.max(tr.norm(&(&(&fam.r_m(m) * &ri) - &id))?);
        inv_norm = inv_norm.max(tr.norm(&ri)?);
    }
    Ok(Outcome::check(
        residual < 1e-9 && inv_norm <= 1.0 + 1e-9,
        Evidence::new()
            .num("max_residual", residual)
            .num("max_inverse_norm", inv_norm),
    ))
}

/// `||R_m^2 X - I||` with `X = I - M_{a conj(u)} E M_u`; infinite when `a`
/// is not finite.
fn inverse_residual(tr: &Trial<'_>, t: &WceOp, fam: &RmFamily, m: u64, a: &MFunction) -> Result<f64> {
    if a.values().iter().any(|z| !z.re.is_finite()) {
        return Ok(f64::INFINITY);
    }
    let id = LinOperator::identity(t.space());
    let x = &id - &t.scaled_u_gram(a);
    tr.norm(&(&(&fam.r_m_squared(m) * &x) - &id))
}

fn rm_inverse_printed(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let fam = RmFamily::wce(&t);
    let (mut worst, mut worst_m, mut corrected) = (0.0f64, 0u64, 0.0f64);
    for m in tr.settings.m_grid() {
        let printed = inverse_residual(tr, &t, &fam, m, &fam.alpha_printed(m).expect("wce source"))?;
        corrected = corrected.max(inverse_residual(tr, &t, &fam, m, &fam.alpha(m).expect("wce source"))?);
        if !(printed <= worst) {
            worst = printed;
            worst_m = m;
        }
    }
    Ok(Outcome::check(
        worst <= 1e-9,
        Evidence::new()
            .num("printed_residual", worst)
            .count("worst_m", worst_m as usize)
            .num("corrected_residual", corrected),
    ))
}

/// Per-operator comparison: (constructed member, criterion, sampled verdict).
type Row = (bool, bool, Verdict);

fn labelled(ops: &TestOperators) -> impl Iterator<Item = (bool, &LinOperator)> {
    ops.members
        .iter()
        .map(|s| (true, s))
        .chain(ops.non_members.iter().map(|s| (false, s)))
}

/// Hard suites pass only with zero inconclusive verdicts and zero
/// disagreements (criterion vs sampled, criterion vs construction). Soft
/// suites report a counterexample on any criterion/sampled disagreement and
/// skip when the sampled side is inconclusive.
fn membership_outcome(rows: &[Row], hard: bool) -> Outcome {
    let decided = |v: Verdict| v != Verdict::Inconclusive;
    let disagreements: Vec<usize> = (0..rows.len())
        .filter(|&i| decided(rows[i].2) && (rows[i].2 == Verdict::Member) != rows[i].1)
        .collect();
    let inconclusive = rows.iter().filter(|r| !decided(r.2)).count();
    let label_mismatch = rows.iter().filter(|r| r.0 != r.1).count();
    let mut ev = Evidence::new()
        .count("operators", rows.len())
        .count("constructed_members", rows.iter().filter(|r| r.0).count())
        .count("criterion_members", rows.iter().filter(|r| r.1).count())
        .count("disagreements", disagreements.len())
        .count("inconclusive", inconclusive)
        .count("label_mismatches", label_mismatch);
    if let Some(&i) = disagreements.first() {
        ev = ev.count("first_disagreement", i);
    }
    if hard {
        Outcome::check(disagreements.is_empty() && inconclusive == 0 && label_mismatch == 0, ev)
    } else if !disagreements.is_empty() {
        Outcome::check(false, ev)
    } else if inconclusive > 0 {
        Outcome::skip("sampled verdict inconclusive", ev)
    } else {
        Outcome::check(true, ev)
    }
}

fn bt_rows(
    tr: &Trial<'_>,
    ops: &TestOperators,
    criterion: impl Fn(&LinOperator) -> Result<bool>,
) -> Result<Vec<Row>> {
    let fam = RmFamily::wce(&tr.wce());
    labelled(ops)
        .map(|(label, s)| {
            Ok((label, criterion(s)?, bt_member_definitional(&fam, s, tr.settings)?.verdict))
        })
        .collect()
}

fn decompose(tr: &Trial<'_>) -> Result<(WceOp, BlockDecomp)> {
    let t = tr.wce();
    let d = block_decompose(&t, &tr.settings.tol)?;
    Ok((t, d))
}

fn bt_kernel(tr: &Trial<'_>, hard: bool) -> Result<Outcome> {
    let (_, d) = decompose(tr)?;
    let ops = bt_test_operators(&d, tr.seed ^ SALT_OPS, 5);
    let rows = bt_rows(tr, &ops, |s| bt_kernel_criterion_with(&d, s, tr.settings))?;
    Ok(membership_outcome(&rows, hard))
}

fn bt_kernel_homogeneous(tr: &Trial<'_>) -> Result<Outcome> {
    bt_kernel(tr, true)
}

fn bt_kernel_general(tr: &Trial<'_>) -> Result<Outcome> {
    bt_kernel(tr, false)
}

fn bt_divergence(tr: &Trial<'_>) -> Result<Outcome> {
    let (t, d) = decompose(tr)?;
    let ops = bt_exact_test_operators(&d, tr.seed ^ SALT_OPS, 5);
    let rows = bt_rows(tr, &ops, |s| bt_member_divergence_criterion(&t, s, tr.settings))?;
    Ok(membership_outcome(&rows, false))
}

/// Rows for a `Q_T` batch with the criterion picked out of the flags.
fn qt_rows(
    tr: &Trial<'_>,
    d: &BlockDecomp,
    ops: &TestOperators,
    criterion: impl Fn(&crate::sra::QtMembership, &LinOperator) -> Result<bool>,
) -> Result<Vec<Row>> {
    let fam = RmFamily::wce(&tr.wce());
    labelled(ops)
        .map(|(label, s)| {
            let q = qt_member_with(&fam, d, s, tr.settings)?;
            Ok((label, criterion(&q, s)?, q.verdict.verdict))
        })
        .collect()
}

fn qt_structural(tr: &Trial<'_>, hard: bool) -> Result<Outcome> {
    let (_, d) = decompose(tr)?;
    let ops = qt_test_operators(&d, tr.seed ^ SALT_OPS, 5);
    let rows = qt_rows(tr, &d, &ops, |q, _| Ok(q.holds))?;
    Ok(membership_outcome(&rows, hard))
}

fn qt_homogeneous(tr: &Trial<'_>) -> Result<Outcome> {
    qt_structural(tr, true)
}

fn qt_general(tr: &Trial<'_>) -> Result<Outcome> {
    qt_structural(tr, false)
}

fn qt_divergence(tr: &Trial<'_>) -> Result<Outcome> {
    let (t, d) = decompose(tr)?;
    let ops = qt_exact_test_operators(&d, tr.seed ^ SALT_OPS, 5);
    let rows = qt_rows(tr, &d, &ops, |_, s| qt_member_divergence_criterion(&t, s, tr.settings))?;
    Ok(membership_outcome(&rows, false))
}

fn qt_kernel_only(tr: &Trial<'_>) -> Result<Outcome> {
    let (_, d) = decompose(tr)?;
    let ops = qt_test_operators(&d, tr.seed ^ SALT_OPS, 5);
    let rows = qt_rows(tr, &d, &ops, |q, _| Ok(q.verdict.criterion_flags["kernel_only_criterion"]))?;
    Ok(membership_outcome(&rows, false))
}

/// Largest `|g(m) - ||S||| / ||S||` over the grid.
fn commutation_defect(tr: &Trial<'_>, t: &WceOp, s: &LinOperator) -> Result<(f64, f64)> {
    let s_norm = tr.norm(s)?;
    let g = conjugation_norms(&RmFamily::wce(t), s, &tr.settings.m_grid(), tr.settings)?;
    Ok((s_norm, relative(max_of(g.iter().map(|&(_, x)| (x - s_norm).abs())), s_norm)))
}

fn commutation(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let a = seeded_measurable(t.partition(), tr.seed, SALT_A, true);
    let s = t.scaled_u_gram(&a);
    let (s_norm, defect) = commutation_defect(tr, &t, &s)?;
    Ok(Outcome::check(
        defect <= 1e-8,
        Evidence::new().num("s_norm", s_norm).num("max_relative_defect", defect),
    ))
}

fn multiplier_in_bt(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let a = seeded_measurable(t.partition(), tr.seed, SALT_A, false);
    let s = LinOperator::multiplication(&a);
    let kernel = bt_member_kernel_criterion(&t, &s, tr.settings)?;
    let exact = bt_member_divergence_criterion(&t, &s, tr.settings)?;
    let (s_norm, defect) = commutation_defect(tr, &t, &s)?;
    Ok(Outcome::check(
        kernel && exact && defect <= 1e-8,
        Evidence::new()
            .flag("kernel_criterion", kernel)
            .flag("divergence_criterion", exact)
            .num("s_norm", s_norm)
            .num("max_relative_defect", defect),
    ))
}

fn aluthge_check(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let supp = tr.settings.tol.supp;
    let closed = t.aluthge(supp);
    let oracle = polar(t.matrix(), tr.settings.tol.rank)?.aluthge();
    let norm = t.norm();
    let transform_err = relative(tr.norm(&(&closed - &oracle))?, norm);
    let at = t.aluthge_op(supp);
    let scale = t.e_uw().sup_norm().max(1.0);
    let product_err = at.e_uw().max_abs_diff(t.e_uw()) / scale;
    let r_err = (at.spectral_radius() - t.spectral_radius()).abs() / scale;
    Ok(Outcome::check(
        transform_err <= 1e-8 && product_err < 1e-12 && r_err < 1e-12,
        Evidence::new()
            .num("transform_relative_error", transform_err)
            .num("e_uw_error", product_err)
            .num("spectral_radius_error", r_err),
    ))
}

fn require_nonneg(tr: &Trial<'_>) -> Option<Outcome> {
    let i = tr.instance;
    (!(is_nonneg(&i.u) && is_nonneg(&i.w))).then(|| Outcome::skip("requires u, w >= 0", Evidence::new()))
}

fn aluthge(tr: &Trial<'_>) -> Result<Outcome> {
    match require_nonneg(tr) {
        Some(skip) => Ok(skip),
        None => aluthge_check(tr),
    }
}

fn aluthge_complex(tr: &Trial<'_>) -> Result<Outcome> {
    aluthge_check(tr)
}

fn aluthge_in_bt(tr: &Trial<'_>) -> Result<Outcome> {
    if let Some(skip) = require_nonneg(tr) {
        return Ok(skip);
    }
    let t = tr.wce();
    let s = t.aluthge(tr.settings.tol.supp);
    let (s_norm, defect) = commutation_defect(tr, &t, &s)?;
    Ok(Outcome::check(
        defect <= 1e-8,
        Evidence::new().num("s_norm", s_norm).num("max_relative_defect", defect),
    ))
}

/// Compares the algebras of two WCE operators through their divergent
/// parts, and through sampled verdicts on a shared operator batch.
fn compare_algebras(tr: &Trial<'_>, a: &WceOp, b: &WceOp, hard: bool) -> Result<Outcome> {
    let tol = &tr.settings.tol;
    let (da, db) = (block_decompose(a, tol)?, block_decompose(b, tol)?);
    let same = da.divergent.same_as(&db.divergent, tol.angle);
    let mut ops = bt_exact_test_operators(&da, tr.seed ^ SALT_OPS, 3);
    let other = bt_exact_test_operators(&db, tr.seed ^ SALT_OPS ^ 1, 3);
    ops.members.extend(other.members);
    ops.non_members.extend(other.non_members);
    let (fa, fb) = (RmFamily::wce(a), RmFamily::wce(b));
    let (mut differ, mut inconclusive) = (0usize, 0usize);
    for (_, s) in labelled(&ops) {
        let va = bt_member_definitional(&fa, s, tr.settings)?.verdict;
        let vb = bt_member_definitional(&fb, s, tr.settings)?.verdict;
        if va == Verdict::Inconclusive || vb == Verdict::Inconclusive {
            inconclusive += 1;
        } else if va != vb {
            differ += 1;
        }
    }
    let ev = Evidence::new()
        .flag("same_divergent_part", same)
        .count("divergent_dim_a", da.divergent.dim())
        .count("divergent_dim_b", db.divergent.dim())
        .count("operators", ops.members.len() + ops.non_members.len())
        .count("sampled_differences", differ)
        .count("inconclusive", inconclusive);
    Ok(if hard {
        Outcome::check(same && differ == 0, ev)
    } else if !same || differ > 0 {
        Outcome::check(false, ev)
    } else if inconclusive > 0 {
        Outcome::skip("sampled verdict inconclusive", ev)
    } else {
        Outcome::check(true, ev)
    })
}

fn aluthge_equal_algebras(tr: &Trial<'_>) -> Result<Outcome> {
    if let Some(skip) = require_nonneg(tr) {
        return Ok(skip);
    }
    let t = tr.wce();
    compare_algebras(tr, &t, &t.aluthge_op(tr.settings.tol.supp), true)
}

fn equal_algebras_homogeneous(tr: &Trial<'_>) -> Result<Outcome> {
    // w' = c e^{i theta_B} w keeps the data homogeneous.
    let t = tr.wce();
    let p = t.partition();
    let phases = seeded_measurable(p, tr.seed, SALT_W, false);
    let c = 0.5 + seeded_measurable(p, tr.seed, SALT_W ^ 1, true).get(0).re * 0.75;
    let factor = phases.map(|z| if z.norm() > 0.0 { z / z.norm() * c } else { C64::new(c, 0.0) });
    let t2 = wce_build(p, t.u(), &t.w().mul(&factor))?;
    compare_algebras(tr, &t, &t2, true)
}

fn equal_algebras_general(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let w2 = seeded_function(t.space(), tr.seed, SALT_W);
    let t2 = wce_build(t.partition(), t.u(), &w2)?;
    compare_algebras(tr, &t, &t2, false)
}

fn trivial_kernel_full(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let c = bt_equals_full(&t, tr.settings)?;
    let ev = Evidence::new()
        .count("n", c.n)
        .count("kernel_dim", c.h2_dim)
        .flag("full_algebra", c.exact);
    if c.h2_dim != 0 {
        return Ok(Outcome::skip("N(E M_u) is nontrivial", ev));
    }
    Ok(Outcome::check(c.exact, ev))
}

fn sup_outcome(statement_holds: bool, sup: Verdict, ev: Evidence) -> Outcome {
    let ev = ev.text("sup_verdict", format!("{sup:?}"));
    match sup {
        Verdict::Inconclusive => Outcome::skip("sup condition inconclusive", ev),
        v => Outcome::check((v == Verdict::Member) == statement_holds, ev),
    }
}

fn bt_full_sup(tr: &Trial<'_>) -> Result<Outcome> {
    let c = bt_equals_full(&tr.wce(), tr.settings)?;
    let last = c.sup_evidence.last().map_or(0.0, |x| x.1);
    Ok(sup_outcome(
        c.exact,
        c.sup_verdict,
        Evidence::new().flag("full_algebra", c.exact).num("sup_at_m_max", last),
    ))
}

fn isometry_sup(tr: &Trial<'_>) -> Result<Outcome> {
    let c = isometry_multiple_check(&tr.wce(), tr.settings)?;
    let last = c.sup_evidence.last().map_or(0.0, |x| x.1);
    Ok(sup_outcome(
        c.holds,
        c.sup_verdict,
        Evidence::new()
            .flag("isometry_multiple", c.holds)
            .num("residual", c.residual)
            .num("sup_at_m_max", last),
    ))
}

fn invariant_under(sub: &Subspace, ops: &[LinOperator], tol: f64) -> bool {
    ops.iter().all(|op| {
        let scale = op.max_abs().max(f64::MIN_POSITIVE);
        sub.basis().iter().all(|h| sub.residual(&op.apply(h)) <= tol * scale)
    })
}

fn nilpotent_invariant(tr: &Trial<'_>) -> Result<Outcome> {
    let (t, d) = decompose(tr)?;
    let ev = Evidence::new()
        .num("r", t.spectral_radius())
        .num("norm", t.norm())
        .count("kernel_dim", d.h2.dim());
    if t.spectral_radius() > tr.settings.tol.peak * t.norm() {
        return Ok(Outcome::skip("E(uw) is not zero", ev));
    }
    let members = bt_exact_test_operators(&d, tr.seed ^ SALT_OPS, 5).members;
    let kernel_proper = d.h2.dim() > 0 && d.h2.dim() < d.n();
    let kernel_invariant = kernel_proper && invariant_under(&d.h2, &members, 1e-9);
    let ev = ev.flag("kernel_invariant_under_members", kernel_invariant);
    Ok(match nilpotent_invariant_subspace(&t, tr.settings)? {
        Some(sub) => {
            let mut ops = members;
            ops.push(t.matrix().clone());
            let ok = invariant_under(&sub, &ops, 1e-9);
            Outcome::check(ok, ev.count("subspace_dim", sub.dim()))
        }
        None => Outcome::check(false, ev.text("note", "B_T = B(L^2)")),
    })
}

fn rank_one_data(tr: &Trial<'_>) -> Option<(MFunction, MFunction)> {
    tr.instance.rank_one.clone()
}

macro_rules! need_rank_one {
    ($tr:expr) => {
        match rank_one_data($tr) {
            Some(p) => p,
            None => return Ok(Outcome::skip("instance has no rank-one pair", Evidence::new())),
        }
    };
}

fn rank_one_rm_claim(tr: &Trial<'_>) -> Result<Outcome> {
    let (x, y) = need_rank_one!(tr);
    let t = rank_one(&x, &y)?;
    let r = RmFamily::rank_one(&x, &y)?.r();
    let mut worst: f64 = 0.0;
    for m in SERIES_GRID {
        let series = rm_series(&t, r, m, SERIES_MAX_TERMS)?;
        worst = worst.max(rank_one_rm(&x, &y, m)?.max_abs_diff(&series));
    }
    Ok(Outcome::check(worst < 1e-9, Evidence::new().num("max_entry_error", worst)))
}

fn line_projection(v: &MFunction) -> Result<LinOperator> {
    Ok(project(&Subspace::span(v.space(), std::slice::from_ref(v), 1e-14)?))
}

fn rank_one_qt_claim(tr: &Trial<'_>) -> Result<Outcome> {
    let (x, y) = need_rank_one!(tr);
    let space = x.space().clone();
    let p = line_projection(&y)?;
    let id = LinOperator::identity(&space);
    let a = random_operator(&space, tr.seed ^ SALT_OPS);
    let member = &(&(&id - &p) * &a) * &p;
    let non_member = random_operator(&space, (tr.seed ^ SALT_OPS).wrapping_add(1));
    let mut mismatches = 0usize;
    let mut ev = Evidence::new();
    for (label, s, key) in [(true, &member, "member"), (false, &non_member, "non_member")] {
        let q = rank_one_qt(&x, &y, s, tr.settings)?;
        let s_norm = tr.norm(s)?;
        let last = q.verdict.evidence.last().map_or(0.0, |e| e.1);
        let decayed = last <= 1e-3 * s_norm;
        if q.holds != decayed || q.holds != label {
            mismatches += 1;
        }
        ev = ev
            .flag(&format!("{key}_criterion"), q.holds)
            .num(&format!("{key}_ratio_at_m_max"), relative(last, s_norm));
    }
    Ok(Outcome::check(mismatches == 0, ev.count("mismatches", mismatches)))
}

fn rank_one_bt_invariance_claim(tr: &Trial<'_>) -> Result<Outcome> {
    let (x, y) = need_rank_one!(tr);
    let space = x.space().clone();
    let w = seeded_function(&space, tr.seed, SALT_W);
    let p = line_projection(&w)?;
    let id = LinOperator::identity(&space);
    let mut batch = Vec::new();
    for k in 0..3u64 {
        let a = random_operator(&space, (tr.seed ^ SALT_OPS).wrapping_add(2 * k));
        batch.push(&a - &(&(&p * &a) * &(&id - &p)));
        batch.push(random_operator(&space, (tr.seed ^ SALT_OPS).wrapping_add(2 * k + 1)));
    }
    let same = rank_one_bt_invariance(&w, &x, &y, &batch, tr.settings)?;
    let mut label_mismatch = 0usize;
    for (k, s) in batch.iter().enumerate() {
        if rank_one_bt_criterion(&x, &w, s, tr.settings)? != (k % 2 == 0) {
            label_mismatch += 1;
        }
    }
    Ok(Outcome::check(
        same && label_mismatch == 0,
        Evidence::new()
            .flag("same_selection", same)
            .count("batch", batch.len())
            .count("label_mismatches", label_mismatch),
    ))
}

fn rank_one_in_bt_product(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let f = seeded_function(t.space(), tr.seed, SALT_F);
    let g = seeded_function(t.space(), tr.seed, SALT_G);
    let closed = rank_one_in_bt_wce(&t, &f, &g, tr.settings)?;
    let direct = bt_member_definitional(&RmFamily::wce(&t), &rank_one(&f, &g)?, tr.settings)?;
    let err = max_of(
        closed
            .evidence
            .iter()
            .zip(&direct.evidence)
            .map(|(a, b)| (a.1 - b.1).abs() / b.1.max(1.0)),
    );
    Ok(Outcome::check(
        err <= 1e-8,
        Evidence::new()
            .num("max_relative_error", err)
            .text("verdict", format!("{:?}", closed.verdict)),
    ))
}

fn rank_one_in_bt_printed(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let (_, d) = decompose(tr)?;
    let mut pairs = vec![(
        seeded_function(t.space(), tr.seed, SALT_F),
        seeded_function(t.space(), tr.seed, SALT_G),
    )];
    if let Some(h) = d.h1.basis().into_iter().next() {
        pairs.push((h.clone(), h));
    }
    let (mut mismatches, mut inconclusive) = (0usize, 0usize);
    for (f, g) in &pairs {
        let v = rank_one_in_bt_wce(&t, f, g, tr.settings)?;
        match v.verdict {
            Verdict::Inconclusive => inconclusive += 1,
            verdict => {
                if (verdict == Verdict::Member) != v.criterion_flags["printed_form_bounded"] {
                    mismatches += 1;
                }
            }
        }
    }
    let ev = Evidence::new()
        .count("pairs", pairs.len())
        .count("mismatches", mismatches)
        .count("inconclusive", inconclusive);
    Ok(if mismatches > 0 {
        Outcome::check(false, ev)
    } else if inconclusive > 0 {
        Outcome::skip("sampled verdict inconclusive", ev)
    } else {
        Outcome::check(true, ev)
    })
}

/// Rank of `M_w E M_u` counted block by block: a block contributes one
/// dimension when both `u` and `w` are nonzero on it.
fn combinatorial_rank(t: &WceOp) -> usize {
    t.partition()
        .blocks()
        .iter()
        .filter(|b| {
            b.iter().any(|&i| t.u().get(i).norm() > 0.0) && b.iter().any(|&i| t.w().get(i).norm() > 0.0)
        })
        .count()
}

fn majorize_kernel(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    let a = t.matrix();
    let space = t.space().clone();
    let b = random_operator(&space, tr.seed ^ SALT_OPS);
    let factored = &b * a;
    let random = random_operator(&space, (tr.seed ^ SALT_OPS).wrapping_add(1));
    let injective = combinatorial_rank(&t) == space.dim();
    let b_norm = tr.norm(&b)?;

    let f = majorizes(a, &factored, tr.settings)?;
    let r = majorizes(a, &random, tr.settings)?;
    let f_const = f.constant.unwrap_or(f64::INFINITY);
    let factored_ok = f.holds && f.spot_violations == 0 && f_const <= b_norm * (1.0 + 1e-8);
    let random_ok = r.holds == injective
        && r.spot_violations == 0
        && (r.holds
            || r.witness.as_ref().is_some_and(|h| {
                a.apply(h).norm() <= 1e-8 * tr.norm(a).unwrap_or(0.0) * h.norm()
                    && random.apply(h).norm() > 0.0
            }));
    Ok(Outcome::check(
        factored_ok && random_ok,
        Evidence::new()
            .flag("factored_majorized", f.holds)
            .num("factored_constant", f_const)
            .num("factor_norm", b_norm)
            .count("factored_spot_violations", f.spot_violations)
            .flag("random_majorized", r.holds)
            .flag("t_injective", injective)
            .count("random_spot_violations", r.spot_violations),
    ))
}

fn implication_outcome(results: &[Implication]) -> Outcome {
    let violated = results.iter().filter(|i| !i.is_true()).count();
    let vacuous = results.iter().filter(|i| matches!(i, Implication::Vacuous)).count();
    let worst = max_of(results.iter().map(|i| match i {
        Implication::Holds { constant } => *constant,
        _ => 0.0,
    }));
    Outcome::check(
        violated == 0,
        Evidence::new()
            .count("checked", results.len())
            .count("violated", violated)
            .count("vacuous", vacuous)
            .num("largest_constant", worst),
    )
}

fn majorize_qt_wce(tr: &Trial<'_>) -> Result<Outcome> {
    let (t, d) = decompose(tr)?;
    if !is_nonneg(t.u()) {
        return Ok(Outcome::skip("requires u >= 0", Evidence::new()));
    }
    let ops = qt_test_operators(&d, tr.seed ^ SALT_OPS, 5);
    let mut results = Vec::new();
    for (_, s) in labelled(&ops) {
        match qt_majorization_suite(&t, s, tr.settings) {
            Ok(i) => results.push(i),
            Err(Error::Usage(msg)) => return Ok(Outcome::skip(&msg, Evidence::new())),
            Err(e) => return Err(e),
        }
    }
    Ok(implication_outcome(&results))
}

fn majorize_qt_rank_one(tr: &Trial<'_>) -> Result<Outcome> {
    let (x, y) = need_rank_one!(tr);
    let space = x.space().clone();
    let p = line_projection(&y)?;
    let id = LinOperator::identity(&space);
    let mut results = Vec::new();
    for k in 0..5u64 {
        let a = random_operator(&space, (tr.seed ^ SALT_OPS).wrapping_add(k));
        let member = &(&(&id - &p) * &a) * &p;
        results.push(rank_one_majorization(&x, &y, &member, tr.settings)?);
        results.push(rank_one_majorization(&x, &y, &a, tr.settings)?);
    }
    Ok(implication_outcome(&results))
}

fn closed_range(tr: &Trial<'_>) -> Result<Outcome> {
    let t = tr.wce();
    if !is_nonneg(t.u()) {
        return Ok(Outcome::skip("requires u >= 0", Evidence::new()));
    }
    let Some(delta) = natural_delta(&t, tr.settings) else {
        return Ok(Outcome::skip("E(u) vanishes identically", Evidence::new()));
    };
    let e_mu = t.e_mu();
    let sv = singular_values(&e_mu);
    let top = sv.first().copied().unwrap_or(0.0);
    let smallest = sv
        .iter()
        .copied()
        .filter(|&s| s > tr.settings.tol.rank * top)
        .fold(f64::INFINITY, f64::min);
    let rank = kernel_with(&e_mu, tr.settings.tol.rank).complement().dim();
    Ok(Outcome::check(
        smallest >= delta * (1.0 - 1e-9),
        Evidence::new()
            .num("delta", delta)
            .num("smallest_nonzero_singular_value", smallest)
            .count("rank", rank),
    ))
}
