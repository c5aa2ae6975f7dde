//! Command-line interface.
//!
//! Exit codes: 0 success, 1 hard-claim failure, 2 usage or input error,
//! 3 numerical failure.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wce_sra::harness::audit::{catalog, run_audit, select_claims, AuditConfig};
use wce_sra::harness::report::{emit_report, parse_report, Format};
use wce_sra::harness::{load_instance, Instance, Profile};
use wce_sra::hilbert::{op_norm_with, LinOperator, MFunction, PowerIteration};
use wce_sra::majorize::majorizes;
use wce_sra::sra::{
    block_decompose, bt_member_definitional, bt_member_divergence_criterion,
    bt_member_kernel_criterion, qt_member, qt_member_divergence_criterion, rm_series, RmFamily,
};
use wce_sra::wce::polar;
use wce_sra::{Error, Result, Settings};

#[derive(Parser)]
#[command(name = "wce-sra", version, about = "Weighted conditional expectation operators and their spectral radius algebras")]
struct Cli {
    /// Relative singular value threshold for kernels and ranks.
    #[arg(long, global = true, env = "WCE_SRA_TOL_RANK")]
    tol_rank: Option<f64>,
    /// Relative threshold for invariance tests.
    #[arg(long, global = true, env = "WCE_SRA_TOL_INV")]
    tol_inv: Option<f64>,
    /// Largest exponent of the m-grid 1, 2, 4, ..., 2^M.
    #[arg(long, global = true, env = "WCE_SRA_M_MAX")]
    m_max: Option<u32>,
    /// Seed for audits and power-iteration starting vectors.
    #[arg(long, global = true, env = "WCE_SRA_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algebra {
    Bt,
    Qt,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Table,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Json => Format::Json,
            OutFormat::Table => Format::Table,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Summarize an instance file.
    Info { file: PathBuf },
    /// Closed-form R_m at the given m values, checked against the series.
    Rm {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        /// Include the R_m matrices.
        #[arg(long)]
        matrices: bool,
    },
    /// Membership of a named operator in B_T or Q_T.
    Membership {
        file: PathBuf,
        #[arg(long)]
        op: String,
        #[arg(long, value_enum)]
        algebra: Algebra,
    },
    /// Closed-form Aluthge transform against the polar-decomposition oracle.
    Aluthge { file: PathBuf },
    /// Whether operator T majorizes operator S.
    Majorize {
        file: PathBuf,
        #[arg(long)]
        t: String,
        #[arg(long)]
        s: String,
    },
    /// Audit registered claims on seeded random instances.
    Audit {
        /// `all` or a comma-separated list of claim ids.
        #[arg(long, default_value = "all")]
        claims: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Draw every instance from this profile instead of each claim's own.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// List the claim catalog and exit.
        #[arg(long)]
        list: bool,
    },
    /// Re-render a JSON audit report (from FILE or stdin).
    Report {
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: OutFormat,
    },
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut s = Settings::default();
    let positive = |v: f64, name: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Usage(format!("--{name} must be positive")))
        }
    };
    if let Some(v) = cli.tol_rank {
        s.tol.rank = positive(v, "tol-rank")?;
    }
    if let Some(v) = cli.tol_inv {
        s.tol.inv = positive(v, "tol-inv")?;
    }
    if let Some(v) = cli.m_max {
        if v > 40 {
            return Err(Error::Usage("--m-max must be at most 40".into()));
        }
        s.m_max_exp = v;
    }
    if let Some(v) = cli.seed {
        s.seed = v;
    }
    Ok(s)
}

fn c(z: wce_sra::hilbert::C64) -> Value {
    json!([z.re, z.im])
}

fn fvals(f: &MFunction) -> Value {
    Value::Array(f.values().iter().map(|&z| c(z)).collect())
}

fn matrix(a: &LinOperator) -> Value {
    let m = a.matrix();
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| c(m[(i, j)])).collect()))
            .collect(),
    )
}

fn num(x: f64) -> Value {
    wce_sra::harness::audit::json_number(x)
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).expect("values serialize");
    writeln!(out).map_err(io_error("stdout"))
}

fn io_error(what: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Parse {
        location: what.to_string(),
        message: e.to_string(),
    }
}

fn params(s: &Settings) -> PowerIteration {
    PowerIteration::from_tolerances(&s.tol, s.seed)
}

fn info(inst: &Instance, s: &Settings) -> Result<Value> {
    let t = inst.wce();
    let d = block_decompose(&t, &s.tol)?;
    Ok(json!({
        "atoms": inst.space().dim(),
        "weights": inst.space().weights(),
        "blocks": inst.partition.blocks(),
        "digest": inst.digest(),
        "norm": num(t.norm()),
        "spectral_radius": num(t.spectral_radius()),
        "e_u2": fvals(t.e_u2()),
        "e_w2": fvals(t.e_w2()),
        "e_uw": fvals(t.e_uw()),
        "peak_atoms": t.peak_atoms(s.tol.peak),
        "h1_dim": d.h1.dim(),
        "h2_dim": d.h2.dim(),
        "divergent_dim": d.divergent.dim(),
        "operators": inst.operators.keys().collect::<Vec<_>>(),
        "rank_one": inst.rank_one.is_some(),
    }))
}

fn rm(inst: &Instance, ms: &[u64], matrices: bool, s: &Settings) -> Result<Value> {
    let t = inst.wce();
    let fam = RmFamily::wce(&t);
    let p = params(s);
    let mut rows = Vec::new();
    for &m in ms {
        if m == 0 {
            return Err(Error::Usage("--m values start at 1".into()));
        }
        let r = fam.r_m(m);
        let ri = fam.r_m_inv(m);
        let series = rm_series(t.matrix(), t.spectral_radius(), m, wce_sra::sra::rm::SERIES_MAX_TERMS)
            .map(|x| num(r.max_abs_diff(&x)))
            .unwrap_or(Value::Null);
        let mut row = json!({
            "m": m,
            "d_m": num(fam.d(m)),
            "max_q": num(fam.max_q(m)),
            "norm": num(op_norm_with(&r, &p)?),
            "inverse_norm": num(op_norm_with(&ri, &p)?),
            "series_max_entry_error": series,
        });
        if matrices {
            row["r_m"] = matrix(&r);
            row["r_m_inv"] = matrix(&ri);
        }
        rows.push(row);
    }
    Ok(Value::Array(rows))
}

fn membership(inst: &Instance, op: &str, algebra: Algebra, s: &Settings) -> Result<Value> {
    let t = inst.wce();
    let op_s = inst.operator(op)?;
    let evidence = |e: &[(u64, f64)]| Value::Array(e.iter().map(|&(m, g)| json!([m, num(g)])).collect());
    Ok(match algebra {
        Algebra::Bt => {
            let v = bt_member_definitional(&RmFamily::wce(&t), &op_s, s)?;
            json!({
                "operator": op,
                "algebra": "bt",
                "kernel_criterion": bt_member_kernel_criterion(&t, &op_s, s)?,
                "divergence_criterion": bt_member_divergence_criterion(&t, &op_s, s)?,
                "sampled_verdict": format!("{:?}", v.verdict),
                "evidence": evidence(&v.evidence),
            })
        }
        Algebra::Qt => {
            let q = qt_member(&t, &op_s, s)?;
            json!({
                "operator": op,
                "algebra": "qt",
                "structural_criterion": q.holds,
                "divergence_criterion": qt_member_divergence_criterion(&t, &op_s, s)?,
                "flags": q.verdict.criterion_flags,
                "sampled_verdict": format!("{:?}", q.verdict.verdict),
                "evidence": evidence(&q.verdict.evidence),
            })
        }
    })
}

fn aluthge(inst: &Instance, s: &Settings) -> Result<Value> {
    let t = inst.wce();
    let closed = t.aluthge(s.tol.supp);
    let oracle = polar(t.matrix(), s.tol.rank)?.aluthge();
    let at = t.aluthge_op(s.tol.supp);
    Ok(json!({
        "w_tilde": fvals(at.w()),
        "oracle_norm_error": num(op_norm_with(&(&closed - &oracle), &params(s))?),
        "e_uw_error": num(at.e_uw().max_abs_diff(t.e_uw())),
        "spectral_radius": num(t.spectral_radius()),
        "spectral_radius_transform": num(at.spectral_radius()),
        "matrix": matrix(&closed),
    }))
}

fn majorize(inst: &Instance, t: &str, sname: &str, s: &Settings) -> Result<Value> {
    let r = majorizes(&inst.operator(t)?, &inst.operator(sname)?, s)?;
    Ok(json!({
        "t": t,
        "s": sname,
        "majorizes": r.holds,
        "constant": r.constant.map(num),
        "spot_violations": r.spot_violations,
        "witness": r.witness.as_ref().map(fvals),
    }))
}

fn write_out(bytes: &[u8], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        }),
        None => std::io::stdout().lock().write_all(bytes).map_err(io_error("stdout")),
    }
}

fn run(cli: Cli) -> Result<i32> {
    let s = settings(&cli)?;
    match &cli.command {
        Command::Info { file } => print_json(&info(&load_instance(file)?, &s)?)?,
        Command::Rm { file, m, matrices } => print_json(&rm(&load_instance(file)?, m, *matrices, &s)?)?,
        Command::Membership { file, op, algebra } => {
            print_json(&membership(&load_instance(file)?, op, *algebra, &s)?)?
        }
        Command::Aluthge { file } => print_json(&aluthge(&load_instance(file)?, &s)?)?,
        Command::Majorize { file, t, s: sname } => {
            print_json(&majorize(&load_instance(file)?, t, sname, &s)?)?
        }
        Command::Audit {
            claims,
            trials,
            profile,
            format,
            out,
            list,
        } => {
            if *list {
                let mut text = String::new();
                for c in catalog() {
                    let kind = if c.hard { "hard" } else { "soft" };
                    text.push_str(&format!("{:<32} {:<12} {kind}  {}\n", c.id, c.profile, c.statement));
                }
                write_out(text.as_bytes(), None)?;
                return Ok(0);
            }
            let config = AuditConfig {
                claims: select_claims(claims)?,
                trials: *trials,
                seed: s.seed,
                profile: profile.as_deref().map(str::parse::<Profile>).transpose()?,
            };
            let report = run_audit(&config, &s);
            write_out(&emit_report(&report, (*format).into()), out.as_ref())?;
            return Ok(report.exit_status());
        }
        Command::Report { file, format } => {
            let (text, origin) = match file {
                Some(path) => (
                    std::fs::read_to_string(path).map_err(|e| Error::Parse {
                        location: path.display().to_string(),
                        message: e.to_string(),
                    })?,
                    path.display().to_string(),
                ),
                None => {
                    let mut buf = String::new();
                    std::io::stdin().read_to_string(&mut buf).map_err(io_error("stdin"))?;
                    (buf, "stdin".to_string())
                }
            };
            let report = parse_report(&text, &origin)?;
            write_out(&emit_report(&report, (*format).into()), None)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
