mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use maxsec_core::certifier::{self, CertifyParams, CertifyStatus, ConfigBox};
use maxsec_core::config::FEAS_TOL;
use maxsec_core::cutratio::{cut_probability_fixed_order, RatioReport};
use maxsec_core::instances::{brute_force_opt, load_graph, load_solution, sdp_objective};
use maxsec_core::kestimate::estimate_mu_k_with;
use maxsec_core::rounding::{round_pipeline, Partition, DEFAULT_MAX_ATTEMPTS};
use maxsec_core::{Configuration, Error};

const EXIT_EXHAUSTED: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(name = "maxsec", version, about = "Max-3-Section rounding, ratio evaluation and certification")]
struct Cli {
    /// Where to write the run manifest (defaults next to the main output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate f, g and f/g for configurations read from a file.
    Ratio(RatioArgs),
    /// Run the branch-and-bound certifier, or audit an existing certificate.
    Certify(CertifyArgs),
    /// Round a vector solution on a graph and rebalance the result.
    Round(RoundArgs),
    /// Exact optimum of a small graph by enumeration.
    Brute(BruteArgs),
    /// Estimate the worst ratio of the k-part rounding by local search.
    EstimateK(EstimateArgs),
}

#[derive(Args, Serialize)]
struct RatioArgs {
    /// One configuration per line: x1 x2 x3 w1 w2 w3 a1 a2 a3 t1 t2 t3.
    file: PathBuf,
    /// Report the ratio of the variant that always generates parts in order.
    #[arg(long)]
    fixed_order: bool,
    /// Exit with status 3 when a configuration is infeasible.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Serialize)]
struct CertifyArgs {
    #[arg(long, default_value_t = 0.80)]
    rho: f64,
    #[arg(long, default_value_t = 0.01)]
    delta_prime: f64,
    #[arg(long, default_value_t = 0.05)]
    eta1: f64,
    #[arg(long, default_value_t = 0.25)]
    eta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    tau_num: f64,
    #[arg(long, default_value_t = 12)]
    max_depth: u32,
    /// Region file: `name lo hi` lines, or `center …` plus `half_width h`.
    #[arg(long)]
    region: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Certificate log path; survivors go to `<out>.survivors`.
    #[arg(long, default_value = "certificate.log")]
    out: PathBuf,
    /// Audit this certificate instead of running the search. Parameters
    /// recorded in the log header take precedence over the flags.
    #[arg(long)]
    audit: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct RoundArgs {
    graph: PathBuf,
    solution: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Number of independent pipeline runs.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: usize,
    /// Write the best partition found, one label per line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BruteArgs {
    graph: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    delta_prime: f64,
}

/// Exit status and a JSON summary for the manifest.
type Outcome = (u8, Value);

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => EXIT_PARSE,
        Error::Validation(_)
        | Error::Infeasible(_)
        | Error::InvalidInput(_)
        | Error::OutOfRange { .. }
        | Error::NoCanonicalImage => EXIT_VALIDATION,
        _ => EXIT_OTHER,
    }
}

fn read(path: &Path) -> maxsec_core::Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "undefined (g=0)".to_string(), |v| format!("{v:.6}"))
}

fn cmd_ratio(a: &RatioArgs) -> maxsec_core::Result<Outcome> {
    let configs = Configuration::parse_many(&read(&a.file)?)?;
    let mut rows = Vec::new();
    let mut any_infeasible = false;
    for (i, c) in configs.iter().enumerate() {
        let r = RatioReport::new(c);
        let fixed = cut_probability_fixed_order(c);
        let fixed_ratio = (r.g > 0.0).then(|| fixed / r.g);
        let report = c.feasibility_with_tol(FEAS_TOL);
        let headline = if a.fixed_order { fixed_ratio } else { r.ratio };
        println!("configuration {}", i + 1);
        println!("  f                  {:.6}", r.f);
        println!("  g                  {:.6}", r.g);
        match headline {
            Some(v) => println!("  ratio              {v:.6}"),
            None => println!("  ratio undefined (g=0)"),
        }
        println!("  fixed-order ratio  {}", fmt_ratio(fixed_ratio));
        println!("  marginal bound     {:.6}", r.lower_bound_marginal);
        if report.is_ok() {
            println!("  feasible           yes");
        } else {
            any_infeasible = true;
            println!("  feasible           NO");
            for v in &report.violations {
                println!("    {v}");
            }
        }
        rows.push(json!({
            "f": r.f,
            "g": r.g,
            "ratio": headline,
            "permuted_ratio": r.ratio,
            "fixed_order_ratio": fixed_ratio,
            "marginal_lower_bound": r.lower_bound_marginal,
            "violations": report.violations,
        }));
    }
    let code = if a.strict && any_infeasible { EXIT_VALIDATION } else { 0 };
    Ok((code, json!({ "configurations": rows })))
}

fn certify_params(a: &CertifyArgs) -> maxsec_core::Result<CertifyParams> {
    let region = a.region.as_deref().map(|p| ConfigBox::parse_region(&read(p)?)).transpose()?;
    Ok(CertifyParams {
        rho: a.rho,
        delta_prime: a.delta_prime,
        eta1: a.eta1,
        eta2: a.eta2,
        tau_num: a.tau_num,
        max_depth: a.max_depth,
        region,
        workers: a.workers,
    })
}

fn cmd_certify(a: &CertifyArgs) -> maxsec_core::Result<Outcome> {
    let flags = certify_params(a)?;
    if let Some(log_path) = &a.audit {
        let text = read(log_path)?;
        let log = certifier::parse_log(&text)?;
        let mut params = certifier::parse_log_params(&text)?.unwrap_or_else(|| flags.clone());
        params.workers = flags.workers;
        params.validate()?;
        let out = certifier::audit_certificate(&log, &params, a.probes, a.seed);
        println!("records            {}", log.len());
        println!("probes             {} ({} admissible)", out.probes, out.admissible_probes);
        for e in out.coverage_errors.iter().take(10) {
            println!("coverage error     {e}");
        }
        if let Some(w) = &out.witness {
            println!("witness            {w}");
        }
        println!("audit              {}", if out.passed() { "PASSED" } else { "FAILED" });
        let code = if out.passed() { 0 } else { EXIT_VALIDATION };
        return Ok((
            code,
            json!({
                "audit": out.passed(),
                "rho": params.rho,
                "delta_prime": params.delta_prime,
                "max_depth": params.max_depth,
                "records": log.len(),
                "probes": out.probes,
                "admissible_probes": out.admissible_probes,
                "coverage_errors": out.coverage_errors,
                "witness": out.witness.map(|w| w.to_string()),
            }),
        ));
    }
    let out = certifier::certify(&flags)?;
    fs::write(&a.out, certifier::write_log(&out.records, &flags))?;
    let survivors_path = {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".survivors");
        PathBuf::from(s)
    };
    if !out.survivors.is_empty() {
        let text: String = out.survivors.iter().map(|b| format!("{b}\n")).collect();
        fs::write(&survivors_path, text)?;
    }
    let st = &out.stats;
    println!("tiles              {}", st.tiles);
    println!("lp infeasible      {}", st.lp_infeasible);
    println!("ratio bound        {}", st.ratio_bound);
    println!("splits             {}", st.splits);
    println!("survivors          {}", st.survivors);
    let (label, code) = match out.status {
        CertifyStatus::Certified => ("CERTIFIED", 0),
        CertifyStatus::Exhausted => ("EXHAUSTED", EXIT_EXHAUSTED),
    };
    println!("status             {label}");
    println!("certificate        {}", a.out.display());
    if !out.survivors.is_empty() {
        println!("survivor boxes     {}", survivors_path.display());
    }
    Ok((
        code,
        json!({
            "status": label,
            "tiles": st.tiles,
            "lp_infeasible": st.lp_infeasible,
            "ratio_bound": st.ratio_bound,
            "splits": st.splits,
            "survivors": st.survivors,
            "certificate": a.out,
            "composed_bound": certifier::composed_bound(flags.rho, flags.delta_prime),
        }),
    ))
}

fn partition_text(p: &Partition) -> String {
    let mut s = format!("# k={} n={}\n", p.k, p.n());
    for l in &p.labels {
        s.push_str(&format!("{l}\n"));
    }
    s
}

fn cmd_round(a: &RoundArgs) -> maxsec_core::Result<Outcome> {
    let g = load_graph(&a.graph)?;
    let sol = load_solution(&a.solution)?;
    if a.seeds == 0 {
        return Err(Error::InvalidInput("--seeds must be positive".into()));
    }
    let sdp = sdp_objective(&g, &sol)?;
    let mut values = Vec::new();
    let mut best: Option<(f64, Partition)> = None;
    for s in 0..a.seeds {
        let out = round_pipeline(&sol, a.epsilon, a.max_attempts, a.seed.wrapping_add(s))?;
        let v = g.cut_value(&out.partition);
        values.push(v);
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, out.partition));
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (best_value, best_partition) = best.expect("seeds > 0");
    let ratio = (sdp > 0.0).then(|| mean / sdp);
    println!("runs               {}", a.seeds);
    println!("mean cut value     {mean:.6}");
    println!("best cut value     {best_value:.6}");
    println!("sdp objective      {sdp:.6}");
    println!("empirical ratio    {}", fmt_ratio(ratio));
    if let Some(p) = &a.out {
        fs::write(p, partition_text(&best_partition))?;
    }
    Ok((
        0,
        json!({
            "mean_cut": mean,
            "best_cut": best_value,
            "sdp_objective": sdp,
            "ratio": ratio,
            "values": values,
        }),
    ))
}

fn cmd_brute(a: &BruteArgs) -> maxsec_core::Result<Outcome> {
    let g = load_graph(&a.graph)?;
    let (opt, p) = brute_force_opt(&g)?;
    println!("optimum            {opt}");
    println!("partition          {:?}", p.labels);
    if let Some(out) = &a.out {
        fs::write(out, partition_text(&p))?;
    }
    Ok((0, json!({ "optimum": opt, "labels": p.labels })))
}

fn cmd_estimate_k(a: &EstimateArgs) -> maxsec_core::Result<Outcome> {
    let e = estimate_mu_k_with(a.k, a.starts, a.seed, a.delta_prime)?;
    let baseline = 1.0 - 1.0 / a.k as f64;
    let witness: Vec<String> = e.argmin.joint().iter().map(|v| format!("{v:.6}")).collect();
    println!("k  min_ratio  baseline  witness");
    println!("{}  {:.6}   {:.6}  {}", a.k, e.min_ratio, baseline, witness.join(" "));
    Ok((
        0,
        json!({
            "k": a.k,
            "min_ratio": e.min_ratio,
            "baseline": baseline,
            "witness": e.argmin.joint(),
        }),
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (recorder, out_path, result) = match &cli.command {
        Command::Ratio(a) => (manifest::Recorder::start("ratio", a, None), None, cmd_ratio(a)),
        Command::Certify(a) => {
            let out = match &a.audit {
                Some(log) => {
                    let mut s = log.as_os_str().to_owned();
                    s.push(".audit");
                    Some(PathBuf::from(s))
                }
                None => Some(a.out.clone()),
            };
            (manifest::Recorder::start("certify", a, Some(a.seed)), out, cmd_certify(a))
        }
        Command::Round(a) => (manifest::Recorder::start("round", a, Some(a.seed)), a.out.clone(), cmd_round(a)),
        Command::Brute(a) => (manifest::Recorder::start("brute", a, None), a.out.clone(), cmd_brute(a)),
        Command::EstimateK(a) => (manifest::Recorder::start("estimate-k", a, Some(a.seed)), None, cmd_estimate_k(a)),
    };
    let (code, summary) = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            (exit_code_for(&e), json!({ "error": e.to_string() }))
        }
    };
    let subcommand = recorder.subcommand;
    let path = cli.manifest.clone().unwrap_or_else(|| manifest::default_path(subcommand, out_path.as_deref()));
    let m = recorder.finish(i32::from(code), summary);
    if let Err(e) = manifest::write(&m, &path) {
        eprintln!("warning: could not write manifest {}: {e}", path.display());
    }
    ExitCode::from(code)
}
