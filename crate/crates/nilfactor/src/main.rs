//! Batch command-line surface: parse a run spec, execute one command, emit a
//! JSON artifact (stdout or --out) plus a short human summary on stderr.
//!
//! Exit codes: 0 = all requested verifications pass, 2 = spec error,
//! 3 = invariant violation inside the library, 4 = verification failure.

use clap::{Parser, Subcommand};
use nilfactor::equidist::{
    character_sum_estimate, direct_defect, replay_witness, total_verdict, EquidistOptions,
    ProgressionSpec,
};
use nilfactor::factor::{build_tree, factorise_once};
use nilfactor::io::{
    factorisation_to_dto, precision_bits, reverify_tree, tree_to_dto, GroupDto, IoError, RunSpec,
    TreeDto,
};
use nilfactor::subgroup::Chart;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nilfactor",
    about = "Factorise polynomial sequences on nilmanifolds into smooth, \
             equidistributed and rational parts, with verifiable reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure the equidistribution defect of the sequence; with "delta" in
    /// the spec, also decide the total-equidistribution verdict.
    Equidist(CommonArgs),
    /// Run one factorisation step g = ε·g′·γ and certify its parts.
    Factorise(CommonArgs),
    /// Build the full factorisation tree and verify every leaf.
    Tree(CommonArgs),
    /// Re-verify a stored tree file (pass the tree JSON as --spec).
    Verify(CommonArgs),
    /// Brute-force oracle: defect sweep, analytic envelope and witness
    /// replay, for cross-validation of reports.
    Oracle(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Input file: a run spec (equidist/factorise/tree/oracle) or a stored
    /// tree (verify).
    #[arg(long)]
    spec: PathBuf,
    /// Write the JSON artifact here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Force certified (fully enumerated) measurements.
    #[arg(long)]
    certified: bool,
}

#[derive(Serialize)]
struct ReportEnvelope<T: Serialize> {
    format: &'static str,
    command: &'static str,
    precision_bits: u32,
    seed: u64,
    certified: bool,
    spec: RunSpec,
    #[serde(flatten)]
    payload: T,
}

fn load_spec(args: &CommonArgs) -> Result<RunSpec, IoError> {
    let text = std::fs::read_to_string(&args.spec)?;
    let mut spec = RunSpec::parse(&text)?;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if args.certified {
        spec.certified = true;
    }
    Ok(spec)
}

fn emit(args: &CommonArgs, json: &str, human: &str) -> Result<(), IoError> {
    match &args.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    eprintln!("{human}");
    Ok(())
}

fn equidist_options(spec: &RunSpec) -> EquidistOptions {
    EquidistOptions {
        k_box: spec.config.k_box,
        q_max_override: spec.q_max,
        include_vertical: false,
        vertical_ell_max: 2,
        enum_cap: spec.config.enum_cap,
    }
}

fn progression_spec(spec: &RunSpec) -> ProgressionSpec {
    ProgressionSpec {
        q_max: spec.q_max.unwrap_or(8),
        min_len: spec.min_len.unwrap_or(1),
    }
}

#[derive(Serialize)]
struct EquidistPayload {
    report: nilfactor::equidist::EquidistReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<VerdictPayload>,
}

#[derive(Serialize)]
struct VerdictPayload {
    delta: f64,
    pass: bool,
    report: nilfactor::equidist::EquidistReport,
}

fn cmd_equidist(args: &CommonArgs) -> Result<i32, IoError> {
    let spec = load_spec(args)?;
    let group = spec.build_group()?;
    let seq = spec.build_sequence(&group)?;
    let chart = Chart::ambient(group.clone()).map_err(IoError::Chart)?;
    let n = spec.t.unwrap_or(spec.n);
    let opts = equidist_options(&spec);
    let report = direct_defect(&chart, &seq, n, &opts, progression_spec(&spec))
        .map_err(nilfactor::factor::FactorError::from)?;
    let verdict = match spec.delta {
        None => None,
        Some(delta) => {
            let (pass, vrep) = total_verdict(&chart, &seq, n, delta, &opts)
                .map_err(nilfactor::factor::FactorError::from)?;
            Some(VerdictPayload {
                delta,
                pass,
                report: vrep,
            })
        }
    };
    let pass = verdict.as_ref().map(|v| v.pass).unwrap_or(true);
    let human = match &verdict {
        Some(v) => format!(
            "equidist: defect {:.6e} over {} characters; verdict at delta {:.6e}: {}",
            report.defect,
            report.family_size,
            v.delta,
            if v.pass { "PASS" } else { "FAIL" }
        ),
        None => format!(
            "equidist: defect {:.6e} over {} characters (witness {})",
            report.defect,
            report.family_size,
            report
                .witness
                .as_ref()
                .map(|w| format!("k = [{}], q = {}, r = {}", w.k.join(", "), w.q, w.r))
                .unwrap_or_else(|| "absent".into()),
        ),
    };
    let envelope = ReportEnvelope {
        format: "nilfactor-report-v1",
        command: "equidist",
        precision_bits: precision_bits(),
        seed: spec.seed,
        certified: spec.certified,
        spec: spec.clone(),
        payload: EquidistPayload { report, verdict },
    };
    emit(args, &serde_json::to_string_pretty(&envelope)?, &human)?;
    Ok(if pass { 0 } else { 4 })
}

#[derive(Serialize)]
struct FactorisePayload {
    factorisation: nilfactor::io::FactorisationDto,
    pass: bool,
}

fn cmd_factorise(args: &CommonArgs) -> Result<i32, IoError> {
    let spec = load_spec(args)?;
    let group = spec.build_group()?;
    let seq = spec.build_sequence(&group)?;
    let n = spec.t.unwrap_or(spec.n);
    let a_exp = spec.a_exp.unwrap_or(spec.config.a_exp);
    let f = factorise_once(&seq, n, a_exp, spec.q0, &spec.config, spec.seed)?;
    let pass = f.issues.is_empty() && f.smoothness.ok_verbatim && f.rationality.ok;
    let human = format!(
        "factorise: subgroup dim {} of {}, scale M = {}, gamma period {}, \
         residual defect {:.6e}: {}",
        f.subgroup.dim(),
        group.dim,
        f.m_scale,
        f.q_gamma,
        f.equidist.defect,
        if pass { "PASS" } else { "FAIL" }
    );
    let envelope = ReportEnvelope {
        format: "nilfactor-report-v1",
        command: "factorise",
        precision_bits: precision_bits(),
        seed: spec.seed,
        certified: spec.certified,
        spec: spec.clone(),
        payload: FactorisePayload {
            factorisation: factorisation_to_dto(&f),
            pass,
        },
    };
    emit(args, &serde_json::to_string_pretty(&envelope)?, &human)?;
    Ok(if pass { 0 } else { 4 })
}

fn cmd_tree(args: &CommonArgs) -> Result<i32, IoError> {
    let spec = load_spec(args)?;
    let group = spec.build_group()?;
    let seq = spec.build_sequence(&group)?;
    let tree = build_tree(&seq, &spec.tree_params(), &spec.config)?;
    let pass = tree.all_leaves_pass();
    let human = format!(
        "tree: height {}, {} leaves, final scale Q = {}: {}",
        tree.height,
        tree.leaf_count,
        tree.q_final,
        if pass { "PASS" } else { "FAIL" }
    );
    let dto = tree_to_dto(
        &tree,
        GroupDto {
            preset: spec.group.clone(),
            custom: spec.custom_group.clone(),
            degree: spec.degree(),
        },
    );
    emit(args, &serde_json::to_string_pretty(&dto)?, &human)?;
    Ok(if pass { 0 } else { 4 })
}

fn cmd_verify(args: &CommonArgs) -> Result<i32, IoError> {
    let text = std::fs::read_to_string(&args.spec)?;
    let dto: TreeDto = serde_json::from_str(&text)?;
    let report = reverify_tree(&dto)?;
    let human = format!(
        "verify: rebuild match {}, {} leaves checked: {}",
        report.rebuild_matches,
        report.leaf_checks.len(),
        if report.pass { "PASS" } else { "FAIL" }
    );
    let pass = report.pass;
    emit(args, &serde_json::to_string_pretty(&report)?, &human)?;
    Ok(if pass { 0 } else { 4 })
}

#[derive(Serialize)]
struct OraclePayload {
    report: nilfactor::equidist::EquidistReport,
    envelope_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness_replay: Option<f64>,
    replay_matches: bool,
}

fn cmd_oracle(args: &CommonArgs) -> Result<i32, IoError> {
    let spec = load_spec(args)?;
    let group = spec.build_group()?;
    let seq = spec.build_sequence(&group)?;
    let chart = Chart::ambient(group.clone()).map_err(IoError::Chart)?;
    let n = spec.t.unwrap_or(spec.n);
    let opts = equidist_options(&spec);
    let prog = progression_spec(&spec);
    let report = direct_defect(&chart, &seq, n, &opts, prog)
        .map_err(nilfactor::factor::FactorError::from)?;
    let estimate = character_sum_estimate(&chart, &seq, n, &opts, prog)
        .map_err(nilfactor::factor::FactorError::from)?;
    let witness_replay = match &report.witness {
        Some(w) => Some(
            replay_witness(&chart, &seq, n, w).map_err(nilfactor::factor::FactorError::from)?,
        ),
        None => None,
    };
    let replay_matches = match (witness_replay, report.witness.as_ref()) {
        (Some(v), Some(w)) => (v - w.value).abs() <= 1e-12 * (1.0 + w.value.abs()),
        _ => report.witness.is_none(),
    };
    let human = format!(
        "oracle: brute-force defect {:.6e}, analytic envelope {:.6e}, witness replay {}: {}",
        report.defect,
        estimate,
        witness_replay
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|| "n/a".into()),
        if replay_matches { "PASS" } else { "FAIL" }
    );
    let pass = replay_matches;
    let envelope = ReportEnvelope {
        format: "nilfactor-report-v1",
        command: "oracle",
        precision_bits: precision_bits(),
        seed: spec.seed,
        certified: spec.certified,
        spec: spec.clone(),
        payload: OraclePayload {
            report,
            envelope_estimate: estimate,
            witness_replay,
            replay_matches,
        },
    };
    emit(args, &serde_json::to_string_pretty(&envelope)?, &human)?;
    Ok(if pass { 0 } else { 4 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Equidist(a) => cmd_equidist(a),
        Command::Factorise(a) => cmd_factorise(a),
        Command::Tree(a) => cmd_tree(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
