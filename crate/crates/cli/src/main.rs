//! `ghzt`: run, verify, tabulate, audit and draw controlled teleportation
//! protocols.
//!
//! Exit codes: 0 success, 1 assertion or verification failure, 2 usage error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ghzt_core::protocol::{parse_allocation, Event, Transcript};
use ghzt_core::verify::{self, Stage};
use ghzt_core::viz::{self, SvgStyle};
use ghzt_core::{random_message, run_protocol, BitId, MessageState, Mode, ProtocolConfig};

const FIDELITY_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "ghzt", version, about = "Controlled quantum teleportation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute one seeded protocol run and report the receiver's fidelity.
    Run(RunArgs),
    /// Check the receiver's corrections on every measurement branch.
    Verify(VerifyArgs),
    /// Print the post-measurement state table.
    Table(TableArgs),
    /// Run many seeded trials on random messages and summarize fidelities.
    Audit(AuditArgs),
    /// Draw Hinton diagrams of the input and output density matrices.
    Hinton(HintonArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Md,
    Svg,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Number of participants.
    #[arg(short = 'm')]
    m: Option<usize>,
    /// Number of message qubits.
    #[arg(short = 'n')]
    n: Option<usize>,
    /// standard, distributed or minimal.
    #[arg(long, default_value = "standard")]
    mode: String,
    /// Receiving participant (default: the last one).
    #[arg(long)]
    receiver: Option<usize>,
    /// Message-qubit holders as "participant:qubit,..."; unlisted qubits go to participant 0.
    #[arg(long)]
    allocation: Option<String>,
    #[arg(long, env = "GHZT_SEED", default_value_t = 0)]
    seed: u64,
    /// Classical bits the receiver never gets, e.g. "c2,c5".
    #[arg(long, value_delimiter = ',')]
    withhold: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Message state JSON; defaults to a random message drawn from the seed.
    #[arg(long)]
    message: Option<PathBuf>,
    /// Write the transcript JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Exit 0 even when the fidelity check fails.
    #[arg(long)]
    no_assert: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Without -m/-n, sweeps m in 3..=5 and n in 1..=2.
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// pre (Bell outcomes only) or post (after the controllers).
    #[arg(long, default_value = "post")]
    stage: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Write the JSON report here.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct HintonArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Transcript to draw; without it a fresh run is made from the flags.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Characters per row of the text rendering.
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[arg(long, default_value_t = 40.0)]
    cell_size: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

impl ConfigArgs {
    fn build(&self, m: usize, n: usize) -> anyhow::Result<ProtocolConfig> {
        let mode: Mode = self.mode.parse()?;
        let mut config = ProtocolConfig::new(m, n).with_mode(mode).with_seed(self.seed);
        if let Some(r) = self.receiver {
            config = config.with_receiver(r);
        }
        if let Some(spec) = &self.allocation {
            config = config.with_allocation(parse_allocation(spec, n)?);
        }
        let withheld = self
            .withhold
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<BitId>())
            .collect::<Result<Vec<_>, _>>()?;
        config = config.withholding(withheld);
        config.plan()?;
        Ok(config)
    }

    fn single(&self) -> anyhow::Result<ProtocolConfig> {
        self.build(self.m.unwrap_or(3), self.n.unwrap_or(1))
    }
}

fn check_format(format: Format, allowed: &[Format], command: &str) -> anyhow::Result<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        bail!("--format {format:?} is not supported by `{command}`")
    }
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            let written = out.write_all(text.as_bytes()).and_then(|()| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    out.write_all(b"\n")
                }
            });
            match written {
                // A closed pipe (e.g. `| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<ExitCode> {
    check_format(args.format, &[Format::Text, Format::Json], "run")?;
    let config = args.config.single()?;
    let message = match &args.message {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            MessageState::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => random_message(config.n, config.seed)?,
    };
    let run = run_protocol(&config, &message)?;
    let json = run.transcript.to_json();
    if let Some(path) = &args.output {
        fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    let missing: Vec<String> = run
        .transcript
        .events
        .iter()
        .filter_map(|e| match e {
            Event::MissingClassicalBit { qubit, bit, .. } => Some(format!("{bit} (qubit {qubit})")),
            _ => None,
        })
        .collect();
    match args.format {
        Format::Json => emit(None, &json)?,
        _ => {
            println!("fidelity: {:.9}", run.fidelity);
            for m in &missing {
                println!("missing classical bit: {m}");
            }
        }
    }
    let ok = run.fidelity >= 1.0 - FIDELITY_TOL && missing.is_empty();
    Ok(status(ok || args.no_assert))
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<ExitCode> {
    check_format(args.format, &[Format::Text, Format::Json], "verify")?;
    let c = &args.config;
    let configs = match (c.m, c.n) {
        (None, None) => {
            let mut configs = Vec::new();
            for m in 3..=5 {
                for n in 1..=2 {
                    configs.push(c.build(m, n)?);
                }
            }
            configs
        }
        _ => vec![c.single()?],
    };
    let mut reports = Vec::new();
    for config in &configs {
        reports.push(verify::verify_corrections(config)?);
    }
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&reports)?,
        _ => reports
            .iter()
            .map(|r| {
                let mut line = format!(
                    "m={} n={} {}: {}/{} branches {}",
                    r.m,
                    r.n,
                    r.mode,
                    r.passing(),
                    r.branches_checked,
                    if r.passed() { "OK" } else { "FAILED" }
                );
                for f in &r.failures {
                    line.push_str(&format!("\n  failing branch {f}"));
                }
                line + "\n"
            })
            .collect(),
    };
    emit(args.output.as_deref(), &text)?;
    Ok(status(reports.iter().all(|r| r.passed())))
}

fn cmd_table(args: &TableArgs) -> anyhow::Result<ExitCode> {
    check_format(args.format, &[Format::Text, Format::Json, Format::Md], "table")?;
    let config = args.config.single()?;
    let stage: Stage = args.stage.parse()?;
    let table = verify::regen_table(&config, stage)?;
    let text = match args.format {
        Format::Json => table.to_json(),
        Format::Md => table.render_markdown(),
        _ => table.render_text(),
    };
    emit(args.output.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(args: &AuditArgs) -> anyhow::Result<ExitCode> {
    check_format(args.format, &[Format::Text, Format::Json], "audit")?;
    let config = args.config.single()?;
    let report = verify::fidelity_audit(&config, args.trials, config.seed)?;
    let json = report.to_json();
    if let Some(path) = &args.output {
        fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    match args.format {
        Format::Json => emit(None, &json)?,
        _ => println!(
            "m={} n={} {}: {} trials, min fidelity {:.9}, mean fidelity {:.9}",
            report.m, report.n, report.mode, report.trials, report.min, report.mean
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_hinton(args: &HintonArgs) -> anyhow::Result<ExitCode> {
    check_format(args.format, &[Format::Text, Format::Json, Format::Svg], "hinton")?;
    let transcript = match &args.from {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Transcript::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let config = args.config.single()?;
            let message = random_message(config.n, config.seed)?;
            run_protocol(&config, &message)?.transcript
        }
    };
    let rho_in = transcript.message.state().density_matrix();
    let rho_out = transcript
        .output_density()
        .ok_or_else(|| anyhow!("transcript has no result event"))??;
    let d_in = viz::build_hinton(&rho_in);
    let d_out = viz::build_hinton(&rho_out);
    if !(args.cell_size > 0.0) {
        bail!("--cell-size must be positive");
    }
    let text = match args.format {
        Format::Svg => {
            let style = SvgStyle {
                cell_size: args.cell_size,
                ..SvgStyle::default()
            };
            viz::render_svg_stack(&[("ρ_in", &d_in), ("ρ_out", &d_out)], &style)
        }
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "input": d_in,
            "output": d_out,
        }))?,
        _ => format!(
            "ρ_in\n{}\nρ_out\n{}",
            viz::render_text(&d_in, args.width),
            viz::render_text(&d_out, args.width)
        ),
    };
    emit(args.output.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Table(a) => cmd_table(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Hinton(a) => cmd_hinton(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
