use std::path::PathBuf;
use std::process::ExitCode;

use aofm::{cmd_channel, cmd_loopback, cmd_rx, cmd_sweep, cmd_tx, exit, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aofm", version, about = "Acoustic OFDM modem: transmit, simulate, receive")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Payload file to baseband IQ stream.
    Tx(Common),
    /// IQ stream through the multichannel channel model to a capture file.
    Channel(Common),
    /// Capture file to payload, gap map and report.
    Rx(Common),
    /// tx, channel and rx in one run.
    Loopback(Common),
    /// Grid of loopback runs to CSV and JSON tables.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn decode_status(failed: usize, total: usize) -> Result<(), CliError> {
    if failed > 0 {
        Err(CliError::Decode { failed, total })
    } else {
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Tx(a) => {
            let cfg = RunConfig::load(&a.config, a.seed)?;
            let s = cmd_tx(&cfg, &a.input, &a.out, a.report.as_deref())?;
            eprintln!("{} frames, {:.3} s airtime", s.frames, s.airtime_s);
        }
        Command::Channel(a) => {
            let cfg = RunConfig::load(&a.config, a.seed)?;
            let s = cmd_channel(&cfg, &a.input, &a.out, a.report.as_deref())?;
            eprintln!("{} channels x {} samples", s.channels, s.samples_per_channel);
        }
        Command::Rx(a) => {
            let cfg = RunConfig::load(&a.config, a.seed)?;
            let r = cmd_rx(&cfg, &a.input, &a.out, a.report.as_deref())?;
            eprintln!("{} frames, {} failed CRC", r.metrics.frames_total, r.metrics.frames_crc_failed);
            decode_status(r.metrics.frames_crc_failed, r.metrics.frames_total)?;
        }
        Command::Loopback(a) => {
            let cfg = RunConfig::load(&a.config, a.seed)?;
            let r = cmd_loopback(&cfg, &a.input, &a.out, a.report.as_deref())?;
            eprintln!("{} frames, {} failed CRC", r.metrics.frames_total, r.metrics.frames_crc_failed);
            decode_status(r.metrics.frames_crc_failed, r.metrics.frames_total)?;
        }
        Command::Sweep(a) => {
            let cfg = RunConfig::load(&a.config, a.seed)?;
            let rows = cmd_sweep(&cfg, &a.out)?;
            eprintln!("{} rows", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
