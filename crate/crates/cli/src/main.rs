use std::path::PathBuf;
use std::process::ExitCode;

use cavfb_cli::plot::PlotOptions;
use cavfb_cli::{run, run_plot, CliError, Command, Options};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cavfb", version, about = "Cavity response with photothermal feedback: spectra, fits and checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (frequencies in Hz).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Frequency grid `start,stop,points[,log]` in Hz; overrides [sweep].
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Omit the `#` provenance comments.
    #[arg(long, global = true)]
    no_metadata: bool,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Input spectrum or table.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Record the generation time in the comments.
    #[arg(long, global = true)]
    timestamp: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Effective susceptibility, loop gain and in-loop noise on the grid.
    CavityResponse,
    /// Heterodyne spectrum of the mechanical sideband.
    Heterodyne,
    /// Phonon spectra S_bb, S_b+b+ and S_xx.
    MechPsd,
    /// kappa_eff, damping, backaction limit and final occupancy.
    CoolingReport,
    /// Homodyne squeezing spectra at the optimal angles.
    Squeezing,
    /// Heat-diffusion response and its pole fit.
    ThermalResponse,
    /// Fit a coherent reflection spectrum (--input).
    FitResponse,
    /// Fit kappa_eff against photon number (--input table).
    FitLinewidthSeries,
    /// Fit a Lorentzian sideband (--input).
    FitMech,
    /// Anchored noise thermometry (--input table).
    Thermometry,
    /// Compare closed forms against the brute-force solver.
    OracleCheck,
    /// Render a spectrum file (--input) as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct PlotArgs {
    /// Comma-separated channel labels to draw (default: all).
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<String>>,
    #[arg(long)]
    log_x: bool,
    #[arg(long)]
    log_y: bool,
    /// Draw a dashed reference line at this level.
    #[arg(long, allow_hyphen_values = true)]
    reference: Option<f64>,
    #[arg(long)]
    title: Option<String>,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.kind.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
            let details = msg.lines().skip(1).map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect();
            return fail(&CliError::usage(first).with_details(details));
        }
    };
    let c = cli.common;
    let opts = Options {
        config: c.config,
        out: c.out,
        grid: c.grid,
        no_metadata: c.no_metadata,
        jobs: c.jobs,
        input: c.input,
        timestamp: c.timestamp,
    };
    let cmd = match cli.command {
        Cmd::Plot(p) => {
            let Some(input) = opts.input.as_deref() else {
                return fail(&CliError::usage("plot needs --input"));
            };
            let style = PlotOptions {
                channels: p.channels,
                log_x: p.log_x,
                log_y: p.log_y,
                reference: p.reference,
                title: p.title,
            };
            return match run_plot(input, &opts.out, &style) {
                Ok(path) => {
                    println!("{}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            };
        }
        Cmd::CavityResponse => Command::CavityResponse,
        Cmd::Heterodyne => Command::Heterodyne,
        Cmd::MechPsd => Command::MechPsd,
        Cmd::CoolingReport => Command::CoolingReport,
        Cmd::Squeezing => Command::Squeezing,
        Cmd::ThermalResponse => Command::ThermalResponse,
        Cmd::FitResponse => Command::FitResponse,
        Cmd::FitLinewidthSeries => Command::FitLinewidthSeries,
        Cmd::FitMech => Command::FitMech,
        Cmd::Thermometry => Command::Thermometry,
        Cmd::OracleCheck => Command::OracleCheck,
    };
    match run(cmd, &opts) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
