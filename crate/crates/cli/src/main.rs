use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use viscflow::refine::{refine, write_table, Axis};
use viscflow::run::{run, RunOptions};
use viscflow::scenario::Scenario;
use viscflow::HarnessError;

#[derive(Parser)]
#[command(name = "viscflow", version, about = "Level-I compressible viscous flow runs with energy audits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write CSV/JSON artifacts.
    Run {
        /// Scenario JSON file or preset name.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted KEY=VALUE applied to the scenario, e.g. numerics.dt=0.005.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Rerun a scenario along one axis and tabulate observed orders.
    Refine {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// On the dt axis, refine m like dt^(-1/2) alongside.
        #[arg(long)]
        couple_m: bool,
    },
    /// Evaluate the dissipative energy inequality on an external field file.
    Audit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a preset (with overrides) as scenario JSON.
    Show {
        #[arg(long)]
        scenario: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn out_dir(scn: &Scenario, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| scn.output.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out").join(&scn.name))
}

fn main_inner(cli: Cli) -> Result<i32, HarnessError> {
    match cli.cmd {
        Cmd::Run { scenario, out, overrides } => {
            let scn = Scenario::load(&scenario, &overrides)?;
            let dir = out_dir(&scn, out);
            let res = run(&scn, &RunOptions { out: Some(dir.clone()), excluded_mode: None })?;
            let s = &res.summary;
            println!("{}: {} ({} of {} steps, t = {})", s.scenario, s.status, s.steps_accepted, s.steps_requested, s.t_reached);
            for (k, v) in &s.monitors {
                println!("  {:<16} {} {:e}", k, if v.pass { "pass" } else { "FAIL" }, v.value);
            }
            if let Some(f) = &s.failure {
                eprintln!("{f}");
            }
            println!("artifacts in {}", dir.display());
            Ok(s.exit_code)
        }
        Cmd::Refine { scenario, out, overrides, axis, levels, couple_m } => {
            let scn = Scenario::load(&scenario, &overrides)?;
            let dir = out_dir(&scn, out);
            let t = refine(&scn, axis, levels, couple_m)?;
            std::fs::create_dir_all(&dir)?;
            write_table(&dir.join("refine.csv"), &t)?;
            std::fs::write(dir.join("refine.json"), serde_json::to_string_pretty(&t.rows)? + "\n")?;
            for r in &t.rows {
                println!(
                    "level {} value {} mass {:e} renorm {:e} w1 {:e} rel {:e}",
                    r.level, r.value, r.metrics.mass_residual_max, r.metrics.renorm_square_total, r.metrics.w1_total, r.metrics.rel_energy_final
                );
            }
            if let Some(f) = &t.failure {
                eprintln!("{f}");
            }
            Ok(t.exit_code())
        }
        Cmd::Audit { input, out } => {
            let s = viscflow::audit::audit_path(&input, &out)?;
            println!("audit: {} ({} levels, min slack {:e})", if s.pass { "pass" } else { "FAIL" }, s.levels, s.min_slack_rel);
            Ok(0)
        }
        Cmd::Show { scenario, overrides } => {
            let scn = Scenario::load(&scenario, &overrides)?;
            println!("{}", serde_json::to_string_pretty(&scn)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(c) => ExitCode::from(c as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
