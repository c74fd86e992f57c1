use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gestural::coupling::{phases_to_onsets, simulate_phases, solve_phases_ls, CouplingGraph, SolveMethod, DEFAULT_DT_S};
use gestural::diagnostics::{fmt6, AnalysisSettings, DEFAULT_PERMUTATIONS};
use gestural::dynamics::read_trajectories_csv;
use gestural::harness::{analyze_file, experiment_54, simulate_to_dir, ScenarioConfig};
use gestural::landmarks::{find_gesture, Direction};
use gestural::{Channel, Error, Result};

#[derive(Parser)]
#[command(name = "gestural", version, about = "Gesture simulation and kinematic timing diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write tokens, summary, plots and report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find gesture landmarks in one channel of a trajectory CSV.
    Parse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        channel: Channel,
        /// Search window as `start:end` in ms.
        #[arg(long, value_parser = parse_window)]
        window_ms: (f64, f64),
        #[arg(long)]
        direction: Direction,
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
    },
    /// Recompute diagnostics from a token CSV.
    Analyze {
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
        n_perm: usize,
    },
    /// Solve a coupling graph for relative phases and onsets.
    Plan {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_parser = parse_method, default_value = "ls")]
        method: SolveMethod,
    },
    /// Run the default scenario end to end.
    Demo {
        #[arg(long, default_value = "demo_out")]
        out: PathBuf,
    },
    /// Blending-only sweep, anti-phase alternative and eccentric timing.
    Exp54 {
        #[arg(long)]
        config: PathBuf,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected start:end")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad start `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad end `{b}`"))?;
    Ok((a, b))
}

fn parse_method(s: &str) -> std::result::Result<SolveMethod, String> {
    match s.to_ascii_lowercase().as_str() {
        "ls" => Ok(SolveMethod::LeastSquares),
        "osc" => Ok(SolveMethod::Oscillator),
        _ => Err(format!("unknown method `{s}` (ls or osc)")),
    }
}

fn data_file(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn print_summary(run: &gestural::harness::ScenarioRun) {
    let a = &run.report.analysis;
    for o in &a.classifications {
        match (&o.result, &o.error) {
            (Some(r), _) => println!(
                "{}: {} (slope {:.3}, r2 {:.3}, p {:.4})",
                o.condition,
                r.coordination,
                r.pooled.slope,
                r.pooled.r2,
                r.pooled.p_perm.unwrap_or(f64::NAN)
            ),
            (None, Some(e)) => println!("{}: not classified ({e})", o.condition),
            _ => {}
        }
    }
    if let Some(c) = a.lag_contrast {
        println!("lag contrast: {:.2} ms (p {:.4})", c.difference, c.p_perm);
    }
    if let Some(c) = a.tb_contrast_mm {
        println!("TB contrast: {:.3} mm (p {:.4})", c.difference, c.p_perm);
    }
    for p in &run.report.outputs {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = ScenarioConfig::read(&config)?;
            print_summary(&simulate_to_dir(&cfg, &out)?);
        }
        Command::Parse {
            input,
            channel,
            window_ms,
            direction,
            threshold,
        } => {
            let trajs = read_trajectories_csv(data_file(&input)?)?;
            let traj = trajs
                .get(&channel)
                .ok_or_else(|| Error::Data(format!("{} has no {channel} column", input.display())))?;
            let g = find_gesture(traj, window_ms, direction, threshold)?;
            println!("channel,onset_ms,target_ms,release_ms,offset_ms,pv_to,pv_away");
            println!(
                "{channel},{},{},{},{},{},{}",
                fmt6(g.onset_ms),
                fmt6(g.target_ms),
                fmt6(g.release_ms),
                fmt6(g.offset_ms),
                fmt6(g.peak_vel_to),
                fmt6(g.peak_vel_away)
            );
        }
        Command::Analyze {
            tokens,
            out,
            seed,
            n_perm,
        } => {
            let settings = AnalysisSettings {
                n_perm,
                seed,
                ..Default::default()
            };
            if !tokens.exists() {
                return Err(Error::Data(format!("{} not found", tokens.display())));
            }
            let a = analyze_file(&tokens, &settings, &out)?;
            for o in &a.classifications {
                if let Some(r) = &o.result {
                    println!("{}: {}", o.condition, r.coordination);
                }
            }
            println!("wrote {}", out.display());
        }
        Command::Plan { graph, method } => {
            let g = CouplingGraph::read(&graph)?;
            let solution = match method {
                SolveMethod::LeastSquares => solve_phases_ls(&g)?,
                // All-zero phases can sit on an unstable equilibrium, so relax
                // from the least-squares plan instead.
                SolveMethod::Oscillator => simulate_phases(&g, &solve_phases_ls(&g)?.phases, DEFAULT_DT_S, 60.0)?,
            };
            let onsets = phases_to_onsets(&solution, g.omega0_rad_s, 0.0)?;
            println!("node,psi_rad,onset_ms");
            for (node, psi) in &solution.phases {
                println!("{node},{},{}", fmt6(*psi), fmt6(onsets[node]));
            }
        }
        Command::Demo { out } => {
            print_summary(&simulate_to_dir(&ScenarioConfig::default(), &out)?);
        }
        Command::Exp54 { config, out } => {
            let cfg = ScenarioConfig::read(&config)?;
            let report = experiment_54(&cfg)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => {
                    fs::write(&path, json)?;
                    println!("wrote {}", path.display());
                }
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
