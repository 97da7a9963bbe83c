use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use duplex_core::experiment::output::{
    write_dot, write_error_csv, write_exponents_csv, write_json, write_stability_csv, write_trajectory_csv, OutputPaths,
};
use duplex_core::experiment::{
    compat_report, find_pathways, lyapunov_report, patterns_report, run_switching, sweep, Experiment, Overrides,
    PathwaysReport, SegmentVerdict,
};
use duplex_core::stability::ClusterExponent;
use duplex_core::Result;

#[derive(Parser)]
#[command(name = "duplex", version, about = "Cluster patterns in driven duplex Hindmarsh-Rose networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the symmetry-induced patterns of both layers.
    Patterns(Common),
    /// Compatibility classes, duplex clusters and pattern invariance.
    Compat(Common),
    /// Integrate the network and detect patterns before and after the switch.
    Simulate(Common),
    /// Transverse Lyapunov exponents of one pattern.
    Lyapunov(Common),
    /// Stability map over an (alpha, sigma) grid.
    Sweep(Common),
    /// Search for transitions between bottom patterns.
    Pathways(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn experiment(&self) -> Result<Experiment> {
        let overrides = Overrides {
            alpha: self.alpha,
            sigma: self.sigma,
            seed: self.seed,
        };
        Experiment::from_path(&self.config, &overrides)
    }
}

fn wrote(path: &Path) {
    log::info!("wrote {}", path.display());
}

fn print_segment(name: &str, s: &SegmentVerdict) {
    println!(
        "{name} [{:.1}, {:.1}]: bottom {} top {}",
        s.window[0], s.window[1], s.bottom.label, s.top.label
    );
}

fn print_exponent(c: &ClusterExponent) {
    let nodes: Vec<String> = c.cluster.nodes.iter().map(|n| n.to_string()).collect();
    println!(
        "{}{{{}}}  lambda {:+.5}  own {:+.5}{}",
        c.cluster.layer.suffix(),
        nodes.join(","),
        c.lambda,
        c.own_lambda,
        if c.converged { "" } else { "  (not converged)" }
    );
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Patterns(c) => {
            let exp = c.experiment()?;
            let report = patterns_report(&exp);
            for layer in [&report.top, &report.bottom] {
                println!("{:?} layer, |Aut| = {}", layer.layer, layer.group_order);
                for p in &layer.patterns {
                    println!("  {:<6} {}", p.label, p.letters);
                }
            }
            let path = OutputPaths::new(&exp.config).file("_patterns.json");
            write_json(&path, &report)?;
            wrote(&path);
        }
        Command::Compat(c) => {
            let exp = c.experiment()?;
            let report = compat_report(&exp)?;
            println!("|H_T| = {}, |H_B| = {}", report.h_top_order, report.h_bottom_order);
            println!("duplex top clusters    {:?}", report.duplex_top);
            println!("duplex bottom clusters {:?}", report.duplex_bottom);
            for p in &report.bottom_patterns {
                println!(
                    "  {:<6} {}",
                    p.label,
                    if p.invariant { "invariant" } else { "not invariant" }
                );
            }
            let path = OutputPaths::new(&exp.config).file("_compat.json");
            write_json(&path, &report)?;
            wrote(&path);
        }
        Command::Simulate(c) => {
            let exp = c.experiment()?;
            let run = run_switching(&exp)?;
            let r = &run.report;
            if let Some(w) = &r.switch.warning {
                log::warn!("{w}");
            }
            if let Some(pre) = &r.pre {
                print_segment("pre", pre);
            }
            print_segment("post", &r.post);
            let paths = OutputPaths::new(&exp.config);
            let report_path = paths.file("_report.json");
            write_json(&report_path, r)?;
            wrote(&report_path);
            if exp.config.output.trajectory {
                let p = paths.file("_trajectory.csv");
                write_trajectory_csv(&p, &run.trajectory)?;
                wrote(&p);
            }
            for (suffix, series) in [("_errors_bottom.csv", &run.bottom_errors), ("_errors_top.csv", &run.top_errors)] {
                let p = paths.file(suffix);
                write_error_csv(&p, series)?;
                wrote(&p);
            }
        }
        Command::Lyapunov(c) => {
            let exp = c.experiment()?;
            let report = lyapunov_report(&exp)?;
            println!("pattern {}", report.pattern);
            report.exponents.clusters.iter().for_each(print_exponent);
            let paths = OutputPaths::new(&exp.config);
            let p = paths.file("_lyapunov.json");
            write_json(&p, &report)?;
            wrote(&p);
            let p = paths.file("_lyapunov.csv");
            write_exponents_csv(&p, &report.exponents)?;
            wrote(&p);
        }
        Command::Sweep(c) => {
            let exp = c.experiment()?;
            let report = sweep(&exp)?;
            for r in &report.map.records {
                println!(
                    "alpha {:<6} sigma {:<6} {:<6} {}",
                    r.alpha,
                    r.sigma,
                    r.pattern,
                    if r.stable { "stable" } else { "unstable" }
                );
            }
            let paths = OutputPaths::new(&exp.config);
            let p = paths.file("_sweep.json");
            write_json(&p, &report)?;
            wrote(&p);
            let p = paths.file("_stability.csv");
            write_stability_csv(&p, &report.map)?;
            wrote(&p);
        }
        Command::Pathways(c) => {
            let exp = c.experiment()?;
            let graph = find_pathways(&exp)?;
            for e in &graph.edges {
                println!("{} -> {}  (alpha {}, sigma {})", e.from, e.to, e.alpha, e.sigma);
            }
            for [f, t] in &graph.missing {
                println!("missing {f} -> {t}");
            }
            let paths = OutputPaths::new(&exp.config);
            let p = paths.file("_pathways.dot");
            write_dot(&p, &graph)?;
            wrote(&p);
            let p = paths.file("_pathways.json");
            write_json(
                &p,
                &PathwaysReport {
                    config: exp.config.clone(),
                    graph,
                },
            )?;
            wrote(&p);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
