//! `mevrate`: simulate and analyse the dynamic MEV extraction-rate mechanism.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;
use error::CliError;

#[derive(Parser)]
#[command(name = "mevrate", version, about = "Dynamic MEV extraction-rate mechanism")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate one update rule and write the trace.
    Simulate(Common),
    /// Report liveness and convergence thresholds, attracting band and deviation bound.
    Thresholds(Common),
    /// Scan η or the tolerance range and record the long-run orbit.
    Bifurcate(Common),
    /// Find fixed points of iterated maps and classify their periods.
    Periods(Common),
    /// Search for a period-3-forcing configuration.
    ChaosWitness(Common),
    /// Run a regime, stress, burn or rule-comparison scenario.
    Scenario(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also render SVG plots.
    #[arg(long)]
    svg: bool,
    /// Override a config value, e.g. `--set simulate.eta=0.8`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

type Handler = fn(&config::RunConfig) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Thresholds(c) => (c, commands::thresholds),
        Command::Bifurcate(c) => (c, commands::bifurcate),
        Command::Periods(c) => (c, commands::periods),
        Command::ChaosWitness(c) => (c, commands::chaos_witness),
        Command::Scenario(c) => (c, commands::scenario),
    };
    let ov = Overrides {
        out: common.out.clone(),
        seed: common.seed,
        svg: common.svg,
        set: common.set.clone(),
    };
    let cfg = config::load(common.config.as_deref(), &ov)?;
    commands::prepare(&cfg)?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::Path;

    use super::*;

    fn invoke(args: &[&str], out: &Path) -> Result<(), CliError> {
        let out = out.to_string_lossy();
        let mut argv = vec!["mevrate"];
        argv.extend(args);
        argv.extend(["--out", &out]);
        run(Cli::try_parse_from(argv).unwrap())
    }

    fn code(r: Result<(), CliError>) -> u8 {
        r.map_or_else(|e| e.exit_code(), |_| 0)
    }

    fn write_config(dir: &Path, body: &str) -> String {
        let p = dir.join("input.json");
        fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }

    const UNIFORM: &str = r#""market": {"users": {"kind": "uniform", "lo": 0, "hi": 1},
        "miners": {"kind": "uniform", "lo": 0, "hi": 1}, "w": 1}"#;

    const NORMAL: &str = r#""market": {"users": {"kind": "truncated_normal", "mu": 0.4, "sigma2": 0.01},
        "miners": {"kind": "truncated_normal", "mu": 0.5, "sigma2": 0.01}, "w": 1.6}"#;

    #[test]
    fn simulate_writes_header_plus_steps_plus_one_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            &format!(r#"{{{UNIFORM}, "simulate": {{"eta": 0.5, "lambda0": 0.1, "steps": 1000}}}}"#),
        );
        let out = dir.path().join("out");
        invoke(&["simulate", "--config", &cfg], &out).unwrap();
        let text = fs::read_to_string(out.join("trace.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,lambda,delta,eta_t");
        assert_eq!(lines.len(), 1002);
        let last: f64 = lines[1001].split(',').nth(1).unwrap().parse().unwrap();
        assert!((last - 0.5).abs() < 1e-6);
        assert!(out.join("config.json").exists());
    }

    #[test]
    fn inadmissible_start_exits_3_and_names_range() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), &format!(r#"{{{UNIFORM}, "simulate": {{"lambda0": 1.5}}}}"#));
        let err = invoke(&["simulate", "--config", &cfg], &dir.path().join("out")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("[0, 1]"), "{err}");
    }

    #[test]
    fn unknown_key_exits_2_and_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), &format!(r#"{{{UNIFORM}, "simulate": {{"bogus": 1}}}}"#));
        let err = invoke(&["simulate", "--config", &cfg], &dir.path().join("out")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("simulate.bogus"), "{err}");
    }

    #[test]
    fn missing_market_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(code(invoke(&["thresholds"], &dir.path().join("out"))), 2);
    }

    #[test]
    fn set_overrides_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), &format!("{{{UNIFORM}}}"));
        let out = dir.path().join("out");
        invoke(
            &[
                "simulate",
                "--config",
                &cfg,
                "--set",
                "simulate.steps=20",
                "--set",
                "simulate.rule=\"plain\"",
            ],
            &out,
        )
        .unwrap();
        assert_eq!(fs::read_to_string(out.join("trace.csv")).unwrap().lines().count(), 22);
        assert!(fs::read_to_string(out.join("config.json"))
            .unwrap()
            .contains("\"plain\""));
    }

    #[test]
    fn thresholds_for_uniform_market() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            &format!(
                r#"{{{UNIFORM}, "thresholds": {{"eta": 1}}, "precision": {{"grid_n": 100000, "period_tol": 1e-10}}}}"#
            ),
        );
        let out = dir.path().join("out");
        invoke(&["thresholds", "--config", &cfg], &out).unwrap();
        let rec = fs::read_to_string(out.join("thresholds.txt")).unwrap();
        let get = |k: &str| -> String {
            rec.lines()
                .find_map(|l| l.strip_prefix(&format!("{k}=")))
                .unwrap_or_else(|| panic!("no {k} in {rec}"))
                .to_string()
        };
        assert_eq!(get("lambda_star").parse::<f64>().unwrap(), 0.5);
        assert_eq!(get("liveness_eta_max").parse::<f64>().unwrap(), 2.0);
        let conv: f64 = get("convergence_eta_max").parse().unwrap();
        assert!((conv - 3.8184).abs() < 1e-3, "{conv}");
        assert_eq!(get("attracting_lo").parse::<f64>().unwrap(), 0.25);
        assert_eq!(get("attracting_hi").parse::<f64>().unwrap(), 0.75);
        assert!(get("deviation_note").starts_with("absent"));
    }

    #[test]
    fn bifurcate_default_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), &format!("{{{NORMAL}}}"));
        let out = dir.path().join("out");
        invoke(&["bifurcate", "--config", &cfg, "--svg"], &out).unwrap();
        let text = fs::read_to_string(out.join("bifurcation.csv")).unwrap();
        assert_eq!(text.lines().next(), Some("param,t,lambda,delta"));
        assert_eq!(text.lines().count(), 400 * 200 + 1);
        assert!(out.join("bifurcation.svg").exists());
    }

    #[test]
    fn periods_in_convergent_regime_has_no_three_cycle() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            &format!(r#"{{{NORMAL}, "periods": {{"eta": 0.6, "ks": [3]}}}}"#),
        );
        let out = dir.path().join("out");
        invoke(&["periods", "--config", &cfg], &out).unwrap();
        let text = fs::read_to_string(out.join("periods.csv")).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r[2] != "3"));
    }

    #[test]
    fn chaos_witness_success_and_exhaustion() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ok");
        invoke(&["chaos-witness", "--set", "chaos_witness.eta=1"], &out).unwrap();
        let txt = fs::read_to_string(out.join("witness.txt")).unwrap();
        assert!(!txt.contains("FAILS"), "{txt}");

        let r = invoke(
            &[
                "chaos-witness",
                "--set",
                "chaos_witness.eta=0.1",
                "--set",
                "chaos_witness.search_steps=1",
            ],
            &dir.path().join("bad"),
        );
        assert_eq!(code(r), 4);
    }

    #[test]
    fn echoed_config_reproduces_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            &format!(
                r#"{{"seed": 5, {NORMAL}, "simulate": {{"steps": 300, "mev": {{"mode": "sampled", "lo": 0.5, "hi": 1.5, "seed": null}}}}}}"#
            ),
        );
        let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
        invoke(&["simulate", "--config", &cfg], &a).unwrap();
        let echo = a.join("config.json").to_string_lossy().into_owned();
        invoke(&["simulate", "--config", &echo], &b).unwrap();
        assert_eq!(
            fs::read(a.join("trace.csv")).unwrap(),
            fs::read(b.join("trace.csv")).unwrap()
        );

        invoke(&["simulate", "--config", &cfg, "--seed", "6"], &c).unwrap();
        assert_ne!(
            fs::read(a.join("trace.csv")).unwrap(),
            fs::read(c.join("trace.csv")).unwrap()
        );
    }

    #[test]
    fn scenarios_write_trace_and_epochs() {
        let dir = tempfile::tempdir().unwrap();
        for kind in ["regime", "stress"] {
            let out = dir.path().join(kind);
            invoke(&["scenario", "--set", &format!("scenario.kind=\"{kind}\"")], &out).unwrap();
            let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
            assert_eq!(trace.lines().next(), Some("t,lambda,delta,eta_t,regime"));
            let epochs = fs::read_to_string(out.join("epochs.csv")).unwrap();
            assert_eq!(epochs.lines().next(), Some("epoch,eta,w,a_u,b_u,a_m,b_m"));
        }
        let cfg = write_config(
            dir.path(),
            &format!(r#"{{{NORMAL}, "scenario": {{"kind": "rules", "steps": 100}}}}"#),
        );
        let out = dir.path().join("rules");
        invoke(&["scenario", "--config", &cfg], &out).unwrap();
        let text = fs::read_to_string(out.join("rules.csv")).unwrap();
        assert_eq!(text.lines().next(), Some("t,full,miner_scaled,user_scaled,plain"));
        assert_eq!(text.lines().count(), 102);
    }
}
