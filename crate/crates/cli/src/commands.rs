use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mevrate::orbits::{self, ScanFamily, ScanSpec};
use mevrate::scenarios::{self, ScenarioResult};
use mevrate::{analysis, Execution, MarketInstance, OrbitTrace, UpdateRule};

use crate::config::{RunConfig, ScanAxis, ScenarioKind};
use crate::error::CliError;
use crate::svg::{self, Mark, Series};

type Result<T> = std::result::Result<T, CliError>;

fn market(cfg: &RunConfig) -> Result<MarketInstance> {
    let m = cfg
        .market
        .as_ref()
        .ok_or_else(|| CliError::Config("missing key `market`".into()))?;
    Ok(m.build(cfg.seed)?)
}

fn write_file(dir: &Path, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut out = BufWriter::new(File::create(dir.join(name))?);
    fill(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Creates the output directory and writes the effective config into it.
pub fn prepare(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let text = serde_json::to_string_pretty(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(cfg.out.join("config.json"), text + "\n")?;
    Ok(())
}

fn trace_svg(dir: &Path, name: &str, title: &str, tr: &OrbitTrace) -> Result<()> {
    let t = |v: &[f64]| v.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
    let doc = svg::plot(
        title,
        "t",
        "value",
        &[
            Series {
                name: "lambda",
                points: t(&tr.lambdas),
            },
            Series {
                name: "delta",
                points: t(&tr.deltas),
            },
        ],
        Mark::Line,
    );
    fs::write(dir.join(name), doc)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let inst = market(cfg)?;
    let s = &cfg.simulate;
    let tr = inst.simulate(s.rule.into(), s.lambda0, s.eta, &s.mev.build(cfg.seed), s.steps)?;
    write_file(&cfg.out, "trace.csv", |w| tr.write_csv(w))?;
    if cfg.svg {
        trace_svg(&cfg.out, "trace.svg", &tr.description, &tr)?;
    }
    println!("wrote {} rows to {}", tr.len(), cfg.out.join("trace.csv").display());
    println!("final lambda={} (lambda*={})", tr.last_lambda(), inst.lambda_star());
    Ok(())
}

pub fn thresholds(cfg: &RunConfig) -> Result<()> {
    let inst = market(cfg)?;
    let r = analysis::report(&inst, cfg.thresholds.eta, cfg.precision.grid_n, Execution::default())?;
    write_file(&cfg.out, "thresholds.txt", |w| r.write_record(w))?;
    write_file(&cfg.out, "thresholds.csv", |w| r.write_csv(w))?;
    print!("{r}");
    Ok(())
}

pub fn bifurcate(cfg: &RunConfig) -> Result<()> {
    let b = &cfg.bifurcate;
    let family = match b.axis {
        ScanAxis::Eta => ScanFamily::Eta {
            inst: market(cfg)?,
            lo: b.lo,
            hi: b.hi,
        },
        ScanAxis::Range => ScanFamily::ToleranceRange {
            users_center: b.users_center,
            miners_center: b.miners_center,
            w: b.w,
            eta: b.eta,
            lo: b.lo,
            hi: b.hi,
        },
    };
    let spec = ScanSpec {
        rule: b.rule.into(),
        n_params: b.n_params,
        burn_in: b.burn_in,
        n_record: b.n_record,
        lambda0: b.lambda0,
    };
    let table = orbits::bifurcation_scan(&family, &spec, Execution::default())?;
    write_file(&cfg.out, "bifurcation.csv", |w| table.write_csv(w))?;
    if cfg.svg {
        let points = table
            .rows
            .iter()
            .flat_map(|r| r.lambdas.iter().map(move |&l| (r.param, l)))
            .collect();
        let xlabel = match b.axis {
            ScanAxis::Eta => "eta",
            ScanAxis::Range => "r",
        };
        let doc = svg::plot(
            "bifurcation diagram",
            xlabel,
            "lambda",
            &[Series { name: "lambda", points }],
            Mark::Dot,
        );
        fs::write(cfg.out.join("bifurcation.svg"), doc)?;
    }
    println!(
        "wrote {} parameter values x {} recorded steps to {}",
        table.rows.len(),
        b.n_record,
        cfg.out.join("bifurcation.csv").display()
    );
    Ok(())
}

pub fn periods(cfg: &RunConfig) -> Result<()> {
    let inst = market(cfg)?;
    let p = &cfg.periods;
    if p.ks.is_empty() {
        return Err(CliError::Config("`periods.ks` must list at least one period".into()));
    }
    let mut reports = Vec::new();
    for &k in &p.ks {
        let grid_n = p.grid_n.unwrap_or_else(|| orbits::default_grid_n(k).max(1000));
        let r = orbits::find_periodic_points(
            &inst,
            p.rule.into(),
            p.eta,
            k,
            grid_n,
            cfg.precision.period_tol,
            Execution::default(),
        )?;
        let least = r.with_least_period(k).len();
        let flag = if r.tangential_suspects.is_empty() {
            String::new()
        } else {
            format!(", {} possible tangential roots", r.tangential_suspects.len())
        };
        println!(
            "k={k}: {} fixed points of h^k, {least} of least period {k}{flag}",
            r.points.len()
        );
        reports.push(r);
    }
    write_file(&cfg.out, "periods.csv", |w| {
        for (i, r) in reports.iter().enumerate() {
            r.write_csv(&mut *w, i == 0)?;
        }
        Ok(())
    })
}

pub fn chaos_witness(cfg: &RunConfig) -> Result<()> {
    let c = &cfg.chaos_witness;
    let wit = orbits::chaos_witness(c.eta, c.w, c.a0, c.search_steps)?;
    let check = wit.recheck()?;
    let ok = |b: bool| if b { "holds" } else { "FAILS" };
    let mut text = wit.to_string();
    text.push_str(&format!("recheck_residual={}\n", check.residual));
    text.push_str(&format!("lambda3<=lambda0: {}\n", ok(check.lambda3 <= wit.lambda0)));
    text.push_str(&format!("lambda0<lambda1: {}\n", ok(wit.lambda0 < wit.lambda1)));
    text.push_str(&format!("lambda1<lambda2: {}\n", ok(wit.lambda1 < check.lambda2)));
    fs::write(cfg.out.join("witness.txt"), &text)?;
    write_file(&cfg.out, "witness.csv", |w| {
        writeln!(w, "eta,w,a,b,mass_below_a,lambda0,lambda1,lambda2,lambda3")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            wit.eta, wit.w, wit.a, wit.b, wit.mass_below_a, wit.lambda0, wit.lambda1, wit.lambda2, wit.lambda3
        )
    })?;
    print!("{text}");
    Ok(())
}

fn scenario_outputs(cfg: &RunConfig, res: &ScenarioResult, title: &str) -> Result<()> {
    write_file(&cfg.out, "trace.csv", |w| res.write_trace_csv(w))?;
    write_file(&cfg.out, "epochs.csv", |w| res.write_epoch_csv(w))?;
    if cfg.svg {
        trace_svg(&cfg.out, "trace.svg", title, &res.trace)?;
    }
    let s = &res.summary;
    println!(
        "lambda in [{}, {}], max |delta|={}, in-band fraction={}, band exits={}",
        s.min_lambda, s.max_lambda, s.max_abs_delta, s.band_fraction, s.band_violations
    );
    Ok(())
}

pub fn scenario(cfg: &RunConfig) -> Result<()> {
    let sc = &cfg.scenario;
    match sc.kind {
        ScenarioKind::Regime => {
            let res = scenarios::run_regime(&sc.regime_config()?, sc.lambda0)?;
            scenario_outputs(cfg, &res, "two-regime market")
        }
        ScenarioKind::Stress => {
            let res = scenarios::run_stress(&sc.stress_config(cfg.seed), sc.lambda0)?;
            scenario_outputs(cfg, &res, "stress test")
        }
        ScenarioKind::Burn => {
            let m = cfg
                .market
                .as_ref()
                .ok_or_else(|| CliError::Config("missing key `market`".into()))?;
            let burn = m.burn.build(cfg.seed);
            let base = MarketInstance::new(m.users.build()?, m.miners.build()?, m.w)?;
            let res = scenarios::run_burn(&base, burn, sc.eta, sc.lambda0, sc.steps)?;
            scenario_outputs(cfg, &res, "MEV burn")
        }
        ScenarioKind::Rules => {
            let inst = market(cfg)?;
            let traces = scenarios::run_rule_comparison(&inst, sc.eta, sc.lambda0, sc.steps)?;
            write_file(&cfg.out, "rules.csv", |w| {
                scenarios::write_rule_comparison_csv(&traces, w)
            })?;
            if cfg.svg {
                let series: Vec<Series> = traces
                    .iter()
                    .map(|(rule, tr)| Series {
                        name: rule.name(),
                        points: tr.lambdas.iter().enumerate().map(|(i, &l)| (i as f64, l)).collect(),
                    })
                    .collect();
                let doc = svg::plot("update rules", "t", "lambda", &series, Mark::Line);
                fs::write(cfg.out.join("rules.svg"), doc)?;
            }
            for rule in UpdateRule::ALL {
                println!("{rule}: final lambda={}", traces[&rule].last_lambda());
            }
            Ok(())
        }
    }
}
