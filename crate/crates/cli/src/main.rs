use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use etmg_core::mpc::CONSTRAINT_TOL;
use etmg_core::scenario::{comparison_table, preset, summarize, write_trace, PreparedScenario, ProfileSet, RunSummary};
use etmg_core::{ScenarioConfig, ScenarioError, SimulationTrace};

/// Electro-thermal microgrid simulator with model-predictive operation.
#[derive(Parser)]
#[command(name = "etmg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation and write its trace.
    Simulate {
        /// Scenario file, or `preset:<name>`.
        #[arg(long)]
        config: String,
        /// Profile CSV replacing the configured source.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run two scenarios and summarize the differences.
    Compare {
        #[arg(long)]
        config_a: String,
        #[arg(long)]
        config_b: String,
        /// Output directory for both traces and `summary.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check hydraulics, model assembly and the initial condition.
    Validate {
        #[arg(long)]
        config: String,
    },
    /// Print a bundled scenario (`scenario_I`, `scenario_II`).
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(spec: &str) -> Result<(ScenarioConfig, Option<PathBuf>), ScenarioError> {
    if let Some(name) = spec.strip_prefix("preset:") {
        let text = preset(name).ok_or_else(|| ScenarioError::Config(format!("unknown preset `{name}`")))?;
        return Ok((ScenarioConfig::from_toml(text)?, None));
    }
    let path = Path::new(spec);
    let cfg = ScenarioConfig::load(path)?;
    Ok((cfg, path.parent().map(Path::to_path_buf)))
}

fn prepare(spec: &str, profiles: Option<&Path>) -> Result<PreparedScenario, ScenarioError> {
    let (cfg, base) = load(spec)?;
    let override_set = match profiles {
        Some(p) => {
            let probe = cfg.prepare(base.as_deref(), None);
            let counts = match &probe {
                Ok(s) => (s.model.dims.n_res, s.model.dims.n_loads, s.model.dims.n_demand),
                Err(_) => (1, 1, 1),
            };
            Some(ProfileSet::load(p, counts)?)
        }
        None => None,
    };
    cfg.prepare(base.as_deref(), override_set)
}

fn check_trace(s: &PreparedScenario, trace: &SimulationTrace) -> anyhow::Result<()> {
    let v = trace.violations(&s.model, &s.mpc);
    if v.max() > CONSTRAINT_TOL {
        return Err(anyhow!("{}: recorded trace violates constraints: {v:?}", s.label));
    }
    Ok(())
}

fn print_summary(s: &RunSummary) {
    println!(
        "{}: grid energy {:.4} MWh, peak ESS {:.4} MW, peak HP {:.4} MW, HP variance {:.6} MW^2, \
         used ESS capacity {:.4} MWh, total cost {:.4}, T_e1 in [{:.3}, {:.3}] degC",
        s.label,
        s.grid_energy,
        s.peak_ess_power,
        s.peak_hp_power,
        s.hp_variance,
        s.used_ess_capacity,
        s.total_cost,
        s.min_supply_temperature,
        s.max_supply_temperature
    );
}

fn simulate(config: &str, profiles: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let s = prepare(config, profiles)?;
    let trace = s.run()?;
    check_trace(&s, &trace)?;
    write_trace(&trace, &s.model.dims, out)?;
    print_summary(&summarize(&s.label, &trace, &s.model));
    println!("trace written to {}", out.display());
    Ok(())
}

fn compare(a: &str, b: &str, out: &Path) -> anyhow::Result<()> {
    let sa = prepare(a, None)?;
    let sb = prepare(b, None)?;
    let (ra, rb) = std::thread::scope(|scope| {
        let ha = scope.spawn(|| sa.run());
        let hb = scope.spawn(|| sb.run());
        (ha.join().expect("scenario thread"), hb.join().expect("scenario thread"))
    });
    let (ta, tb) = (ra?, rb?);
    check_trace(&sa, &ta)?;
    check_trace(&sb, &tb)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (na, nb) = if sa.label == sb.label {
        (format!("{}_a", sa.label), format!("{}_b", sb.label))
    } else {
        (sa.label.clone(), sb.label.clone())
    };
    write_trace(&ta, &sa.model.dims, &out.join(format!("{na}.csv")))?;
    write_trace(&tb, &sb.model.dims, &out.join(format!("{nb}.csv")))?;
    let suma = summarize(&na, &ta, &sa.model);
    let sumb = summarize(&nb, &tb, &sb.model);
    print_summary(&suma);
    print_summary(&sumb);
    let (rows, csv) = comparison_table(&suma, &sumb);
    for r in &rows {
        println!("{:<24} {:>14.6} {:>14.6} {:>9.2}%", r.metric, r.a, r.b, r.change_percent);
    }
    let path = out.join("summary.csv");
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    println!("results written to {}", out.display());
    Ok(())
}

fn validate(config: &str) -> anyhow::Result<()> {
    let s = prepare(config, None)?;
    let d = s.model.dims;
    println!("{}: configuration ok", s.label);
    println!("mass balance: max node residual {:.3e} m^3/s", s.hydraulics.max_residual());
    println!(
        "model: {} states, {} controls, {} electrical nodes, {} lines",
        d.n_state(),
        d.n_control(),
        d.n_nodes,
        d.n_lines
    );
    // ambient temperature with no heat input must be a fixed point
    let ambient = s.forecast.d_t[0][d.n_demand];
    let mut x = s.model.a.column(0).map(|_| 0.0);
    x.rows_mut(d.n_ess, d.n_thermal()).fill(ambient);
    let mut d_t = s.forecast.d_t[0].clone();
    d_t.rows_mut(0, d.n_demand).fill(0.0);
    let next = &s.model.a * &x + &s.model.e * &d_t;
    println!("equilibrium: drift at ambient {:.3e} K per step", (&next - &x).amax());
    let mut worst = 0.0f64;
    for i in 0..d.n_thermal() {
        let t = s.x_init[d.n_ess + i];
        worst = worst.max(s.mpc.temperature_lower[i] - t).max(t - s.mpc.temperature_upper[i]);
    }
    println!("initial state: worst temperature bound excess {:.3e} K", worst.max(0.0));
    println!("profiles: {} steps for k_sim = {}, horizon = {}", s.profiles.len(), s.k_sim, s.mpc.horizon);
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ScenarioError>() {
        Some(e) => e.exit_code() as u8,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, profiles, out } => simulate(config, profiles.as_deref(), out),
        Command::Compare { config_a, config_b, out } => compare(config_a, config_b, out),
        Command::Validate { config } => validate(config),
        Command::Preset { name, out } => match preset(name) {
            Some(text) => match out {
                Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            },
            None => Err(ScenarioError::Config(format!("unknown preset `{name}`")).into()),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
