use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use decoh_core::field::uniform_grid;
use decoh_core::gaopt::{self, CostParams, GaConfig};
use decoh_core::lindblad::{self, DensityMatrix, PropagationConfig};
use decoh_core::perturb::{self, EffectiveCoupling, LadderSpec};
use decoh_core::qsystem::build_model;
use decoh_core::reproduce::{self, ReproduceOptions, Target};
use decoh_core::ControlField;
use serde::Serialize;

use crate::config::*;
use crate::{Failure, EXIT_REPRODUCTION};

/// Files written (relative to the output directory) and the exit code.
pub struct Finished {
    pub outputs: Vec<String>,
    pub code: i32,
}

impl Finished {
    fn ok(outputs: Vec<String>) -> Self {
        Finished { outputs, code: 0 }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn percent(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

pub fn execute(config: &RunConfig, dir: &Path) -> Result<Finished, Failure> {
    match config {
        RunConfig::Propagate(c) => propagate(c, dir),
        RunConfig::Optimize(c) => optimize(c, dir),
        RunConfig::Spectrum(c) => spectrum(c, dir),
        RunConfig::Reproduce(c) => reproduce_target(c, dir),
        RunConfig::PerturbSweep(c) => sweep(c, dir),
        RunConfig::ModelExport(c) => {
            build_model::<f64>(c.model).save(dir.join("system.toml"))?;
            println!("wrote {}", dir.join("system.toml").display());
            Ok(Finished::ok(vec!["system.toml".into()]))
        }
    }
}

#[derive(Serialize)]
struct PropagationSummary {
    populations_percent: Vec<f64>,
    target_yield_percent: f64,
    fluence: f64,
}

fn propagate(c: &PropagateConfig, dir: &Path) -> Result<Finished, Failure> {
    let sys = load_system(c.model, c.system_file.as_deref())?;
    let dec = decoherence(&sys, c.model, c.gamma, c.gamma_left, c.gamma_right)?;
    let field = c.field.as_ref().map(ControlField::load).transpose()?;
    let cfg = PropagationConfig::default().with_dt(c.dt).with_horizon(c.horizon).with_store_every(c.store_every);
    let rho0 = DensityMatrix::pure(sys.n_levels, sys.initial_state);
    let traj = lindblad::propagate_with(&sys, field.as_ref(), &dec, &rho0, &cfg)?;
    traj.write_csv(create(dir, "trajectory.csv")?, c.offdiag)?;

    let pops = traj.final_state.populations();
    let shown: Vec<String> = pops.iter().map(|p| percent(*p)).collect();
    println!("final populations (%): {}", shown.join(" "));
    println!("target yield (%): {}", percent(pops[sys.target_state]));
    write_json(
        dir,
        "summary.json",
        &PropagationSummary {
            populations_percent: pops.iter().map(|p| p * 100.0).collect(),
            target_yield_percent: pops[sys.target_state] * 100.0,
            fluence: field.as_ref().map_or(0.0, |f| f.fluence()),
        },
    )?;
    Ok(Finished::ok(vec!["trajectory.csv".into(), "summary.json".into()]))
}

#[derive(Serialize)]
struct CooperationOutput<'a> {
    seed: u64,
    evaluations: usize,
    best_cost: f64,
    report: &'a gaopt::CooperationReport<f64>,
}

fn optimize(c: &OptimizeConfig, dir: &Path) -> Result<Finished, Failure> {
    let sys = load_system(c.model, c.system_file.as_deref())?;
    let dec = decoherence(&sys, c.model, c.gamma, c.gamma_left, c.gamma_right)?;
    let params = CostParams::new(c.target / 100.0, c.alpha)?;
    let ga = GaConfig {
        population_size: c.population,
        generations: c.generations,
        rng_seed: c.seed,
        max_evaluations: c.max_evaluations,
        propagation: PropagationConfig::default().with_dt(c.fitness_dt).with_store_every(0),
        ..GaConfig::default()
    };
    let record = gaopt::optimize_with(&sys, &dec, &params, &ga)?;
    let report_cfg = PropagationConfig::default().with_dt(c.report_dt).with_store_every(0);
    let report = gaopt::cooperation_report_with(&record.best_field, &sys, &dec, &report_cfg)?;

    record.best_field.save(dir.join("best_field.toml"))?;
    record.write_csv(create(dir, "record.csv")?)?;
    write_json(
        dir,
        "cooperation.json",
        &CooperationOutput { seed: c.seed, evaluations: record.evaluations, best_cost: record.best.cost, report: &report },
    )?;
    record.best_field.analytic_spectrum(&uniform_grid(0.0, 3.0, 3000)).write_csv(create(dir, "spectrum.csv")?)?;

    println!("{:>10} {:>10} {:>10} {:>12}", "O[0,g] %", "O[E,0] %", "O[E,g] %", "F");
    println!(
        "{:>10} {:>10} {:>10} {:>12.3e}",
        percent(report.o_decoherence_only),
        percent(report.o_field_only),
        percent(report.o_both),
        report.fluence
    );
    println!("cooperation: {}  ({} propagations)", report.cooperation, record.evaluations);
    Ok(Finished::ok(vec![
        "best_field.toml".into(),
        "record.csv".into(),
        "cooperation.json".into(),
        "spectrum.csv".into(),
    ]))
}

fn spectrum(c: &SpectrumConfig, dir: &Path) -> Result<Finished, Failure> {
    if c.hi.is_nan() || c.lo.is_nan() || c.hi <= c.lo || c.points < 2 {
        return Err(Failure::Config("spectrum grid needs hi > lo and at least two points".into()));
    }
    let field = ControlField::load(&c.field)?;
    let s = field.analytic_spectrum(&uniform_grid(c.lo, c.hi, c.points));
    s.write_csv(create(dir, "spectrum.csv")?)?;
    println!("max power {:.4e} on [{}, {}] rad/fs", s.max_power(), c.lo, c.hi);
    Ok(Finished::ok(vec!["spectrum.csv".into()]))
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .filter_map(|ch| match ch {
            ' ' | ',' => Some('_'),
            '=' => None,
            c => Some(c),
        })
        .collect()
}

fn reproduce_target(c: &ReproduceConfig, dir: &Path) -> Result<Finished, Failure> {
    let target: Target = c.target.parse()?;
    if c.seeds.is_empty() {
        return Err(Failure::Config("at least one seed is required".into()));
    }
    let mut opts = ReproduceOptions { seeds: c.seeds.clone(), ..ReproduceOptions::default() };
    opts.ga.propagation = opts.ga.propagation.with_dt(c.fitness_dt);
    opts.ga.population_size = c.population;
    opts.ga.generations = c.generations;
    let report = reproduce::reproduce(target, &opts)?;

    let mut outputs = vec!["report.md".to_string(), "report.csv".to_string()];
    report.write_markdown(create(dir, "report.md")?)?;
    report.write_csv(create(dir, "report.csv")?)?;
    for cell in &report.cells {
        let stem = file_label(&cell.label);
        let field_name = format!("field_{stem}.toml");
        cell.record.best_field.save(dir.join(&field_name))?;
        let spectrum_name = format!("spectrum_{stem}.csv");
        cell.record
            .best_field
            .analytic_spectrum(&uniform_grid(0.0, 3.0, 3000))
            .write_csv(create(dir, &spectrum_name)?)?;
        outputs.extend([field_name, spectrum_name]);
    }

    let mut md = Vec::new();
    report.write_markdown(&mut md)?;
    print!("{}", String::from_utf8_lossy(&md));
    let failures = report.failures().count();
    if failures == 0 {
        println!("\nall criteria met");
        Ok(Finished::ok(outputs))
    } else {
        println!("\n{failures} criteria not met");
        Ok(Finished { outputs, code: EXIT_REPRODUCTION })
    }
}

pub const MAX_SWEEP_RUNGS: usize = 6;

fn sweep_ladder(c: &SweepConfig) -> Result<LadderSpec<f64>, Failure> {
    let mut ladder: LadderSpec<f64> = match (&c.ladder_file, c.model) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let l: LadderSpec<f64> =
                toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            l.validate()?;
            l
        }
        (None, Some(model)) => {
            let sys = build_model::<f64>(model);
            let n = sys.n_levels - 1;
            let amps = c.amplitudes.clone().unwrap_or_else(|| vec![0.03; n]);
            let phases = c.phases.clone().unwrap_or_else(|| vec![0.0; n]);
            let pad = |mut v: Vec<f64>, fill: f64| {
                v.resize(n, fill);
                v
            };
            LadderSpec::from_system(&sys, pad(amps, 0.03), pad(phases, 0.0))?
        }
        _ => return Err(Failure::Config("give exactly one of --ladder-file or --model".into())),
    };
    if let Some(r) = c.rungs {
        if r == 0 || r > ladder.n_rungs() {
            return Err(Failure::Config(format!("--rungs must be in 1..={}", ladder.n_rungs())));
        }
        for v in [&mut ladder.dipoles, &mut ladder.rates, &mut ladder.carriers, &mut ladder.amplitudes, &mut ladder.phases]
        {
            v.truncate(r);
        }
    }
    if ladder.n_rungs() > MAX_SWEEP_RUNGS {
        return Err(Failure::Config(format!("sweeps support at most {MAX_SWEEP_RUNGS} rungs")));
    }
    Ok(ladder)
}

fn sweep(c: &SweepConfig, dir: &Path) -> Result<Finished, Failure> {
    let ladder = sweep_ladder(c)?;
    let (t_f, t_e) = perturb::default_durations::<f64>();
    let coupling = match c.coupling {
        CouplingKind::Magnus => perturb::magnus_w(&ladder, &ladder.field()?, t_f)?,
        CouplingKind::Rwa => EffectiveCoupling::from_rwa(&ladder, t_e, t_f)?,
    };
    let lambdas = match &c.lambdas {
        Some(l) if !l.is_empty() => l.clone(),
        _ => {
            let lam0 = perturb::lambda_for_yield(&ladder, &coupling, c.start_yield, c.cooperative, t_f)?;
            (0..=c.halvings).map(|k| lam0 / 2f64.powi(k as i32)).collect()
        }
    };
    let rows = perturb::oracle_sweep(&ladder, &coupling, &lambdas, c.cooperative, t_f)?;
    perturb::write_sweep_csv(&rows, create(dir, "sweep.csv")?)?;
    println!("{:>12} {:>12} {:>14} {:>14} {:>10}", "lambda", "gamma", "O_perturb", "O_oracle", "rel_err");
    for r in &rows {
        println!(
            "{:>12.4e} {:>12.4e} {:>14.6e} {:>14.6e} {:>10.3e}",
            r.lambda, r.gamma, r.o_perturbative, r.o_oracle, r.rel_error
        );
    }
    Ok(Finished::ok(vec!["sweep.csv".into()]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_become_file_names() {
        assert_eq!(file_label("M4 gL=0.04,gR=0"), "M4_gL0.04_gR0");
        assert_eq!(file_label("M1 g=0.03"), "M1_g0.03");
    }

    #[test]
    fn sweep_ladder_from_model() {
        let c = SweepConfig {
            ladder_file: None,
            model: Some(decoh_core::Model::M1),
            rungs: Some(2),
            amplitudes: Some(vec![0.03, 0.02]),
            phases: None,
            coupling: CouplingKind::Magnus,
            cooperative: true,
            lambdas: None,
            start_yield: 1e-4,
            halvings: 2,
        };
        let l = sweep_ladder(&c).unwrap();
        assert_eq!(l.n_rungs(), 2);
        assert_eq!(l.amplitudes, vec![0.03, 0.02]);
        assert!(sweep_ladder(&SweepConfig { rungs: Some(5), ..c.clone() }).is_err());
        // M3 has two-quantum couplings, so it is not a ladder
        assert!(sweep_ladder(&SweepConfig { model: Some(decoh_core::Model::M3), rungs: None, ..c }).is_err());
    }
}
