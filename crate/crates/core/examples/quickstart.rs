use decoh_core::gaopt::{self, CostParams, GaConfig};
use decoh_core::lindblad::{self, PropagationConfig};
use decoh_core::qsystem::{build_model, Decoherence, Model};

fn main() -> decoh_core::Result<()> {
    let sys = build_model::<f64>(Model::M1);
    let dec = Decoherence::uniform(&sys, 0.03)?;
    let cfg = PropagationConfig::default();

    // field-free yield with decoherence alone
    let o0 = lindblad::yield_of(&sys, None, &dec, &cfg)?;
    println!("O[0, 0.03] = {:.2} %", 100.0 * o0);

    // short search for a 5 % yield
    let ga = GaConfig { population_size: 16, generations: 10, rng_seed: 7, ..GaConfig::default() };
    let rec = gaopt::optimize_with(&sys, &dec, &CostParams::new(0.05, 0.05)?, &ga)?;
    let rep = gaopt::cooperation_report_with(&rec.best_field, &sys, &dec, &cfg)?;
    println!("O[E, 0.03] = {:.2} %, cooperation: {}", 100.0 * rep.o_both, rep.cooperation);
    Ok(())
}
