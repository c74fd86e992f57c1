//! Three accounts of the ASSIMILATORY timing compared on simulated data:
//! velar blending alone, anti-phase palatal timing, and an eccentric onset
//! delay.
//!
//! cargo run --example blending_sweep

use gestural::harness::{experiment_54, ScenarioConfig};

fn main() -> gestural::Result<()> {
    let cfg = ScenarioConfig {
        tokens_per_condition: 72,
        n_perm: 2000,
        ..Default::default()
    };
    let r = experiment_54(&cfg)?;
    println!("(A) blending only, no eccentric delay");
    println!("velar_blending,lag_contrast_ms,tb_contrast_mm");
    for p in &r.sweep {
        println!("{},{:.2},{:.3}", p.velar_blending, p.lag_contrast_ms, p.tb_contrast_mm);
    }
    let a = &r.anti_phase;
    println!(
        "(B) anti-phase palatal: {:?}, pooled slope {:.3}",
        a.coordination,
        a.pooled.map_or(f64::NAN, |g| g.slope)
    );
    let c = &r.eccentric;
    println!(
        "(C) eccentric delay: UNDERLYING {:?}, ASSIMILATORY {:?}, lag contrast {:.2} ms",
        c.underlying, c.assimilatory, c.lag_contrast_ms
    );
    Ok(())
}
