//! Default three-condition scenario end to end: simulate, parse, analyze
//! and write CSV/SVG output.
//!
//! cargo run --example russian_palatalization -- [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use gestural::diagnostics::Analysis;
use gestural::harness::{simulate_to_dir, ScenarioConfig};
use gestural::Preset;

fn print_analysis(a: &Analysis) {
    println!("speaker,condition,n,slope,r2,p_perm,mean_lag_ms");
    for r in &a.summary {
        match r.regression {
            Some(g) => println!(
                "{},{},{},{:.3},{:.3},{:.4},{:.2}",
                r.speaker,
                r.condition,
                r.n,
                g.slope,
                g.r2,
                g.p_perm.unwrap_or(f64::NAN),
                r.mean_lag_ms
            ),
            None => println!("{},{},{},NA,NA,NA,{:.2}", r.speaker, r.condition, r.n, r.mean_lag_ms),
        }
    }
    for c in [Preset::Underlying, Preset::Assimilatory, Preset::Sequence] {
        if let Some(k) = a.classification(c) {
            println!("{c}: {k}");
        }
    }
    if let Some(c) = a.lag_contrast {
        println!("lag contrast {:.2} ms (p = {:.4})", c.difference, c.p_perm);
    }
    if let (Some(mm), Some(z)) = (a.tb_contrast_mm, a.tb_contrast_z) {
        println!("TB contrast {:.3} mm, {:.3} z", mm.difference, z.difference);
    }
    println!("TB contrast by speaker (mm): {:?}", a.tb_contrast_mm_by_speaker);
    let e = &a.exclusions;
    println!(
        "excluded: {} parse failures, duration {:.2}%, lag {:.2}% of {}",
        e.parse_failures,
        100.0 * e.duration_fraction(),
        100.0 * e.lag_fraction(),
        e.total
    );
}

fn main() -> gestural::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gestural_demo"));
    let cfg = ScenarioConfig::default();
    let start = Instant::now();
    let run = simulate_to_dir(&cfg, &out)?;
    print_analysis(&run.report.analysis);
    println!("{} tokens in {:.1} s, output in {}", run.tokens.len(), start.elapsed().as_secs_f64(), out.display());
    Ok(())
}
