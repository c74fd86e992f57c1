//! Lag-versus-duration diagnostics on hand-made token tables: onset-coupled
//! lags are flat, offset-coupled lags track the first gesture's duration.
//!
//! cargo run --example regression_diagnostics

use rand_distr::{Distribution, Normal};

use gestural::diagnostics::{classify_coordination, TokenRecord};
use gestural::smoothing::keyed_rng;
use gestural::Preset;

fn tokens(offset_coupled: bool) -> Vec<TokenRecord> {
    let jitter = Normal::new(0.0, 8.0).unwrap();
    let durs = Normal::new(250.0, 30.0).unwrap();
    let mut out = Vec::new();
    for s in 0..4 {
        let mut rng = keyed_rng(3, s);
        for rep in 0..50 {
            let dur = durs.sample(&mut rng);
            let lag = if offset_coupled { dur - 100.0 } else { 20.0 } + jitter.sample(&mut rng);
            out.push(TokenRecord {
                speaker: format!("S{}", s + 1),
                condition: Preset::Underlying,
                item: "x".into(),
                rep,
                g1_onset_ms: Some(0.0),
                g1_offset_ms: Some(dur),
                g2_onset_ms: Some(lag),
                g1_duration_ms: Some(dur),
                lag_ms: Some(lag),
                tb_pos_mm: None,
                tb_pos_z: None,
                excluded: false,
                exclusion_reason: None,
            });
        }
    }
    out
}

fn main() -> gestural::Result<()> {
    for (label, offset_coupled) in [("onset-coupled", false), ("offset-coupled", true)] {
        let c = classify_coordination(&tokens(offset_coupled), 5000, 1)?;
        println!(
            "{label}: {} (slope {:.3}, r2 {:.3}, p {:.4})",
            c.coordination,
            c.pooled.slope,
            c.pooled.r2,
            c.pooled.p_perm.unwrap()
        );
    }
    Ok(())
}
