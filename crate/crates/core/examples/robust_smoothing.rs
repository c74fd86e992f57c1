//! GCV-selected penalized smoothing of a noisy sine, with and without a
//! spike, comparing the plain and robust fits.
//!
//! cargo run --example robust_smoothing

use rand_distr::{Distribution, Normal};

use gestural::smoothing::{default_grid, gcv_select, keyed_rng, robust_smooth, smooth};

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn main() -> gestural::Result<()> {
    let n = 200;
    let clean: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 80.0).sin()).collect();
    let noise = Normal::new(0.0, 0.2).unwrap();
    let mut rng = keyed_rng(7, 0);
    let mut y: Vec<f64> = clean.iter().map(|c| c + noise.sample(&mut rng)).collect();

    let grid = default_grid();
    let s = gcv_select(&y, &grid)?;
    let plain = smooth(&y, s)?;
    println!("GCV s = {s:.3e}");
    println!("RMSE noisy {:.4}, smoothed {:.4}", rmse(&y, &clean), rmse(&plain, &clean));

    y[100] += 4.0;
    let plain = smooth(&y, gcv_select(&y, &grid)?)?;
    let robust = robust_smooth(&y, &grid, 3)?;
    println!(
        "spike at 100: clean {:.3}, plain {:.3}, robust {:.3}",
        clean[100], plain[100], robust[100]
    );
    Ok(())
}
