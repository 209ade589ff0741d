//! Platt scaling versus isotonic regression on overconfident scores.

use credit_mixture::calibration::{
    calibrate, expected_calibration_error, isotonic_fit, platt_fit, reliability_bins,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn draw(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
    // the true probability is s^3: the raw scores overstate the risk
    let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let y = s.iter().map(|&v| (rng.random::<f64>() < v.powi(3)) as u8).collect();
    (s, y)
}

fn main() -> credit_mixture::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (fit_s, fit_y) = draw(&mut rng, 5000);
    let (val_s, val_y) = draw(&mut rng, 5000);

    println!("raw ECE {:.4}", expected_calibration_error(&val_s, &val_y, 10)?);
    let platt = platt_fit(&fit_s, &fit_y)?;
    println!("Platt a = {:.3}, b = {:.3}", platt.a, platt.b);
    let iso = isotonic_fit(&fit_s, &fit_y)?;
    for s in [0.1, 0.5, 0.9] {
        println!("  s = {s}: Platt {:.3}, isotonic {:.3}, truth {:.3}", platt.apply(s), iso.apply(s), s * s * s);
    }

    let choice = calibrate(&fit_s, &fit_y, &val_s, &val_y, 10)?;
    println!(
        "ECE Platt {:.4}, isotonic {:.4}: using {}",
        choice.platt_ece, choice.isotonic_ece, choice.method
    );
    let rel = reliability_bins(&choice.map.apply_all(&val_s), &val_y, 10)?;
    println!("bin  count  mean_pred  pos_rate");
    for b in 0..rel.n_bins {
        println!("{b:>3}  {:>5}  {:>9.3}  {:>8.3}", rel.count[b], rel.mean_pred[b], rel.pos_rate[b]);
    }
    Ok(())
}
