use crate::error::{Result, TfmdError};
use crate::signals::Signal;

fn error_norms(truth: &Signal, estimate: &Signal) -> Result<(f64, f64)> {
    if truth.len() != estimate.len() {
        return Err(TfmdError::invalid(format!(
            "length mismatch: truth has {} samples, estimate {}",
            truth.len(),
            estimate.len()
        )));
    }
    let signal_energy = truth.energy();
    if signal_energy == 0.0 {
        return Err(TfmdError::invalid("reference signal has zero norm"));
    }
    let error_energy: f64 = truth
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((signal_energy, error_energy))
}

/// `||y - y_hat|| / ||y||`.
pub fn relative_l2(truth: &Signal, estimate: &Signal) -> Result<f64> {
    let (signal_energy, error_energy) = error_norms(truth, estimate)?;
    Ok((error_energy / signal_energy).sqrt())
}

/// `10 log10(||x||^2 / ||x - x_hat||^2)` in dB.
///
/// Returns `f64::INFINITY` when the estimate equals `clean` exactly.
pub fn output_snr(clean: &Signal, estimate: &Signal) -> Result<f64> {
    let (signal_energy, error_energy) = error_norms(clean, estimate)?;
    if error_energy == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal_energy / error_energy).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec(), 100.0).unwrap()
    }

    #[test]
    fn relative_l2_examples() {
        let y = sig(&[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(relative_l2(&y, &y).unwrap(), 0.0);
        assert_eq!(relative_l2(&y, &y.scaled(0.0)).unwrap(), 1.0);
        assert!((relative_l2(&y, &y.scaled(1.1)).unwrap() - 0.1).abs() < 1e-12);
        assert!(relative_l2(&sig(&[0.0, 0.0]), &sig(&[1.0, 0.0])).is_err());
        assert!(relative_l2(&y, &sig(&[1.0])).is_err());
    }

    #[test]
    fn output_snr_examples() {
        let x = sig(&[3.0, 4.0]);
        // Error with a tenth of the signal norm.
        let est = sig(&[3.0 + 0.3, 4.0 + 0.4]);
        assert!((output_snr(&x, &est).unwrap() - 20.0).abs() < 1e-9);
        assert!(output_snr(&x, &x.scaled(0.0)).unwrap().abs() < 1e-15);
        assert_eq!(output_snr(&x, &x).unwrap(), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn output_snr_matches_direct_formula(
            xs in proptest::collection::vec(-2.0f64..2.0, 16),
            es in proptest::collection::vec(-0.5f64..0.5, 16),
        ) {
            prop_assume!(xs.iter().any(|v| v.abs() > 1e-3));
            prop_assume!(es.iter().any(|v| v.abs() > 1e-3));
            let x = sig(&xs);
            let est = sig(&xs.iter().zip(&es).map(|(a, b)| a + b).collect::<Vec<_>>());
            let num: f64 = xs.iter().map(|v| v * v).sum();
            let den: f64 = xs.iter().zip(est.samples()).map(|(a, b)| (a - b).powi(2)).sum();
            let expect = 10.0 * (num / den).log10();
            prop_assert!((output_snr(&x, &est).unwrap() - expect).abs() <= 1e-12);
        }

        #[test]
        fn relative_l2_scale_invariant(
            xs in proptest::collection::vec(-2.0f64..2.0, 12),
            ys in proptest::collection::vec(-2.0f64..2.0, 12),
            e in -10i32..10,
        ) {
            prop_assume!(xs.iter().any(|v| v.abs() > 1e-3));
            let c = 2f64.powi(e);
            let (x, y) = (sig(&xs), sig(&ys));
            prop_assert_eq!(
                relative_l2(&x, &y).unwrap(),
                relative_l2(&x.scaled(c), &y.scaled(c)).unwrap()
            );
            prop_assert_eq!(
                relative_l2(&x, &y).unwrap(),
                relative_l2(&x.scaled(-c), &y.scaled(-c)).unwrap()
            );
        }
    }
}
