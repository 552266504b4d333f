use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `ceil(fraction * n)`, tolerant of representation error in `fraction`
/// (so that `0.8 * 5` is 4, not 5).
pub fn ceil_fraction(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let c = (x - 1e-9).ceil();
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(n)
    }
}

/// Independent ChaCha stream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two
/// values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_fraction_cases() {
        assert_eq!(ceil_fraction(0.8, 5), 4);
        assert_eq!(ceil_fraction(0.8, 32), 26);
        assert_eq!(ceil_fraction(0.5, 3), 2);
        assert_eq!(ceil_fraction(0.5, 4), 2);
        assert_eq!(ceil_fraction(0.2, 1000), 200);
        assert_eq!(ceil_fraction(0.0, 10), 0);
        assert_eq!(ceil_fraction(1.0, 10), 10);
        assert_eq!(ceil_fraction(1e-6, 10), 1);
    }

    #[test]
    fn mean_std_cases() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
