//! Compositions and binomial coefficients.

/// `C(n, k)` as an exact integer, or `None` on overflow.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=u128::from(k) {
        // acc * (n - k + i) is divisible by i at every step
        acc = acc.checked_mul(u128::from(n - k) + i)? / i;
    }
    Some(acc)
}

/// `C(n, k)` in floating point.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 1..=k {
        acc = acc * (n - k + i) as f64 / i as f64;
    }
    acc
}

/// Binomial probability `B(k; n, q)`.
pub fn binomial_pmf(k: u64, n: u64, q: f64) -> f64 {
    binomial(n, k) * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32)
}

/// Number of ways to write `n` as an ordered sum of `parts` non-negative
/// integers, saturating at `u128::MAX`.
pub fn composition_count(n: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(n == 0);
    }
    binomial_exact((n + parts - 1) as u64, (parts - 1) as u64).unwrap_or(u128::MAX)
}

/// Multinomial probability of the count vector `k` under `weights`.
pub fn multinomial_pmf(k: &[usize], weights: &[f64]) -> f64 {
    let mut remaining = k.iter().sum::<usize>() as u64;
    let mut acc = 1.0;
    for (&kj, &w) in k.iter().zip(weights) {
        acc *= binomial(remaining, kj as u64) * w.powi(kj as i32);
        remaining -= kj as u64;
    }
    acc
}

/// Lexicographic iterator over the compositions of `total` into `parts`
/// non-negative parts, from `(0, .., 0, total)` to `(total, 0, .., 0)`.
#[derive(Clone, Debug)]
pub struct Compositions {
    current: Vec<usize>,
    done: bool,
}

impl Compositions {
    pub fn new(total: usize, parts: usize) -> Self {
        if parts == 0 {
            return Compositions { current: Vec::new(), done: total != 0 };
        }
        let mut current = vec![0; parts];
        current[parts - 1] = total;
        Compositions { current, done: false }
    }

    fn advance(&mut self) {
        let s = self.current.len();
        if s <= 1 {
            self.done = true;
            return;
        }
        let k = if self.current[s - 1] > 0 {
            s - 2
        } else {
            match self.current[..s - 1].iter().rposition(|&x| x > 0) {
                Some(0) | None => {
                    self.done = true;
                    return;
                }
                Some(j) => j - 1,
            }
        };
        let tail: usize = self.current[k + 1..].iter().sum();
        self.current[k] += 1;
        for x in &mut self.current[k + 1..] {
            *x = 0;
        }
        self.current[s - 1] = tail - 1;
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.advance();
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial_exact(5, 2), Some(10));
        assert_eq!(binomial_exact(0, 0), Some(1));
        assert_eq!(binomial_exact(3, 4), Some(0));
        assert_eq!(binomial(30, 15), 155_117_520.0);
        assert!(binomial_exact(200, 100).is_none());
    }

    #[test]
    fn compositions_enumerate_expected_count() {
        for (n, s) in [(0, 1), (3, 1), (7, 3), (8, 4), (5, 5), (0, 3)] {
            let all: Vec<_> = Compositions::new(n, s).collect();
            assert_eq!(all.len() as u128, composition_count(n, s), "n={n} s={s}");
            assert!(all.iter().all(|c| c.iter().sum::<usize>() == n));
            assert!(all.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(composition_count(7, 3), 36);
        assert_eq!(composition_count(8, 4), 165);
    }

    #[test]
    fn empty_parts() {
        assert_eq!(Compositions::new(0, 0).count(), 1);
        assert_eq!(Compositions::new(2, 0).count(), 0);
    }

    #[test]
    fn multinomial_sums_to_one() {
        let w = [0.2, 0.3, 0.5];
        let total: f64 = Compositions::new(6, 3).map(|k| multinomial_pmf(&k, &w)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
