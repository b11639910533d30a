/// Radical inverse of `index` in `base`: the base-`base` digits mirrored about the point.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    acc
}

/// The first `count` primes, in increasing order.
pub fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| candidate % p != 0)
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

pub(super) fn halton_points(dim: usize, n: usize, start: u64) -> Vec<f64> {
    let bases = first_primes(dim);
    let mut coords = Vec::with_capacity(n * dim);
    for i in 0..n as u64 {
        coords.extend(bases.iter().map(|&b| radical_inverse(b, start + i)));
    }
    coords
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
        assert_eq!(*first_primes(32).last().unwrap(), 131);
    }

    #[test]
    fn radical_inverse_digits() {
        assert_eq!(radical_inverse(2, 6), 0.375);
        assert!((radical_inverse(3, 5) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
        assert_eq!(radical_inverse(5, 0), 0.0);
    }
}
