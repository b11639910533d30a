//! Gray-code Sobol sequence with Joe–Kuo direction numbers (no scrambling).

use std::sync::OnceLock;

use super::MAX_SEQUENCE_DIM;
use crate::error::{Error, Result};

/// Bits of precision per coordinate.
pub const SOBOL_BITS: usize = 32;

const DIRECTION_TABLE: &str = include_str!("../../data/new-joe-kuo-6.32.txt");

/// Direction numbers `v_1..v_32` of one coordinate, left-aligned in a `u32`.
pub type SobolDirections = [u32; SOBOL_BITS];

fn parse_table() -> Vec<SobolDirections> {
    let mut dirs = Vec::with_capacity(MAX_SEQUENCE_DIM);
    // Coordinate 1: van der Corput in base 2.
    let mut first = [0u32; SOBOL_BITS];
    for (k, v) in first.iter_mut().enumerate() {
        *v = 1 << (31 - k);
    }
    dirs.push(first);

    for line in DIRECTION_TABLE.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<u32> = line
            .split_whitespace()
            .map(|f| f.parse().expect("direction table is numeric"))
            .collect();
        let (s, a) = (fields[1] as usize, fields[2]);
        let m = &fields[3..3 + s];
        let mut v = [0u32; SOBOL_BITS];
        for i in 0..SOBOL_BITS {
            v[i] = if i < s {
                m[i] << (31 - i)
            } else {
                let mut x = v[i - s] ^ (v[i - s] >> s);
                for k in 1..s {
                    if (a >> (s - 1 - k)) & 1 == 1 {
                        x ^= v[i - k];
                    }
                }
                x
            };
        }
        dirs.push(v);
    }
    assert_eq!(dirs.len(), MAX_SEQUENCE_DIM);
    dirs
}

/// Direction numbers for every supported coordinate, parsed once from the embedded table.
pub fn direction_numbers() -> &'static [SobolDirections] {
    static TABLE: OnceLock<Vec<SobolDirections>> = OnceLock::new();
    TABLE.get_or_init(parse_table)
}

pub(super) fn sobol_points(dim: usize, n: usize, start: u64) -> Result<Vec<f64>> {
    let in_range = start
        .checked_add(n as u64 - 1)
        .is_some_and(|last| last <= u32::MAX as u64);
    if !in_range {
        return Err(Error::TooLarge(format!(
            "Sobol index beyond 2^32 - 1 (start {start}, n {n})"
        )));
    }
    let dirs = &direction_numbers()[..dim];
    let scale = 1.0 / (1u64 << 32) as f64;

    // State at `start` from its Gray code, then one XOR per step.
    let gray = start ^ (start >> 1);
    let mut state: Vec<u32> = dirs
        .iter()
        .map(|v| {
            (0..SOBOL_BITS)
                .filter(|&k| (gray >> k) & 1 == 1)
                .fold(0u32, |acc, k| acc ^ v[k])
        })
        .collect();

    let mut coords = Vec::with_capacity(n * dim);
    let mut index = start;
    for i in 0..n {
        if i > 0 {
            // Bit that flips in the Gray code between index - 1 and index.
            let bit = (index - 1).trailing_ones() as usize;
            for (x, v) in state.iter_mut().zip(dirs) {
                *x ^= v[bit];
            }
        }
        coords.extend(state.iter().map(|&x| x as f64 * scale));
        index += 1;
    }
    Ok(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_coordinate_recurrence() {
        // s = 1, a = 0, m_1 = 1: m_k = 2 m_{k-1} xor m_{k-1} = 1, 3, 5, 15, ...
        let v = &direction_numbers()[1];
        assert_eq!(v[0], 1 << 31);
        assert_eq!(v[1], 3 << 30);
        assert_eq!(v[2], 5 << 29);
    }

    #[test]
    fn rejects_index_overflow() {
        assert!(sobol_points(2, 4, u32::MAX as u64 - 1).is_err());
    }
}
