//! Fixed-order pairwise summation.
//!
//! Every integral in the crate is reduced through these helpers so that the
//! result depends only on the input order, never on thread scheduling.

use std::ops::Add;

use crate::C64;

const LEAF: usize = 8;

/// Pairwise sum: leaves of up to eight items are added left to right, then
/// halves are combined recursively with the split at `len / 2`.
pub fn pairwise_sum<T: Copy + Add<Output = T>>(items: &[T], zero: T) -> T {
    if items.len() <= LEAF {
        return items.iter().fold(zero, |acc, &x| acc + x);
    }
    let mid = items.len() / 2;
    pairwise_sum(&items[..mid], zero) + pairwise_sum(&items[mid..], zero)
}

/// Component-wise pairwise sum of equal-length rows.
pub fn pairwise_sum_rows(rows: &[Vec<C64>], width: usize) -> Vec<C64> {
    if rows.len() <= LEAF {
        let mut acc = vec![C64::new(0.0, 0.0); width];
        for row in rows {
            for (a, b) in acc.iter_mut().zip(row) {
                *a += b;
            }
        }
        return acc;
    }
    let mid = rows.len() / 2;
    let mut left = pairwise_sum_rows(&rows[..mid], width);
    let right = pairwise_sum_rows(&rows[mid..], width);
    for (a, b) in left.iter_mut().zip(&right) {
        *a += b;
    }
    left
}

/// Real-valued variant of [`pairwise_sum_rows`].
pub fn pairwise_sum_rows_f64(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    if rows.len() <= LEAF {
        let mut acc = vec![0.0; width];
        for row in rows {
            for (a, b) in acc.iter_mut().zip(row) {
                *a += b;
            }
        }
        return acc;
    }
    let mid = rows.len() / 2;
    let mut left = pairwise_sum_rows_f64(&rows[..mid], width);
    let right = pairwise_sum_rows_f64(&rows[mid..], width);
    for (a, b) in left.iter_mut().zip(&right) {
        *a += b;
    }
    left
}
