//! Dense exact linear algebra over Q: rank and one solution of A x = b by
//! Gauss-Jordan elimination. Sizes here are small (operator bases at fixed
//! order and degree), so no pivoting strategy beyond the first nonzero.

use crate::ratio::Rat;
use num_traits::Zero;

fn eliminate(a: &mut [Vec<Rat>], cols: usize) -> Vec<(usize, usize)> {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = a[r][c].clone().recip();
        let width = a[r].len();
        for j in c..width {
            let v = &a[r][j] * &inv;
            a[r][j] = v;
        }
        for i in 0..rows {
            if i == r || a[i][c].is_zero() {
                continue;
            }
            let f = a[i][c].clone();
            for j in c..width {
                let t = &a[r][j] * &f;
                let v = &a[i][j] - &t;
                a[i][j] = v;
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    pivots
}

pub fn rank(m: &[Vec<Rat>]) -> usize {
    if m.is_empty() {
        return 0;
    }
    let cols = m[0].len();
    let mut a = m.to_vec();
    eliminate(&mut a, cols).len()
}

/// One exact solution of A x = b (free variables set to zero), or None when
/// the system is inconsistent.
pub fn solve(m: &[Vec<Rat>], rhs: &[Rat]) -> Option<Vec<Rat>> {
    assert_eq!(m.len(), rhs.len());
    if m.is_empty() {
        return Some(Vec::new());
    }
    let cols = m[0].len();
    let mut a: Vec<Vec<Rat>> = m
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let pivots = eliminate(&mut a, cols);
    for (i, row) in a.iter().enumerate() {
        if pivots.iter().all(|&(r, _)| r != i) && !row[cols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rat::zero(); cols];
    for (r, c) in pivots {
        x[c] = a[r][cols].clone();
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{rat, rint};

    #[test]
    fn rank_of_a_singular_matrix() {
        let m = vec![
            vec![rint(1), rint(2), rint(3)],
            vec![rint(2), rint(4), rint(6)],
            vec![rint(1), rint(0), rint(1)],
        ];
        assert_eq!(rank(&m), 2);
        assert_eq!(rank(&[]), 0);
    }

    #[test]
    fn solve_round_trips() {
        let m = vec![vec![rint(2), rint(1)], vec![rint(1), rint(-1)]];
        let b = vec![rint(5), rint(1)];
        let x = solve(&m, &b).unwrap();
        assert_eq!(x, vec![rint(2), rint(1)]);
        // inconsistent
        let m =
            vec![vec![rint(1), rint(1)], vec![rint(2), rint(2)]];
        assert!(solve(&m, &[rint(1), rint(3)]).is_none());
        // underdetermined: the returned vector satisfies the system
        let m = vec![vec![rint(1), rint(2), rat(1, 2)]];
        let b = vec![rat(3, 4)];
        let x = solve(&m, &b).unwrap();
        let lhs: Rat = m[0].iter().zip(&x).map(|(a, v)| a * v).sum();
        assert_eq!(lhs, b[0]);
    }
}
