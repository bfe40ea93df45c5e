//! Koszul sign bookkeeping, shuffles, graded symbols and truncation data.

use serde::{Deserialize, Serialize};

/// Which variables the carrier's slots differentiate: the fiber variables y
/// (the resolution bundles) or the chart variables x (the base-level calculus
/// and the quantization layer).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum VarKind {
    Fiber,
    Chart,
}

/// Sign of sorting the letters `x_{perm[0]} ... x_{perm[n-1]}` (with the given
/// degrees, indexed by letter) into ascending order: the product of
/// (-1)^{deg_i deg_j} over inversion pairs. Pure Koszul transport; callers in
/// antisymmetric contexts multiply by `perm_parity` separately.
pub fn koszul_sign(perm: &[usize], degrees: &[i64]) -> i64 {
    let mut sign = 1i64;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] && degrees[perm[i]] % 2 != 0 && degrees[perm[j]] % 2 != 0 {
                sign = -sign;
            }
        }
    }
    sign
}

/// Parity of a permutation: +1 or -1.
pub fn perm_parity(perm: &[usize]) -> i64 {
    let mut sign = 1i64;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// A (k,l)-shuffle presented as the permutation sending positions to original
/// indices: the first k entries are the (ascending) first block, the rest the
/// (ascending) complement.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Shuffle {
    pub perm: Vec<usize>,
    pub k: usize,
}

impl Shuffle {
    pub fn first_block(&self) -> &[usize] {
        &self.perm[..self.k]
    }

    pub fn second_block(&self) -> &[usize] {
        &self.perm[self.k..]
    }
}

/// All (k,l)-shuffles of {0,...,k+l-1} in lexicographic order of the first
/// block.
pub fn shuffles(k: usize, l: usize) -> Vec<Shuffle> {
    let n = k + l;
    let mut out = Vec::new();
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let mut perm = pick.clone();
        let inset: Vec<bool> = {
            let mut v = vec![false; n];
            for &i in &pick {
                v[i] = true;
            }
            v
        };
        perm.extend((0..n).filter(|&i| !inset[i]));
        out.push(Shuffle { perm, k });
        // next k-subset in lexicographic order
        if k == 0 {
            break;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pick[i] != i + n - k {
                break;
            }
        }
        if pick[i] == i + n - k {
            break;
        }
        pick[i] += 1;
        for j in (i + 1)..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
    out
}

/// Named basis element of a finite graded space.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct GradedSymbol {
    pub name: String,
    pub degree: i64,
    #[serde(default = "default_filt")]
    pub filtration: u32,
}

fn default_filt() -> u32 {
    1
}

/// Truncation orders for the recursive constructions: chart dimension d,
/// fiber degree cap, deformation-parameter order cap, arity cap.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TruncationContext {
    pub d: usize,
    pub n_y: u32,
    pub n_hbar: u32,
    pub n_ar: u32,
}

impl TruncationContext {
    pub fn new(d: usize, n_y: u32, n_hbar: u32, n_ar: u32) -> Result<Self, String> {
        if d < 1 {
            return Err("chart dimension must be at least 1".into());
        }
        if d > 16 {
            return Err("chart dimension capped at 16".into());
        }
        Ok(TruncationContext { d, n_y, n_hbar, n_ar })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn koszul_two_odd_letters() {
        // swapping two odd letters: sign -1; odd/even: +1
        assert_eq!(koszul_sign(&[1, 0], &[1, 1]), -1);
        assert_eq!(koszul_sign(&[1, 0], &[2, 1]), 1);
        assert_eq!(koszul_sign(&[1, 0], &[1, 2]), 1);
        assert_eq!(koszul_sign(&[0, 1], &[1, 1]), 1);
        // three odd letters, full reversal: 3 inversions
        assert_eq!(koszul_sign(&[2, 1, 0], &[1, 1, 1]), -1);
    }

    #[test]
    fn parity() {
        assert_eq!(perm_parity(&[0, 1, 2]), 1);
        assert_eq!(perm_parity(&[1, 0, 2]), -1);
        assert_eq!(perm_parity(&[2, 0, 1]), 1);
    }

    #[test]
    fn shuffle_count_and_order() {
        let s = shuffles(2, 2);
        assert_eq!(s.len(), 6); // C(4,2)
        assert_eq!(s[0].perm, vec![0, 1, 2, 3]);
        assert_eq!(s[5].perm, vec![2, 3, 0, 1]);
        // each is ascending within blocks
        for sh in &s {
            assert!(sh.first_block().windows(2).all(|w| w[0] < w[1]));
            assert!(sh.second_block().windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(shuffles(0, 3).len(), 1);
        assert_eq!(shuffles(3, 0).len(), 1);
    }
}
