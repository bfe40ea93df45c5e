//! Seeded random data for the identity checks: small rationals, monomials,
//! carriers of every kind, torsion-free Christoffel tables, and invertible
//! integer chart changes. Everything is deterministic in the seed.

use crate::chain::HochChain;
use crate::diffop::{OpKey, PolyDiffOp};
use crate::fedosov::ConnectionData;
use crate::form::ExtForm;
use crate::graded::VarKind;
use crate::poly::{IdxSet, Mono, XPoly};
use crate::pvf::PolyVecField;
use crate::quantize::GaugeElement;
use crate::ratio::Rat;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

pub struct Sampler {
    rng: ChaCha20Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn rat(&mut self) -> Rat {
        let p = self.rng.gen_range(-3i64..=3);
        let q = self.rng.gen_range(1i64..=2);
        Rat::new(p.into(), q.into())
    }

    pub fn nonzero_rat(&mut self) -> Rat {
        loop {
            let r = self.rat();
            if !r.is_zero() {
                return r;
            }
        }
    }

    /// Monomial with total degree at most `cap`.
    pub fn mono(&mut self, d: usize, cap: u32) -> Mono {
        let t = self.rng.gen_range(0..=cap);
        let mut m = Mono::zero(d);
        for _ in 0..t {
            let i = self.rng.gen_range(0..d);
            m = m.add(&Mono::unit(d, i));
        }
        m
    }

    pub fn xpoly(&mut self, d: usize, cap: u32, terms: usize) -> XPoly {
        let mut p = XPoly::zero(d);
        for _ in 0..terms {
            p.add_assign(&XPoly::monomial(d, self.mono(d, cap), self.rat()));
        }
        p
    }

    pub fn nonzero_xpoly(&mut self, d: usize, cap: u32, terms: usize) -> XPoly {
        loop {
            let p = self.xpoly(d, cap, terms);
            if !p.is_zero() {
                return p;
            }
        }
    }

    /// Subset of 0..d with at most `max_len` elements.
    pub fn idxset(&mut self, d: usize, max_len: usize) -> IdxSet {
        let want = self.rng.gen_range(0..=max_len.min(d));
        let mut s = IdxSet::empty();
        while (s.len() as usize) < want {
            s = IdxSet(s.0 | 1 << self.rng.gen_range(0..d));
        }
        s
    }

    fn ydeg(&mut self, var: VarKind, d: usize, n_y: u32) -> Mono {
        match var {
            VarKind::Fiber => self.mono(d, n_y),
            VarKind::Chart => Mono::zero(d),
        }
    }

    fn dyset(&mut self, var: VarKind, d: usize) -> IdxSet {
        match var {
            VarKind::Fiber => self.idxset(d, 2),
            VarKind::Chart => IdxSet::empty(),
        }
    }

    pub fn pvf(&mut self, var: VarKind, d: usize, n_y: u32, terms: usize) -> PolyVecField {
        let mut v = PolyVecField::zero(var, d);
        for _ in 0..terms {
            v.add_assign(&PolyVecField::term(
                var,
                d,
                self.ydeg(var, d, n_y),
                self.dyset(var, d),
                self.idxset(d, 2),
                self.xpoly(d, 2, 2),
            ));
        }
        v
    }

    /// Operator with `slots` argument slots of derivative order at most 2.
    pub fn diffop(&mut self, var: VarKind, d: usize, n_y: u32, slots: usize, terms: usize) -> PolyDiffOp {
        let mut p = PolyDiffOp::zero(var, d);
        for _ in 0..terms {
            let oslots = (0..slots).map(|_| self.mono(d, 2)).collect();
            let mut q = PolyDiffOp::zero(var, d);
            q.insert(
                OpKey { ydeg: self.ydeg(var, d, n_y), dyset: self.dyset(var, d), oslots },
                self.xpoly(d, 2, 2),
            );
            p.add_assign(&q);
        }
        p
    }

    pub fn chain(&mut self, var: VarKind, d: usize, n_y: u32, degree: usize, terms: usize) -> HochChain {
        let mut b = HochChain::zero(var, d);
        for _ in 0..terms {
            let groups = (0..=degree).map(|_| self.mono(d, n_y.max(1))).collect();
            b.add_assign(&HochChain::term(var, d, self.dyset(var, d), groups, self.xpoly(d, 2, 2)));
        }
        b
    }

    pub fn form(&mut self, var: VarKind, d: usize, n_y: u32, terms: usize) -> ExtForm {
        let mut f = ExtForm::zero(var, d);
        for _ in 0..terms {
            f.add_assign(&ExtForm::term(
                var,
                d,
                self.ydeg(var, d, n_y),
                self.dyset(var, d),
                self.idxset(d, 2),
                self.xpoly(d, 2, 2),
            ));
        }
        f
    }

    /// Torsion-free Christoffel table with polynomial entries of degree at
    /// most `cap`.
    pub fn connection(&mut self, d: usize, cap: u32) -> ConnectionData {
        let mut gamma = vec![vec![vec![XPoly::zero(d); d]; d]; d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..=i {
                    let c = if self.rng.gen_range(0..3) == 0 {
                        XPoly::zero(d)
                    } else {
                        self.xpoly(d, cap, 2)
                    };
                    gamma[k][i][j] = c.clone();
                    gamma[k][j][i] = c;
                }
            }
        }
        ConnectionData::new(d, gamma).unwrap()
    }

    /// Invertible integer chart change as a product of unit triangular
    /// matrices, returned with its exact inverse.
    pub fn linear_change(&mut self, d: usize) -> (Vec<Vec<Rat>>, Vec<Vec<Rat>>) {
        let mut lo = mat_id(d);
        let mut up = mat_id(d);
        for i in 0..d {
            for j in 0..i {
                lo[i][j] = Rat::from_integer(self.rng.gen_range(-2i64..=2).into());
                up[j][i] = Rat::from_integer(self.rng.gen_range(-2i64..=2).into());
            }
        }
        let l = mat_mul(&lo, &up);
        let linv = mat_mul(&invert_unit_triangular(&up, false), &invert_unit_triangular(&lo, true));
        debug_assert_eq!(mat_mul(&l, &linv), mat_id(d));
        (l, linv)
    }

    /// Gauge series through the given order: one-slot chart operators of
    /// derivative order 1..=2 with small polynomial coefficients.
    pub fn gauge(&mut self, d: usize, orders: usize) -> GaugeElement {
        let u = (0..orders)
            .map(|_| {
                let mut p = PolyDiffOp::zero(VarKind::Chart, d);
                for _ in 0..2 {
                    let mut m = self.mono(d, 2);
                    if m.is_zero() {
                        m = Mono::unit(d, self.rng.gen_range(0..d));
                    }
                    p.add_assign(&PolyDiffOp::term(
                        VarKind::Chart,
                        d,
                        Mono::zero(d),
                        IdxSet::empty(),
                        vec![m],
                        self.xpoly(d, 1, 2),
                    ));
                }
                p
            })
            .collect();
        GaugeElement::new(d, u).unwrap()
    }

    /// Linear functional on monomials of total degree at most `cap`.
    pub fn functional(&mut self, d: usize, cap: u32, terms: usize) -> BTreeMap<Mono, Rat> {
        let mut f = BTreeMap::new();
        for _ in 0..terms {
            f.insert(self.mono(d, cap), self.nonzero_rat());
        }
        f
    }
}

fn mat_id(d: usize) -> Vec<Vec<Rat>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect())
        .collect()
}

fn mat_mul(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let d = a.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let mut s = Rat::zero();
                    for k in 0..d {
                        s = &s + &(&a[i][k] * &b[k][j]);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

// Unit triangular inverse by substitution; exact and integer-valued.
fn invert_unit_triangular(m: &[Vec<Rat>], lower: bool) -> Vec<Vec<Rat>> {
    let d = m.len();
    let mut inv = mat_id(d);
    for c in 0..d {
        let rows: Vec<usize> = if lower { (0..d).collect() } else { (0..d).rev().collect() };
        for &i in &rows {
            let mut s = if i == c { Rat::one() } else { Rat::zero() };
            let ks: Vec<usize> = if lower { (0..i).collect() } else { (i + 1..d).collect() };
            for k in ks {
                s = &s - &(&m[i][k] * &inv[k][c]);
            }
            inv[i][c] = s;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_samplers_are_reproducible_and_shaped() {
        let mut a = Sampler::new(7);
        let mut b = Sampler::new(7);
        assert_eq!(a.xpoly(2, 3, 4), b.xpoly(2, 3, 4));
        assert_eq!(a.pvf(VarKind::Fiber, 3, 4, 3), b.pvf(VarKind::Fiber, 3, 4, 3));
        let op = a.diffop(VarKind::Chart, 2, 0, 2, 3);
        for k in op.terms.keys() {
            assert_eq!(k.oslots.len(), 2);
            assert!(k.ydeg.is_zero() && k.dyset.is_empty());
        }
        let ch = a.chain(VarKind::Fiber, 2, 3, 2, 2);
        for k in ch.terms.keys() {
            assert_eq!(k.groups.len(), 3);
        }
    }

    #[test]
    fn connections_are_torsion_free_and_changes_invert() {
        let mut s = Sampler::new(11);
        for _ in 0..5 {
            let c = s.connection(3, 2);
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert_eq!(c.gamma[k][i][j], c.gamma[k][j][i]);
                    }
                }
            }
            let (l, linv) = s.linear_change(3);
            assert_eq!(mat_mul(&l, &linv), mat_id(3));
            assert_eq!(mat_mul(&linv, &l), mat_id(3));
        }
    }

    #[test]
    fn gauge_samples_are_valid_one_slot_series() {
        let mut s = Sampler::new(3);
        let g = s.gauge(2, 2);
        assert_eq!(g.u.len(), 2);
        for p in &g.u {
            for k in p.terms.keys() {
                assert_eq!(k.oslots.len(), 1);
            }
        }
    }
}
