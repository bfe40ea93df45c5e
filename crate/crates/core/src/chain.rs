//! Hochschild chains as finite jets at the diagonal: a degree-n chain has
//! n+1 monomial groups (fiber mode: separate copies y_0,...,y_n of the fiber
//! variables; chart mode: copies of the chart variables, constant rational
//! coefficient). Carries the operator action, the chain differential, and
//! the fiber contracting homotopy in diagonal coordinates.

use crate::diffop::PolyDiffOp;
use crate::graded::VarKind;
use crate::poly::{IdxSet, Mono, XPoly};
use crate::ratio::Rat;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ChainKey {
    pub dyset: IdxSet,
    pub groups: Vec<Mono>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HochChain {
    pub var: VarKind,
    pub d: usize,
    pub terms: BTreeMap<ChainKey, XPoly>,
}

impl HochChain {
    pub fn zero(var: VarKind, d: usize) -> Self {
        HochChain { var, d, terms: BTreeMap::new() }
    }

    pub fn term(var: VarKind, d: usize, dyset: IdxSet, groups: Vec<Mono>, c: XPoly) -> Self {
        let mut b = HochChain::zero(var, d);
        b.insert(ChainKey { dyset, groups }, c);
        b
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, key: ChainKey, c: XPoly) {
        if c.is_zero() {
            return;
        }
        debug_assert!(self.var == VarKind::Fiber || (key.dyset.is_empty() && c.is_constant()));
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                e.get_mut().add_assign(&c);
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &HochChain) {
        for (k, c) in &other.terms {
            self.insert(k.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &HochChain) -> Self {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &HochChain) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return HochChain::zero(self.var, self.d);
        }
        HochChain {
            var: self.var,
            d: self.d,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v.scale(c))).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rat::from_integer(1.into()))
    }

    /// Total fiber degree of a term: sum of group degrees.
    pub fn max_y_stratum(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.groups.iter().map(|g| g.total()).sum()).max()
    }

    pub fn truncate_y(&self, cap: u32) -> Self {
        HochChain {
            var: self.var,
            d: self.d,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.groups.iter().map(|g| g.total()).sum::<u32>() <= cap)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn y_stratum(&self, p: u32) -> Self {
        HochChain {
            var: self.var,
            d: self.d,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.groups.iter().map(|g| g.total()).sum::<u32>() == p)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    /// Chain degree if homogeneous: #groups - 1.
    pub fn degree(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(|k| k.groups.len());
        let first = it.next()?;
        it.all(|x| x == first).then_some(first - 1)
    }
}

// Slot derivatives of a run of groups (in the listed order); returns the sum
// of the leftover exponents and the falling-factorial product, or None.
fn slot_fallings(d: usize, oslots: &[Mono], consumed: &[&Mono]) -> Option<(Mono, BigInt)> {
    let mut m = Mono::zero(d);
    let mut coeff = BigInt::one();
    for (slot, g) in oslots.iter().zip(consumed) {
        let (rest, f) = g.falling(slot)?;
        if f.is_zero() {
            return None;
        }
        m = m.add(&rest);
        coeff *= f;
    }
    Some((m, coeff))
}

/// Operator action on chains: the position sum plus wrap-around terms.
/// Zero when the chain degree is smaller than the operator degree. In chart
/// mode the operator's polynomial coefficient merges into the produced group
/// (the groups are the variable copies); in fiber mode the operator's y-part
/// does and the x-coefficients multiply.
pub fn chain_action(p: &PolyDiffOp, b: &HochChain) -> HochChain {
    assert_eq!(p.var, b.var);
    let d = b.d;
    let mut out = HochChain::zero(b.var, d);
    for (pk, pc) in &p.terms {
        let k = pk.oslots.len() as i64 - 1;
        // payload monomial that lands in the merged group, with the leftover
        // scalar/x-coefficient per variant
        let variants: Vec<(Mono, XPoly)> = match b.var {
            VarKind::Fiber => vec![(pk.ydeg.clone(), pc.clone())],
            VarKind::Chart => pc
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), XPoly::constant(d, c.clone())))
                .collect(),
        };
        for (bk, bc) in &b.terms {
            let n = bk.groups.len() as i64 - 1;
            if n - k < 0 {
                continue;
            }
            let Some((dyset, sdy)) = pk.dyset.wedge(bk.dyset) else { continue };
            // chain dy block passes the operator: (-1)^{|S_b| k}
            let ext = (bk.dyset.len() as i64 * k) % 2 != 0;
            for (pm, pcoef) in &variants {
                let coeff = pcoef.mul(bc);
                // main sum
                for i in 0..=(n - k) as usize {
                    let consumed: Vec<&Mono> =
                        (0..pk.oslots.len()).map(|j| &bk.groups[i + j]).collect();
                    let Some((rests, f)) = slot_fallings(d, &pk.oslots, &consumed) else { continue };
                    let mut groups = Vec::with_capacity((n - k + 1) as usize);
                    groups.extend_from_slice(&bk.groups[..i]);
                    groups.push(pm.add(&rests));
                    groups.extend_from_slice(&bk.groups[i + pk.oslots.len()..]);
                    let neg = ((k * i as i64) % 2 != 0) ^ sdy ^ ext;
                    let mut c = coeff.scale(&Rat::from_integer(f));
                    if neg {
                        c = c.neg();
                    }
                    out.insert(ChainKey { dyset, groups }, c);
                }
                // wrap-around terms: j = n-k .. n-1 (empty unless k >= 1)
                for j in (n - k).max(0)..n {
                    let mut consumed: Vec<&Mono> = Vec::with_capacity(pk.oslots.len());
                    for t in (j + 1)..=n {
                        consumed.push(&bk.groups[t as usize]);
                    }
                    for t in 0..=(k + j - n) {
                        consumed.push(&bk.groups[t as usize]);
                    }
                    let Some((rests, f)) = slot_fallings(d, &pk.oslots, &consumed) else { continue };
                    let mut groups = Vec::with_capacity((n - k + 1) as usize);
                    groups.push(pm.add(&rests));
                    for t in (k + j + 1 - n)..=j {
                        groups.push(bk.groups[t as usize].clone());
                    }
                    let neg = ((n * (j + 1)) % 2 != 0) ^ sdy ^ ext;
                    let mut c = coeff.scale(&Rat::from_integer(f));
                    if neg {
                        c = c.neg();
                    }
                    out.insert(ChainKey { dyset, groups }, c);
                }
            }
        }
    }
    out
}

/// Transport along the linear chart map x~ = L x: each group transforms as a
/// fiber monomial, the dy block as covectors, the coefficient by substitution.
pub fn linear_transport(b: &HochChain, _l: &[Vec<Rat>], linv: &[Vec<Rat>]) -> HochChain {
    let d = b.d;
    let mut out = HochChain::zero(b.var, d);
    for (k, c) in &b.terms {
        let c2 = c.linear_subst(linv);
        let group_expansions: Vec<Vec<(Mono, Rat)>> = k
            .groups
            .iter()
            .map(|g| crate::pvf::expand_even(g, linv, d))
            .collect();
        for (sdy, cdy) in crate::pvf::expand_odd(k.dyset, linv, d, true) {
            let mut acc: Vec<(Vec<Mono>, Rat)> = vec![(Vec::new(), cdy.clone())];
            for exp in &group_expansions {
                let mut next = Vec::new();
                for (prefix, coeff) in &acc {
                    for (m, cm) in exp {
                        let mut p2 = prefix.clone();
                        p2.push(m.clone());
                        next.push((p2, coeff * cm));
                    }
                }
                acc = next;
            }
            for (groups, coeff) in acc {
                out.insert(ChainKey { dyset: sdy, groups }, c2.scale(&coeff));
            }
        }
    }
    out
}

/// Chain differential: action of the commutative multiplication.
pub fn chain_diff(b: &HochChain) -> HochChain {
    chain_action(&PolyDiffOp::mult_op(b.var, b.d), b)
}

/// Diagonal-coordinate presentation of a fiber chain: group 0 holds the
/// diagonal variable s = y_0, group m >= 1 the difference u_m = y_m - y_0.
/// Both directions are plain binomial expansions.
pub fn to_diag(b: &HochChain) -> HochChain {
    assert_eq!(b.var, VarKind::Fiber);
    let d = b.d;
    let mut out = HochChain::zero(b.var, d);
    for (k, c) in &b.terms {
        // y_0^{n_0} prod_{m>=1} (s+u_m)^{n_m}
        let mut acc: Vec<(Vec<Mono>, Mono, BigInt)> =
            vec![(Vec::new(), k.groups[0].clone(), BigInt::one())];
        for g in &k.groups[1..] {
            let choices = g.subsplits();
            let mut next = Vec::new();
            for (pref, s_acc, coeff) in &acc {
                for (b_m, binom) in &choices {
                    let mut p = pref.clone();
                    p.push(b_m.clone());
                    let s_extra = g.checked_sub(b_m).unwrap();
                    next.push((p, s_acc.add(&s_extra), coeff * binom));
                }
            }
            acc = next;
        }
        for (tail, s, coeff) in acc {
            let mut groups = Vec::with_capacity(k.groups.len());
            groups.push(s);
            groups.extend(tail);
            out.insert(
                ChainKey { dyset: k.dyset, groups },
                c.scale(&Rat::from_integer(coeff)),
            );
        }
    }
    out
}

pub fn from_diag(b: &HochChain) -> HochChain {
    assert_eq!(b.var, VarKind::Fiber);
    let d = b.d;
    let mut out = HochChain::zero(b.var, d);
    for (k, c) in &b.terms {
        // s^a prod (y_m - y_0)^{b_m}
        let mut acc: Vec<(Vec<Mono>, Mono, Rat)> =
            vec![(Vec::new(), k.groups[0].clone(), Rat::one())];
        for g in &k.groups[1..] {
            let choices = g.subsplits();
            let mut next = Vec::new();
            for (pref, y0_acc, coeff) in &acc {
                for (kept, binom) in &choices {
                    // (y_m - y_0)^{b}: kept exponents stay on y_m, the rest
                    // moves to y_0 with sign (-1)^{|moved|}
                    let moved = g.checked_sub(kept).unwrap();
                    let mut p = pref.clone();
                    p.push(kept.clone());
                    let mut cf = coeff.clone() * Rat::from_integer(binom.clone());
                    if moved.total() % 2 == 1 {
                        cf = -cf;
                    }
                    next.push((p, y0_acc.add(&moved), cf));
                }
            }
            acc = next;
        }
        for (tail, y0, coeff) in acc {
            let mut groups = Vec::with_capacity(k.groups.len());
            groups.push(y0);
            groups.extend(tail);
            out.insert(ChainKey { dyset: k.dyset, groups }, c.scale(&coeff));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffop::{gerstenhaber, hoch_diff};
    use crate::ratio::rint;

    fn mono(v: Vec<u16>) -> Mono {
        Mono(v)
    }

    #[test]
    fn multiplication_action_pattern() {
        // R_mu(a0 ox a1 ox a2) = a0a1 ox a2 - a0 ox a1a2 + a2a0 ox a1
        let d = 1;
        let b = HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::empty(),
            vec![mono(vec![1]), mono(vec![2]), mono(vec![3])],
            XPoly::one(d),
        );
        let r = chain_diff(&b);
        let mut expect = HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::empty(),
            vec![mono(vec![3]), mono(vec![3])],
            XPoly::one(d),
        );
        expect.add_assign(&HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::empty(),
            vec![mono(vec![1]), mono(vec![5])],
            XPoly::constant(d, rint(-1)),
        ));
        expect.add_assign(&HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::empty(),
            vec![mono(vec![4]), mono(vec![2])],
            XPoly::one(d),
        ));
        assert_eq!(r, expect);
        // b^2 = 0
        assert!(chain_diff(&r).is_zero());
    }

    #[test]
    fn module_law() {
        // R_{[P1,P2]} = R_{P1} R_{P2} - (-1)^{k1 k2} R_{P2} R_{P1}
        let d = 2;
        let p1 = PolyDiffOp::term(
            VarKind::Fiber,
            d,
            Mono::unit(d, 0),
            IdxSet::empty(),
            vec![mono(vec![1, 0]), mono(vec![0, 1])],
            XPoly::one(d),
        );
        let p2 = PolyDiffOp::term(
            VarKind::Fiber,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            vec![mono(vec![0, 2])],
            XPoly::var(d, 0),
        );
        let (k1, k2) = (1i64, 0i64);
        let b = HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::empty(),
            vec![mono(vec![1, 1]), mono(vec![2, 0]), mono(vec![0, 2]), mono(vec![1, 0])],
            XPoly::one(d),
        );
        let lhs = chain_action(&gerstenhaber(&p1, &p2), &b);
        let mut rhs = chain_action(&p1, &chain_action(&p2, &b));
        let t = chain_action(&p2, &chain_action(&p1, &b));
        rhs.add_assign(&if (k1 * k2) % 2 != 0 { t } else { t.neg() });
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn differential_intertwines_action() {
        // R_{dP} = b R_P - (-1)^k R_P b
        let d = 1;
        let p = PolyDiffOp::term(
            VarKind::Fiber,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            vec![mono(vec![2])],
            XPoly::one(d),
        );
        let k = 0i64;
        let b = HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::empty(),
            vec![mono(vec![1]), mono(vec![2]), mono(vec![2])],
            XPoly::one(d),
        );
        let lhs = chain_action(&hoch_diff(&p), &b);
        let mut rhs = chain_diff(&chain_action(&p, &b));
        let t = chain_action(&p, &chain_diff(&b));
        rhs.add_assign(&if k % 2 != 0 { t } else { t.neg() });
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn diag_roundtrip() {
        let d = 2;
        let b = HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::from_iter([0]),
            vec![mono(vec![1, 0]), mono(vec![0, 2]), mono(vec![1, 1])],
            XPoly::var(d, 1),
        );
        assert_eq!(from_diag(&to_diag(&b)), b);
        assert_eq!(to_diag(&from_diag(&b)), b);
    }

    #[test]
    fn chart_mode_action() {
        // coefficient merges into the produced group; b^2 = 0 still
        let d = 1;
        let p = PolyDiffOp::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            vec![mono(vec![1]), mono(vec![2])],
            XPoly::var(d, 0),
        );
        let b = HochChain::term(
            VarKind::Chart,
            d,
            IdxSet::empty(),
            vec![mono(vec![2]), mono(vec![1]), mono(vec![3]), mono(vec![2])],
            XPoly::one(d),
        );
        let rb = chain_action(&p, &b);
        assert!(!rb.is_zero());
        for k in rb.terms.keys() {
            assert_eq!(k.groups.len(), 3);
        }
        assert!(chain_diff(&chain_diff(&b)).is_zero());
        // x * d ox d^2 applied at position 1: groups (2),(1),(3),(2) ->
        // (2), x*(d x)(d^2 x^3), (2) = (2),(1+0+1),(2) * 6 with sign -1
        let key = ChainKey {
            dyset: IdxSet::empty(),
            groups: vec![mono(vec![2]), mono(vec![2]), mono(vec![2])],
        };
        assert_eq!(rb.terms[&key], XPoly::constant(d, rint(-6)));
    }

    #[test]
    fn transport_commutes_with_diff() {
        let d = 2;
        let l = vec![vec![rint(2), rint(1)], vec![rint(1), rint(1)]];
        let linv = vec![vec![rint(1), rint(-1)], vec![rint(-1), rint(2)]];
        let b = HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::from_iter([1]),
            vec![mono(vec![1, 1]), mono(vec![0, 2]), mono(vec![1, 0])],
            XPoly::var(d, 0),
        );
        let lhs = linear_transport(&chain_diff(&b), &l, &linv);
        let rhs = chain_diff(&linear_transport(&b, &l, &linv));
        assert_eq!(lhs, rhs);
    }
}
