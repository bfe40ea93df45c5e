//! Sparse exact-rational polynomial layer: dense multi-indices with graded-lex
//! order, polynomials as monomial maps, and odd index sets with sign helpers.

use crate::ratio::Rat;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Dense multi-index (exponent vector). Doubles as x-monomial, y-monomial,
/// operator slot and chain group payload. Ordered graded-lex: total degree
/// first, then lexicographic.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mono(pub Vec<u16>);

impl Mono {
    pub fn zero(d: usize) -> Self {
        Mono(vec![0; d])
    }

    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0; d];
        v[i] = 1;
        Mono(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &Mono) -> Mono {
        debug_assert_eq!(self.dim(), other.dim());
        Mono(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &Mono) -> Option<Mono> {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Mono)
    }

    pub fn leq(&self, other: &Mono) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Exponent falling factorial: coefficient of repeated partial derivatives,
    /// `d^a (x^m) = fall * x^(m-a)`; None if a is not componentwise <= m.
    pub fn falling(&self, a: &Mono) -> Option<(Mono, BigInt)> {
        let rest = self.checked_sub(a)?;
        let mut c = BigInt::one();
        for (m, al) in self.0.iter().zip(&a.0) {
            for t in (m - al + 1)..=*m {
                c *= t as i64;
            }
        }
        Some((rest, c))
    }

    /// All componentwise beta <= self with the product of binomials
    /// prod_i C(self_i, beta_i).
    pub fn subsplits(&self) -> Vec<(Mono, BigInt)> {
        let mut acc: Vec<(Vec<u16>, BigInt)> = vec![(Vec::new(), BigInt::one())];
        for &m in &self.0 {
            let mut next = Vec::with_capacity(acc.len() * (m as usize + 1));
            for (prefix, coeff) in &acc {
                let mut binom = BigInt::one();
                for b in 0..=m {
                    if b > 0 {
                        binom = binom * ((m - b + 1) as i64) / (b as i64);
                    }
                    let mut p = prefix.clone();
                    p.push(b);
                    next.push((p, coeff * &binom));
                }
            }
            acc = next;
        }
        acc.into_iter().map(|(v, c)| (Mono(v), c)).collect()
    }

    /// Splits of `self` into `parts` ordered summands with multinomial
    /// coefficients self!/(b_1! ... b_parts!): the Leibniz rule for a repeated
    /// derivative over a product of `parts` factors.
    pub fn multisplits(&self, parts: usize) -> Vec<(Vec<Mono>, BigInt)> {
        if parts == 0 {
            return if self.is_zero() {
                vec![(Vec::new(), BigInt::one())]
            } else {
                Vec::new()
            };
        }
        if parts == 1 {
            return vec![(vec![self.clone()], BigInt::one())];
        }
        let mut out = Vec::new();
        for (beta, cb) in self.subsplits() {
            let rest = self.checked_sub(&beta).unwrap();
            for (mut tail, ct) in rest.multisplits(parts - 1) {
                let mut v = Vec::with_capacity(parts);
                v.push(beta.clone());
                v.append(&mut tail);
                out.push((v, &cb * ct));
            }
        }
        out
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.total(), &self.0).cmp(&(other.total(), &other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All monomials in d variables of total degree at most cap, ascending in
/// the graded order.
pub fn monomials_up_to(d: usize, cap: u32) -> Vec<Mono> {
    let mut out = vec![Mono::zero(d)];
    let mut layer = vec![Mono::zero(d)];
    for _ in 0..cap {
        let mut next = Vec::new();
        for m in &layer {
            let lead = m.0.iter().position(|&e| e > 0).unwrap_or(d);
            for i in 0..=lead.min(d - 1) {
                let mut n = m.clone();
                n.0[i] += 1;
                next.push(n);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out.sort();
    out
}

/// Set of odd indices (dy, dx or wedge slots) as a bitmask, canonically
/// ascending. All sign bookkeeping for anticommuting families lives here.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct IdxSet(pub u32);

impl IdxSet {
    pub fn empty() -> Self {
        IdxSet(0)
    }

    pub fn from_iter<I: IntoIterator<Item = usize>>(it: I) -> Self {
        let mut s = 0u32;
        for i in it {
            s |= 1 << i;
        }
        IdxSet(s)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// Wedge e_i from the left: sign is the parity of elements below i.
    /// None if i already present.
    pub fn wedge_var(self, i: usize) -> Option<(IdxSet, bool)> {
        if self.contains(i) {
            return None;
        }
        let below = (self.0 & ((1u32 << i) - 1)).count_ones();
        Some((IdxSet(self.0 | (1 << i)), below % 2 == 1))
    }

    /// self wedge other (self block first); sign counts transpositions needed
    /// to merge the two ascending blocks. None on overlap.
    pub fn wedge(self, other: IdxSet) -> Option<(IdxSet, bool)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut inversions = 0u32;
        for i in other.iter() {
            inversions += (self.0 >> (i + 1)).count_ones();
        }
        Some((IdxSet(self.0 | other.0), inversions % 2 == 1))
    }

    /// Left contraction by index i: removes it, sign is the parity of
    /// elements below i (the letter is walked in from the left).
    pub fn remove_with_sign(self, i: usize) -> Option<(IdxSet, bool)> {
        if !self.contains(i) {
            return None;
        }
        let below = (self.0 & ((1u32 << i) - 1)).count_ones();
        Some((IdxSet(self.0 & !(1 << i)), below % 2 == 1))
    }
}

/// Sparse polynomial in the chart variables with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct XPoly {
    pub d: usize,
    pub terms: BTreeMap<Mono, Rat>,
}

impl XPoly {
    pub fn zero(d: usize) -> Self {
        XPoly { d, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: Rat) -> Self {
        let mut p = XPoly::zero(d);
        p.insert(Mono::zero(d), c);
        p
    }

    pub fn one(d: usize) -> Self {
        XPoly::constant(d, Rat::one())
    }

    pub fn var(d: usize, i: usize) -> Self {
        let mut p = XPoly::zero(d);
        p.insert(Mono::unit(d, i), Rat::one());
        p
    }

    pub fn monomial(d: usize, m: Mono, c: Rat) -> Self {
        let mut p = XPoly::zero(d);
        p.insert(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_zero())
    }

    pub fn insert(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = e.get_mut();
                *v += c;
                if v.is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &XPoly) {
        for (m, c) in &other.terms {
            self.insert(m.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &XPoly) -> XPoly {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &XPoly) -> XPoly {
        let mut r = self.clone();
        for (m, c) in &other.terms {
            r.insert(m.clone(), -c.clone());
        }
        r
    }

    pub fn neg(&self) -> XPoly {
        self.scale(&-Rat::one())
    }

    pub fn scale(&self, c: &Rat) -> XPoly {
        if c.is_zero() {
            return XPoly::zero(self.d);
        }
        XPoly {
            d: self.d,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &XPoly) -> XPoly {
        let mut r = XPoly::zero(self.d);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                r.insert(m1.add(m2), c1 * c2);
            }
        }
        r
    }

    pub fn deriv(&self, i: usize) -> XPoly {
        let mut r = XPoly::zero(self.d);
        for (m, c) in &self.terms {
            if m.0[i] > 0 {
                let mut e = m.clone();
                e.0[i] -= 1;
                r.insert(e, c * Rat::from_integer(BigInt::from(m.0[i])));
            }
        }
        r
    }

    /// Repeated derivative d^a (no factorial normalization).
    pub fn deriv_multi(&self, a: &Mono) -> XPoly {
        let mut r = XPoly::zero(self.d);
        for (m, c) in &self.terms {
            if let Some((rest, fall)) = m.falling(a) {
                r.insert(rest, c * Rat::from_integer(fall));
            }
        }
        r
    }

    pub fn total_deg(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.total()).max()
    }

    /// Truncate to total degree <= cap.
    pub fn truncate(&self, cap: u32) -> XPoly {
        XPoly {
            d: self.d,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.total() <= cap)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Substitute x_i -> sum_j l[i][j] x_j (linear change of chart).
    pub fn linear_subst(&self, l: &[Vec<Rat>]) -> XPoly {
        let d = self.d;
        let imgs: Vec<XPoly> = (0..d)
            .map(|i| {
                let mut p = XPoly::zero(d);
                for (j, c) in l[i].iter().enumerate() {
                    if !c.is_zero() {
                        p.insert(Mono::unit(d, j), c.clone());
                    }
                }
                p
            })
            .collect();
        let mut out = XPoly::zero(d);
        for (m, c) in &self.terms {
            let mut acc = XPoly::constant(d, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    acc = acc.mul(&imgs[i]);
                }
            }
            out.add_assign(&acc);
        }
        out
    }

    /// Evaluate at a rational point.
    pub fn eval(&self, x: &[Rat]) -> Rat {
        let mut acc = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t *= &x[i];
                }
            }
            acc += t;
        }
        acc
    }
}
