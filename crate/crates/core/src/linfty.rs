//! Finite-dimensional L-infinity kernel: graded bases, structure tables,
//! relation checkers, partial homotopies and Maurer-Cartan twists.
//!
//! Everything is stored in the suspended symmetric convention: a basis
//! element of degree k enters words with parity k - 1, words are kept sorted,
//! and every sign is the Koszul sign of that parity. Constructors that accept
//! classical data (a differential and a graded Lie bracket, say) apply the
//! suspension signs once on input, so the checkers themselves are sign-free
//! combinatorics over the stored tables. A word with a repeated odd letter is
//! zero; a repeated even letter (degree 1, such as a Maurer-Cartan element)
//! is allowed, which is what makes the exponential series below finite and
//! exact at a fixed arity cap.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::ratio::Rat;

pub type Word = Vec<usize>;
pub(crate) type CElem = BTreeMap<Word, Rat>;

#[derive(Clone, Debug, PartialEq)]
pub struct GradedBasis {
    pub names: Vec<String>,
    pub degrees: Vec<i64>,
    pub filtration: Vec<u32>,
}

impl GradedBasis {
    pub fn new(items: &[(&str, i64, u32)]) -> Result<GradedBasis, String> {
        if items.is_empty() {
            return Err("graded basis must contain at least one element".into());
        }
        let mut names = Vec::new();
        for (name, _, _) in items {
            if name.is_empty() {
                return Err("basis element names must be nonempty".into());
            }
            if names.iter().any(|n| n == name) {
                return Err(format!("duplicate basis element name {name}"));
            }
            names.push(name.to_string());
        }
        Ok(GradedBasis {
            names,
            degrees: items.iter().map(|it| it.1).collect(),
            filtration: items.iter().map(|it| it.2).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Suspended degree of a basis element.
    pub fn sigma(&self, i: usize) -> i64 {
        self.degrees[i] - 1
    }

    fn odd(&self) -> Vec<bool> {
        self.degrees.iter().map(|k| (k - 1).rem_euclid(2) == 1).collect()
    }
}

pub(crate) fn word_sigma(basis: &GradedBasis, word: &[usize]) -> i64 {
    word.iter().map(|&i| basis.sigma(i)).sum()
}

pub(crate) fn word_name(basis: &GradedBasis, word: &[usize]) -> String {
    if word.is_empty() {
        return "1".into();
    }
    word.iter().map(|&i| basis.names[i].as_str()).collect::<Vec<_>>().join("^")
}

/// Koszul sign (as a parity) of rearranging `word` into `word[perm]`.
pub(crate) fn perm_sign(odd: &[bool], word: &[usize], perm: &[usize]) -> bool {
    let mut neg = false;
    for a in 0..perm.len() {
        for b in a + 1..perm.len() {
            if perm[a] > perm[b] && odd[word[perm[a]]] && odd[word[perm[b]]] {
                neg = !neg;
            }
        }
    }
    neg
}

/// Sorts a word, returning the Koszul parity picked up, or None if the word
/// vanishes because an odd letter repeats.
pub(crate) fn word_sort(odd: &[bool], word: &[usize]) -> Option<(Word, bool)> {
    let mut w = word.to_vec();
    let mut neg = false;
    for i in 1..w.len() {
        let mut j = i;
        while j > 0 && w[j - 1] > w[j] {
            if odd[w[j - 1]] && odd[w[j]] {
                neg = !neg;
            }
            w.swap(j - 1, j);
            j -= 1;
        }
    }
    for k in 1..w.len() {
        if w[k] == w[k - 1] && odd[w[k]] {
            return None;
        }
    }
    Some((w, neg))
}

pub(crate) fn mask_split(n: usize, mask: usize) -> (Vec<usize>, Vec<usize>) {
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for p in 0..n {
        if mask & (1 << p) != 0 {
            inside.push(p);
        } else {
            outside.push(p);
        }
    }
    (inside, outside)
}

/// All set partitions of 0..n, blocks ordered by their minimal element.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

fn inv_fact(k: usize) -> Rat {
    let mut f = BigInt::one();
    for i in 2..=k {
        f *= i;
    }
    Rat::new(BigInt::one(), f)
}

fn vzero(n: usize) -> Vec<Rat> {
    vec![Rat::zero(); n]
}

fn vadd(acc: &mut [Rat], v: &[Rat], c: &Rat) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x * c;
    }
}

fn vis_zero(v: &[Rat]) -> bool {
    v.iter().all(|x| x.is_zero())
}

fn celem_insert(x: &mut CElem, w: Word, c: Rat) {
    if c.is_zero() {
        return;
    }
    match x.entry(w) {
        std::collections::btree_map::Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if o.get().is_zero() {
                o.remove();
            }
        }
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(c);
        }
    }
}

/// Wedge a vector letter onto every word of a coalgebra element.
fn wedge_vec(odd: &[bool], x: &CElem, v: &[Rat]) -> CElem {
    let mut out = CElem::new();
    for (w, c) in x {
        for (b, vb) in v.iter().enumerate() {
            if vb.is_zero() {
                continue;
            }
            let mut ww = w.clone();
            ww.push(b);
            if let Some((sw, neg)) = word_sort(odd, &ww) {
                let coeff = if neg { -(c * vb) } else { c * vb };
                celem_insert(&mut out, sw, coeff);
            }
        }
    }
    out
}

/// Reduced coproduct into ordered pairs of nonempty words.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn coproduct(odd: &[bool], x: &CElem) -> BTreeMap<(Word, Word), Rat> {
    let mut out: BTreeMap<(Word, Word), Rat> = BTreeMap::new();
    for (w, c) in x {
        let n = w.len();
        for mask in 1..(1usize << n).saturating_sub(1) {
            let (i_pos, j_pos) = mask_split(n, mask);
            let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
            let neg = perm_sign(odd, w, &perm);
            let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
            let wj: Word = j_pos.iter().map(|&p| w[p]).collect();
            let coeff = if neg { -c.clone() } else { c.clone() };
            let e = out.entry((wi, wj)).or_insert_with(Rat::zero);
            *e += coeff;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualEntry {
    pub law: String,
    pub arity: usize,
    pub word: String,
    pub component: String,
    pub value: Rat,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
}

impl ResidualReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_arity(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.arity).min()
    }

    fn push(&mut self, law: &str, arity: usize, word: String, basis: &GradedBasis, value: &[Rat]) {
        for (b, v) in value.iter().enumerate() {
            if !v.is_zero() {
                self.entries.push(ResidualEntry {
                    law: law.into(),
                    arity,
                    word: word.clone(),
                    component: basis.names[b].clone(),
                    value: v.clone(),
                });
            }
        }
    }
}

/// A graded vector space with symmetric structure tables of arities
/// 1..=n_ar, each of suspended degree +1.
#[derive(Clone, Debug, PartialEq)]
pub struct LinftySpace {
    pub basis: GradedBasis,
    pub n_ar: usize,
    q: Vec<BTreeMap<Word, Vec<Rat>>>,
}

impl LinftySpace {
    pub fn zero(basis: GradedBasis, n_ar: usize) -> LinftySpace {
        LinftySpace { basis, n_ar, q: vec![BTreeMap::new(); n_ar] }
    }

    /// Builds the tables of a differential graded Lie algebra. `diff[i]` is
    /// the differential of the i-th basis element; `bracket` holds the
    /// brackets of basis pairs keyed by (i, j) with i <= j. Degree support
    /// and the constraint that an even element brackets to zero with itself
    /// are validated here; the Leibniz and Jacobi laws are the checker's job.
    pub fn dgla(
        basis: GradedBasis,
        n_ar: usize,
        diff: &[Vec<Rat>],
        bracket: &BTreeMap<(usize, usize), Vec<Rat>>,
    ) -> Result<LinftySpace, String> {
        let dim = basis.dim();
        if diff.len() != dim {
            return Err("differential must have one column per basis element".into());
        }
        let mut sp = LinftySpace::zero(basis, n_ar);
        for (i, col) in diff.iter().enumerate() {
            if col.len() != dim {
                return Err("differential column has wrong length".into());
            }
            for (b, v) in col.iter().enumerate() {
                if !v.is_zero() && sp.basis.degrees[b] != sp.basis.degrees[i] + 1 {
                    return Err(format!(
                        "differential of {} must have degree {}",
                        sp.basis.names[i],
                        sp.basis.degrees[i] + 1
                    ));
                }
            }
            if !vis_zero(col) {
                sp.q[0].insert(vec![i], col.clone());
            }
        }
        for (&(i, j), val) in bracket {
            if i > j || j >= dim || val.len() != dim {
                return Err("bracket keys must satisfy i <= j with vectors of basis length".into());
            }
            let deg = sp.basis.degrees[i] + sp.basis.degrees[j];
            for (b, v) in val.iter().enumerate() {
                if !v.is_zero() && sp.basis.degrees[b] != deg {
                    return Err(format!(
                        "bracket of {} and {} must have degree {deg}",
                        sp.basis.names[i], sp.basis.names[j]
                    ));
                }
            }
            if i == j && sp.basis.degrees[i].rem_euclid(2) == 0 && !vis_zero(val) {
                return Err(format!(
                    "bracket of the even element {} with itself must vanish",
                    sp.basis.names[i]
                ));
            }
            if vis_zero(val) {
                continue;
            }
            // Suspension: the table entry for the sorted pair carries the
            // sign (-1)^{sigma_i} relative to the classical bracket.
            let mut sval = val.clone();
            if sp.basis.sigma(i).rem_euclid(2) == 1 {
                for v in &mut sval {
                    *v = -v.clone();
                }
            }
            if n_ar >= 2 {
                sp.q[1].insert(vec![i, j], sval);
            }
        }
        Ok(sp)
    }

    pub(crate) fn odd(&self) -> Vec<bool> {
        self.basis.odd()
    }

    /// Largest arity carrying a nonzero table.
    pub fn max_table_arity(&self) -> usize {
        (1..=self.n_ar).rev().find(|&n| !self.q[n - 1].is_empty()).unwrap_or(0)
    }

    /// Inserts a table value for a word given in the suspended convention.
    pub fn set_q(&mut self, word: &[usize], value: &[Rat]) -> Result<(), String> {
        let n = word.len();
        if n == 0 || n > self.n_ar {
            return Err(format!("structure map arity {n} outside 1..={}", self.n_ar));
        }
        if value.len() != self.basis.dim() {
            return Err("value vector has wrong length".into());
        }
        let odd = self.odd();
        let (sw, neg) = match word_sort(&odd, word) {
            Some(x) => x,
            None => {
                if vis_zero(value) {
                    return Ok(());
                }
                return Err("word with a repeated odd letter vanishes".into());
            }
        };
        let want = word_sigma(&self.basis, &sw) + 1;
        for (b, v) in value.iter().enumerate() {
            if !v.is_zero() && self.basis.sigma(b) != want {
                return Err(format!(
                    "structure value on {} must have suspended degree {want}",
                    word_name(&self.basis, &sw)
                ));
            }
        }
        let mut val = value.to_vec();
        if neg {
            for v in &mut val {
                *v = -v.clone();
            }
        }
        if vis_zero(&val) {
            self.q[n - 1].remove(&sw);
        } else {
            self.q[n - 1].insert(sw, val);
        }
        Ok(())
    }

    /// Evaluates the structure map on a word in any letter order.
    pub fn eval_q(&self, word: &[usize]) -> Vec<Rat> {
        let dim = self.basis.dim();
        let n = word.len();
        if n == 0 || n > self.n_ar {
            return vzero(dim);
        }
        let odd = self.odd();
        match word_sort(&odd, word) {
            None => vzero(dim),
            Some((sw, neg)) => match self.q[n - 1].get(&sw) {
                None => vzero(dim),
                Some(v) => {
                    if neg {
                        v.iter().map(|x| -x.clone()).collect()
                    } else {
                        v.clone()
                    }
                }
            },
        }
    }

    /// Canonical sorted words of a given length, repeated odd letters excluded.
    pub fn words(&self, n: usize) -> Vec<Word> {
        let odd = self.odd();
        let dim = self.basis.dim();
        let mut out = Vec::new();
        let mut cur: Word = Vec::new();
        fn rec(start: usize, n: usize, dim: usize, odd: &[bool], cur: &mut Word, out: &mut Vec<Word>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for b in start..dim {
                if odd[b] && cur.last() == Some(&b) {
                    continue;
                }
                cur.push(b);
                rec(b, n, dim, odd, cur, out);
                cur.pop();
            }
        }
        rec(0, n, dim, &odd, &mut cur, &mut out);
        out
    }

    /// The coderivation assembled from the structure maps, applied to a
    /// coalgebra element: on each word, every nonempty subset is fed to the
    /// table and the result rides in front of the remaining letters.
    pub(crate) fn coderivation(&self, x: &CElem) -> CElem {
        let odd = self.odd();
        let mut out = CElem::new();
        for (w, c) in x {
            let n = w.len();
            for mask in 1..(1usize << n) {
                let (i_pos, j_pos) = mask_split(n, mask);
                if i_pos.len() > self.n_ar {
                    continue;
                }
                let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
                let neg = perm_sign(&odd, w, &perm);
                let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
                let inner = self.eval_q(&wi);
                if vis_zero(&inner) {
                    continue;
                }
                for (b, vb) in inner.iter().enumerate() {
                    if vb.is_zero() {
                        continue;
                    }
                    let mut ww = vec![b];
                    ww.extend(j_pos.iter().map(|&p| w[p]));
                    if let Some((sw, neg2)) = word_sort(&odd, &ww) {
                        let mut coeff = c * vb;
                        if neg != neg2 {
                            coeff = -coeff;
                        }
                        celem_insert(&mut out, sw, coeff);
                    }
                }
            }
        }
        out
    }
}

/// Checks the tower of quadratic relations on the structure tables. An empty
/// report means every relation up to the arity cap holds exactly.
pub fn check_linfty(sp: &LinftySpace) -> ResidualReport {
    let odd = sp.odd();
    let dim = sp.basis.dim();
    let mut report = ResidualReport::default();
    for n in 1..=sp.n_ar {
        for w in sp.words(n) {
            let mut r = vzero(dim);
            for mask in 1..(1usize << n) {
                let (i_pos, j_pos) = mask_split(n, mask);
                let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
                let neg = perm_sign(&odd, &w, &perm);
                let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
                let inner = sp.eval_q(&wi);
                if vis_zero(&inner) {
                    continue;
                }
                for (b, vb) in inner.iter().enumerate() {
                    if vb.is_zero() {
                        continue;
                    }
                    let mut ww = vec![b];
                    ww.extend(j_pos.iter().map(|&p| w[p]));
                    let out = sp.eval_q(&ww);
                    let c = if neg { -vb.clone() } else { vb.clone() };
                    vadd(&mut r, &out, &c);
                }
            }
            report.push("structure", n, word_name(&sp.basis, &w), &sp.basis, &r);
        }
    }
    report
}

/// A morphism of truncated structures, stored as suspended degree-zero
/// tables of arities 1..=arity().
#[derive(Clone, Debug, PartialEq)]
pub struct LinftyMorphism {
    pub source: LinftySpace,
    pub target: LinftySpace,
    f: Vec<BTreeMap<Word, Vec<Rat>>>,
}

impl LinftyMorphism {
    pub fn zero(source: LinftySpace, target: LinftySpace) -> Result<LinftyMorphism, String> {
        if target.n_ar < source.n_ar {
            return Err("target arity cap must cover the source arity cap".into());
        }
        let n = source.n_ar;
        Ok(LinftyMorphism { source, target, f: vec![BTreeMap::new(); n] })
    }

    /// A strict morphism: only the linear part is nonzero.
    pub fn strict(
        source: LinftySpace,
        target: LinftySpace,
        matrix: &[Vec<Rat>],
    ) -> Result<LinftyMorphism, String> {
        if matrix.len() != source.basis.dim() {
            return Err("strict morphism needs one column per source basis element".into());
        }
        let mut m = LinftyMorphism::zero(source, target)?;
        for (i, col) in matrix.iter().enumerate() {
            m.set_f(&[i], col)?;
        }
        Ok(m)
    }

    pub fn identity(space: &LinftySpace) -> LinftyMorphism {
        let dim = space.basis.dim();
        let mut cols = vec![vzero(dim); dim];
        for (i, col) in cols.iter_mut().enumerate() {
            col[i] = Rat::one();
        }
        LinftyMorphism::strict(space.clone(), space.clone(), &cols).expect("identity is well formed")
    }

    pub fn arity(&self) -> usize {
        self.f.len()
    }

    pub fn set_f(&mut self, word: &[usize], value: &[Rat]) -> Result<(), String> {
        let n = word.len();
        if n == 0 || n > self.f.len() {
            return Err(format!("morphism arity {n} outside 1..={}", self.f.len()));
        }
        if value.len() != self.target.basis.dim() {
            return Err("value vector has wrong length".into());
        }
        let odd = self.source.odd();
        let (sw, neg) = match word_sort(&odd, word) {
            Some(x) => x,
            None => {
                if vis_zero(value) {
                    return Ok(());
                }
                return Err("word with a repeated odd letter vanishes".into());
            }
        };
        let want = word_sigma(&self.source.basis, &sw);
        for (b, v) in value.iter().enumerate() {
            if !v.is_zero() && self.target.basis.sigma(b) != want {
                return Err(format!(
                    "morphism value on {} must have suspended degree {want}",
                    word_name(&self.source.basis, &sw)
                ));
            }
        }
        let mut val = value.to_vec();
        if neg {
            for v in &mut val {
                *v = -v.clone();
            }
        }
        if vis_zero(&val) {
            self.f[n - 1].remove(&sw);
        } else {
            self.f[n - 1].insert(sw, val);
        }
        Ok(())
    }

    pub fn eval_f(&self, word: &[usize]) -> Vec<Rat> {
        let dim = self.target.basis.dim();
        let n = word.len();
        if n == 0 || n > self.f.len() {
            return vzero(dim);
        }
        let odd = self.source.odd();
        match word_sort(&odd, word) {
            None => vzero(dim),
            Some((sw, neg)) => match self.f[n - 1].get(&sw) {
                None => vzero(dim),
                Some(v) => {
                    if neg {
                        v.iter().map(|x| -x.clone()).collect()
                    } else {
                        v.clone()
                    }
                }
            },
        }
    }

    /// The induced coalgebra morphism on a single word: a sum over set
    /// partitions, each block fed to a table and the block values wedged in
    /// order of the blocks' minimal positions.
    pub(crate) fn full_word(&self, w: &Word) -> CElem {
        let sodd = self.source.odd();
        let todd = self.target.odd();
        let mut out = CElem::new();
        for blocks in set_partitions(w.len()) {
            let perm: Vec<usize> = blocks.iter().flatten().copied().collect();
            let neg = perm_sign(&sodd, w, &perm);
            let mut acc: CElem = CElem::new();
            acc.insert(Vec::new(), Rat::one());
            let mut dead = false;
            for block in &blocks {
                let wb: Word = block.iter().map(|&p| w[p]).collect();
                let v = self.eval_f(&wb);
                if vis_zero(&v) {
                    dead = true;
                    break;
                }
                acc = wedge_vec(&todd, &acc, &v);
                if acc.is_empty() {
                    dead = true;
                    break;
                }
            }
            if dead {
                continue;
            }
            for (u, c) in acc {
                let coeff = if neg { -c } else { c };
                celem_insert(&mut out, u, coeff);
            }
        }
        out
    }

}

/// Checks that the tables of a morphism intertwine the two coderivations.
pub fn check_morphism(m: &LinftyMorphism) -> ResidualReport {
    let sodd = m.source.odd();
    let dim = m.target.basis.dim();
    let mut report = ResidualReport::default();
    for n in 1..=m.arity() {
        for w in m.source.words(n) {
            let mut r = vzero(dim);
            // Source side: feed every nonempty subset to the source tables,
            // then the morphism.
            for mask in 1..(1usize << n) {
                let (i_pos, j_pos) = mask_split(n, mask);
                let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
                let neg = perm_sign(&sodd, &w, &perm);
                let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
                let inner = m.source.eval_q(&wi);
                if vis_zero(&inner) {
                    continue;
                }
                for (b, vb) in inner.iter().enumerate() {
                    if vb.is_zero() {
                        continue;
                    }
                    let mut ww = vec![b];
                    ww.extend(j_pos.iter().map(|&p| w[p]));
                    let out = m.eval_f(&ww);
                    let c = if neg { -vb.clone() } else { vb.clone() };
                    vadd(&mut r, &out, &c);
                }
            }
            // Target side: the coderivation applied to the image of the word.
            let image = m.full_word(&w);
            for (u, c) in &image {
                let out = m.target.eval_q(u);
                vadd(&mut r, &out, &-c.clone());
            }
            report.push("morphism", n, word_name(&m.source.basis, &w), &m.target.basis, &r);
        }
    }
    report
}

/// Composes two morphisms (outer after inner).
pub fn compose_morphism(
    outer: &LinftyMorphism,
    inner: &LinftyMorphism,
) -> Result<LinftyMorphism, String> {
    if inner.target != outer.source {
        return Err("morphisms do not compose: middle spaces differ".into());
    }
    let mut out = LinftyMorphism::zero(inner.source.clone(), outer.target.clone())?;
    for n in 1..=inner.arity() {
        for w in inner.source.words(n) {
            let mid = inner.full_word(&w);
            let dim = outer.target.basis.dim();
            let mut val = vzero(dim);
            for (u, c) in &mid {
                let v = outer.eval_f(u);
                vadd(&mut val, &v, c);
            }
            if !vis_zero(&val) {
                out.set_f(&w, &val)?;
            }
        }
    }
    Ok(out)
}

/// A module over a structured space: tables phi[n] of suspended degree +1
/// taking n algebra letters and one module element.
#[derive(Clone, Debug, PartialEq)]
pub struct LinftyModule {
    pub algebra: LinftySpace,
    pub mbasis: GradedBasis,
    phi: Vec<BTreeMap<(Word, usize), Vec<Rat>>>,
}

impl LinftyModule {
    pub fn zero(algebra: LinftySpace, mbasis: GradedBasis) -> LinftyModule {
        let n = algebra.n_ar;
        LinftyModule { algebra, mbasis, phi: vec![BTreeMap::new(); n + 1] }
    }

    /// A differential graded module: `b` is the module differential by
    /// columns and `action[i]` the operator of the i-th algebra element.
    pub fn dg_module(
        algebra: LinftySpace,
        mbasis: GradedBasis,
        b: &[Vec<Rat>],
        action: &[Vec<Vec<Rat>>],
    ) -> Result<LinftyModule, String> {
        let mdim = mbasis.dim();
        if b.len() != mdim || action.len() != algebra.basis.dim() {
            return Err("module data has wrong shape".into());
        }
        let mut md = LinftyModule::zero(algebra, mbasis);
        for (m, col) in b.iter().enumerate() {
            md.set_phi(&[], m, col)?;
        }
        for (i, op) in action.iter().enumerate() {
            if op.len() != mdim {
                return Err("action matrix has wrong shape".into());
            }
            for (m, col) in op.iter().enumerate() {
                md.set_phi(&[i], m, col)?;
            }
        }
        Ok(md)
    }

    /// The adjoint module of a space whose tables stop at arity two.
    pub fn adjoint(space: &LinftySpace) -> LinftyModule {
        let dim = space.basis.dim();
        let mut b = vec![vzero(dim); dim];
        for (i, col) in b.iter_mut().enumerate() {
            *col = space.eval_q(&[i]);
        }
        let mut action = vec![vec![vzero(dim); dim]; dim];
        for i in 0..dim {
            for m in 0..dim {
                let mut v = space.eval_q(&[i, m]);
                if space.basis.sigma(i).rem_euclid(2) == 1 {
                    for x in &mut v {
                        *x = -x.clone();
                    }
                }
                action[i][m] = v;
            }
        }
        LinftyModule::dg_module(space.clone(), space.basis.clone(), &b, &action)
            .expect("adjoint data is well formed")
    }

    pub fn set_phi(&mut self, word: &[usize], m: usize, value: &[Rat]) -> Result<(), String> {
        let n = word.len();
        if n >= self.phi.len() {
            return Err(format!("module arity {n} outside 0..={}", self.phi.len() - 1));
        }
        if m >= self.mbasis.dim() || value.len() != self.mbasis.dim() {
            return Err("module value has wrong shape".into());
        }
        let odd = self.algebra.odd();
        let (sw, neg) = match word_sort(&odd, word) {
            Some(x) => x,
            None => {
                if vis_zero(value) {
                    return Ok(());
                }
                return Err("word with a repeated odd letter vanishes".into());
            }
        };
        let want = word_sigma(&self.algebra.basis, &sw) + self.mbasis.degrees[m] + 1;
        for (mb, v) in value.iter().enumerate() {
            if !v.is_zero() && self.mbasis.degrees[mb] != want {
                return Err(format!(
                    "module value on {} must have degree {want}",
                    word_name(&self.algebra.basis, &sw)
                ));
            }
        }
        let mut val = value.to_vec();
        if neg {
            for v in &mut val {
                *v = -v.clone();
            }
        }
        if vis_zero(&val) {
            self.phi[n].remove(&(sw, m));
        } else {
            self.phi[n].insert((sw, m), val);
        }
        Ok(())
    }

    pub fn eval_phi(&self, word: &[usize], m: usize) -> Vec<Rat> {
        let dim = self.mbasis.dim();
        let n = word.len();
        if n >= self.phi.len() {
            return vzero(dim);
        }
        let odd = self.algebra.odd();
        match word_sort(&odd, word) {
            None => vzero(dim),
            Some((sw, neg)) => match self.phi[n].get(&(sw, m)) {
                None => vzero(dim),
                Some(v) => {
                    if neg {
                        v.iter().map(|x| -x.clone()).collect()
                    } else {
                        v.clone()
                    }
                }
            },
        }
    }
}

/// Checks the module relations. The arity-zero relation is the square of the
/// module differential.
pub fn check_module(md: &LinftyModule) -> ResidualReport {
    let odd = md.algebra.odd();
    let mdim = md.mbasis.dim();
    let mut report = ResidualReport::default();
    let top = md.phi.len() - 1;
    for n in 0..=top {
        for w in md.algebra.words(n) {
            for m in 0..mdim {
                let mut r = vzero(mdim);
                // Module part applied twice. The inner map extracts the
                // subset I; being odd, it crosses the remaining letters.
                for mask in 0..(1usize << n) {
                    let (i_pos, j_pos) = mask_split(n, mask);
                    let perm: Vec<usize> = j_pos.iter().chain(&i_pos).copied().collect();
                    let mut neg = perm_sign(&odd, &w, &perm);
                    if j_pos.iter().filter(|&&p| odd[w[p]]).count() % 2 == 1 {
                        neg = !neg;
                    }
                    let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
                    let wj: Word = j_pos.iter().map(|&p| w[p]).collect();
                    let inner = md.eval_phi(&wi, m);
                    for (mb, c) in inner.iter().enumerate() {
                        if c.is_zero() {
                            continue;
                        }
                        let out = md.eval_phi(&wj, mb);
                        let cc = if neg { -c.clone() } else { c.clone() };
                        vadd(&mut r, &out, &cc);
                    }
                }
                // Algebra part, entering with a relative minus sign.
                for mask in 1..(1usize << n) {
                    let (i_pos, j_pos) = mask_split(n, mask);
                    let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
                    let neg = perm_sign(&odd, &w, &perm);
                    let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
                    let inner = md.algebra.eval_q(&wi);
                    for (b, c) in inner.iter().enumerate() {
                        if c.is_zero() {
                            continue;
                        }
                        let mut ww = vec![b];
                        ww.extend(j_pos.iter().map(|&p| w[p]));
                        let out = md.eval_phi(&ww, m);
                        let cc = if neg { c.clone() } else { -c.clone() };
                        vadd(&mut r, &out, &cc);
                    }
                }
                let word = format!("{}|{}", word_name(&md.algebra.basis, &w), md.mbasis.names[m]);
                report.push("module", n, word, &md.mbasis, &r);
            }
        }
    }
    report
}

/// A morphism of modules over one and the same algebra, stored as suspended
/// degree-zero tables kappa[n].
#[derive(Clone, Debug, PartialEq)]
pub struct LinftyModuleMorphism {
    pub source: LinftyModule,
    pub target: LinftyModule,
    kappa: Vec<BTreeMap<(Word, usize), Vec<Rat>>>,
}

impl LinftyModuleMorphism {
    pub fn zero(source: LinftyModule, target: LinftyModule) -> Result<LinftyModuleMorphism, String> {
        if source.algebra != target.algebra {
            return Err("module morphism requires a shared algebra".into());
        }
        let n = source.algebra.n_ar;
        Ok(LinftyModuleMorphism { source, target, kappa: vec![BTreeMap::new(); n + 1] })
    }

    /// A morphism with only the arity-zero table: a plain linear map.
    pub fn from_linear(
        source: LinftyModule,
        target: LinftyModule,
        k0: &[Vec<Rat>],
    ) -> Result<LinftyModuleMorphism, String> {
        if k0.len() != source.mbasis.dim() {
            return Err("linear part needs one column per source module element".into());
        }
        let mut km = LinftyModuleMorphism::zero(source, target)?;
        for (m, col) in k0.iter().enumerate() {
            km.set_kappa(&[], m, col)?;
        }
        Ok(km)
    }

    pub fn identity(md: &LinftyModule) -> LinftyModuleMorphism {
        let dim = md.mbasis.dim();
        let mut cols = vec![vzero(dim); dim];
        for (i, col) in cols.iter_mut().enumerate() {
            col[i] = Rat::one();
        }
        LinftyModuleMorphism::from_linear(md.clone(), md.clone(), &cols)
            .expect("identity is well formed")
    }

    pub fn set_kappa(&mut self, word: &[usize], m: usize, value: &[Rat]) -> Result<(), String> {
        let n = word.len();
        if n >= self.kappa.len() {
            return Err(format!("morphism arity {n} outside 0..={}", self.kappa.len() - 1));
        }
        if m >= self.source.mbasis.dim() || value.len() != self.target.mbasis.dim() {
            return Err("module morphism value has wrong shape".into());
        }
        let odd = self.source.algebra.odd();
        let (sw, neg) = match word_sort(&odd, word) {
            Some(x) => x,
            None => {
                if vis_zero(value) {
                    return Ok(());
                }
                return Err("word with a repeated odd letter vanishes".into());
            }
        };
        let want = word_sigma(&self.source.algebra.basis, &sw) + self.source.mbasis.degrees[m];
        for (mb, v) in value.iter().enumerate() {
            if !v.is_zero() && self.target.mbasis.degrees[mb] != want {
                return Err(format!(
                    "module morphism value on {} must have degree {want}",
                    word_name(&self.source.algebra.basis, &sw)
                ));
            }
        }
        let mut val = value.to_vec();
        if neg {
            for v in &mut val {
                *v = -v.clone();
            }
        }
        if vis_zero(&val) {
            self.kappa[n].remove(&(sw, m));
        } else {
            self.kappa[n].insert((sw, m), val);
        }
        Ok(())
    }

    pub fn eval_kappa(&self, word: &[usize], m: usize) -> Vec<Rat> {
        let dim = self.target.mbasis.dim();
        let n = word.len();
        if n >= self.kappa.len() {
            return vzero(dim);
        }
        let odd = self.source.algebra.odd();
        match word_sort(&odd, word) {
            None => vzero(dim),
            Some((sw, neg)) => match self.kappa[n].get(&(sw, m)) {
                None => vzero(dim),
                Some(v) => {
                    if neg {
                        v.iter().map(|x| -x.clone()).collect()
                    } else {
                        v.clone()
                    }
                }
            },
        }
    }
}

/// Checks that a module morphism intertwines the two module structures.
pub fn check_module_morphism(km: &LinftyModuleMorphism) -> ResidualReport {
    let alg = &km.source.algebra;
    let odd = alg.odd();
    let ndim = km.target.mbasis.dim();
    let mut report = ResidualReport::default();
    let top = km.kappa.len() - 1;
    for n in 0..=top {
        for w in alg.words(n) {
            for m in 0..km.source.mbasis.dim() {
                let mut r = vzero(ndim);
                for mask in 0..(1usize << n) {
                    let (i_pos, j_pos) = mask_split(n, mask);
                    let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
                    let wj: Word = j_pos.iter().map(|&p| w[p]).collect();
                    // Source module structure first (odd, crossing the rest),
                    // then the morphism on what remains.
                    let perm: Vec<usize> = j_pos.iter().chain(&i_pos).copied().collect();
                    let mut neg = perm_sign(&odd, &w, &perm);
                    if j_pos.iter().filter(|&&p| odd[w[p]]).count() % 2 == 1 {
                        neg = !neg;
                    }
                    let inner = km.source.eval_phi(&wi, m);
                    for (mb, c) in inner.iter().enumerate() {
                        if c.is_zero() {
                            continue;
                        }
                        let out = km.eval_kappa(&wj, mb);
                        let cc = if neg { -c.clone() } else { c.clone() };
                        vadd(&mut r, &out, &cc);
                    }
                    // Morphism first (even, no crossing sign), then the
                    // target module structure, with a relative minus.
                    let neg2 = perm_sign(&odd, &w, &perm);
                    let inner2 = km.eval_kappa(&wi, m);
                    for (mb, c) in inner2.iter().enumerate() {
                        if c.is_zero() {
                            continue;
                        }
                        let out = km.target.eval_phi(&wj, mb);
                        let cc = if neg2 { c.clone() } else { -c.clone() };
                        vadd(&mut r, &out, &cc);
                    }
                }
                // Algebra part through the morphism, with a relative minus.
                for mask in 1..(1usize << n) {
                    let (i_pos, j_pos) = mask_split(n, mask);
                    let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
                    let neg = perm_sign(&odd, &w, &perm);
                    let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
                    let inner = alg.eval_q(&wi);
                    for (b, c) in inner.iter().enumerate() {
                        if c.is_zero() {
                            continue;
                        }
                        let mut ww = vec![b];
                        ww.extend(j_pos.iter().map(|&p| w[p]));
                        let out = km.eval_kappa(&ww, m);
                        let cc = if neg { c.clone() } else { -c.clone() };
                        vadd(&mut r, &out, &cc);
                    }
                }
                let word =
                    format!("{}|{}", word_name(&alg.basis, &w), km.source.mbasis.names[m]);
                report.push("module-morphism", n, word, &km.target.mbasis, &r);
            }
        }
    }
    report
}

/// A Maurer-Cartan candidate: a degree-one vector supported on filtration
/// level at least one.
#[derive(Clone, Debug, PartialEq)]
pub struct MCElement {
    pub vector: Vec<Rat>,
}

impl MCElement {
    pub fn new(space: &LinftySpace, vector: Vec<Rat>) -> Result<MCElement, String> {
        if vector.len() != space.basis.dim() {
            return Err("vector has wrong length".into());
        }
        for (b, v) in vector.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            if space.basis.degrees[b] != 1 {
                return Err(format!(
                    "component {} has degree {}, not 1",
                    space.basis.names[b], space.basis.degrees[b]
                ));
            }
            if space.basis.filtration[b] < 1 {
                return Err(format!(
                    "component {} sits at filtration level 0",
                    space.basis.names[b]
                ));
            }
        }
        Ok(MCElement { vector })
    }
}

/// The exponential of a degree-one vector inside the coalgebra, truncated at
/// the arity cap. All letters are even, so no signs appear.
pub(crate) fn cxp(space: &LinftySpace, pi: &[Rat]) -> CElem {
    let odd = space.odd();
    let mut out = CElem::new();
    let mut pw: CElem = CElem::new();
    pw.insert(Vec::new(), Rat::one());
    for k in 1..=space.n_ar {
        pw = wedge_vec(&odd, &pw, pi);
        let c = inv_fact(k);
        for (w, v) in &pw {
            celem_insert(&mut out, w.clone(), v * &c);
        }
    }
    out
}

/// The curvature series of a degree-one vector: the corank-one part of the
/// coderivation applied to its exponential.
pub fn mc_residual(space: &LinftySpace, pi: &[Rat]) -> Vec<Rat> {
    let odd = space.odd();
    let dim = space.basis.dim();
    let mut acc = vzero(dim);
    let mut pw: CElem = CElem::new();
    pw.insert(Vec::new(), Rat::one());
    for k in 1..=space.n_ar {
        pw = wedge_vec(&odd, &pw, pi);
        let c = inv_fact(k);
        for (w, v) in &pw {
            let q = space.eval_q(w);
            let coeff = v * &c;
            vadd(&mut acc, &q, &coeff);
        }
    }
    acc
}

/// Checks the Maurer-Cartan equation in both forms: the curvature series and
/// the coderivation of the exponential. The coalgebra form is compared only
/// on word lengths the arity cap resolves completely: a length-L word
/// receives contributions from exponential words up to L + A - 1 letters,
/// where A is the largest arity with a nonzero table, so lengths beyond
/// n_ar + 1 - A would mix in truncated data and are skipped.
pub fn mc_check(space: &LinftySpace, pi: &MCElement) -> ResidualReport {
    let mut report = ResidualReport::default();
    let r = mc_residual(space, &pi.vector);
    report.push("maurer-cartan", 1, "pi".into(), &space.basis, &r);
    let aq = space.max_table_arity();
    if aq > 0 {
        let cap = space.n_ar + 1 - aq;
        let e = cxp(space, &pi.vector);
        let qe = space.coderivation(&e);
        for (w, c) in &qe {
            if w.len() <= cap && !c.is_zero() {
                report.entries.push(ResidualEntry {
                    law: "maurer-cartan-coalgebra".into(),
                    arity: w.len(),
                    word: word_name(&space.basis, w),
                    component: String::new(),
                    value: c.clone(),
                });
            }
        }
    }
    report
}

/// Series of table evaluations with extra exponential letters wedged in.
fn pi_series<F: FnMut(&Word) -> Vec<Rat>>(
    odd: &[bool],
    pi: &[Rat],
    base: &Word,
    max_extra: usize,
    out_dim: usize,
    mut eval: F,
) -> Vec<Rat> {
    let mut acc = vzero(out_dim);
    let mut pw: CElem = CElem::new();
    pw.insert(base.clone(), Rat::one());
    for (w, c) in &pw {
        let v = eval(w);
        vadd(&mut acc, &v, c);
    }
    for k in 1..=max_extra {
        pw = wedge_vec(odd, &pw, pi);
        if pw.is_empty() {
            break;
        }
        let inv = inv_fact(k);
        for (w, c) in &pw {
            let v = eval(w);
            let coeff = c * &inv;
            vadd(&mut acc, &v, &coeff);
        }
    }
    acc
}

/// Twists the structure tables by a Maurer-Cartan element.
pub fn twist_algebra(space: &LinftySpace, pi: &MCElement) -> Result<LinftySpace, String> {
    let mc = mc_check(space, pi);
    if !mc.is_empty() {
        return Err(format!(
            "element is not Maurer-Cartan: residual in component {}",
            mc.entries[0].component
        ));
    }
    let odd = space.odd();
    let mut out = LinftySpace::zero(space.basis.clone(), space.n_ar);
    for n in 1..=space.n_ar {
        for w in space.words(n) {
            let val = pi_series(&odd, &pi.vector, &w, space.n_ar - n, space.basis.dim(), |u| {
                space.eval_q(u)
            });
            if !vis_zero(&val) {
                out.set_q(&w, &val)?;
            }
        }
    }
    Ok(out)
}

/// Pushes a Maurer-Cartan element forward along a morphism.
pub fn mc_pushforward(m: &LinftyMorphism, pi: &MCElement) -> Result<MCElement, String> {
    let mc = mc_check(&m.source, pi);
    if !mc.is_empty() {
        return Err("element is not Maurer-Cartan in the source".into());
    }
    let odd = m.source.odd();
    let dim = m.target.basis.dim();
    let mut acc = vzero(dim);
    let mut pw: CElem = CElem::new();
    pw.insert(Vec::new(), Rat::one());
    for k in 1..=m.arity() {
        pw = wedge_vec(&odd, &pw, &pi.vector);
        let inv = inv_fact(k);
        for (w, c) in &pw {
            let v = m.eval_f(w);
            let coeff = c * &inv;
            vadd(&mut acc, &v, &coeff);
        }
    }
    MCElement::new(&m.target, acc)
}

/// Twists a morphism by a Maurer-Cartan element of its source. The result
/// maps the twisted source to the target twisted by the pushforward.
pub fn twist_morphism(m: &LinftyMorphism, pi: &MCElement) -> Result<LinftyMorphism, String> {
    let s = mc_pushforward(m, pi)?;
    let source = twist_algebra(&m.source, pi)?;
    let target = twist_algebra(&m.target, &s)?;
    let odd = m.source.odd();
    let mut out = LinftyMorphism::zero(source, target)?;
    for n in 1..=m.arity() {
        for w in m.source.words(n) {
            let val = pi_series(&odd, &pi.vector, &w, m.arity() - n, m.target.basis.dim(), |u| {
                m.eval_f(u)
            });
            if !vis_zero(&val) {
                out.set_f(&w, &val)?;
            }
        }
    }
    Ok(out)
}

/// Twists a module by a Maurer-Cartan element of its algebra.
pub fn twist_module(md: &LinftyModule, pi: &MCElement) -> Result<LinftyModule, String> {
    let algebra = twist_algebra(&md.algebra, pi)?;
    let odd = md.algebra.odd();
    let nar = md.algebra.n_ar;
    let mut out = LinftyModule::zero(algebra, md.mbasis.clone());
    for n in 0..=nar {
        for w in md.algebra.words(n) {
            for m in 0..md.mbasis.dim() {
                let val = pi_series(&odd, &pi.vector, &w, nar - n, md.mbasis.dim(), |u| {
                    md.eval_phi(u, m)
                });
                if !vis_zero(&val) {
                    out.set_phi(&w, m, &val)?;
                }
            }
        }
    }
    Ok(out)
}

/// Twists a module morphism by a Maurer-Cartan element of the shared algebra.
pub fn twist_module_morphism(
    km: &LinftyModuleMorphism,
    pi: &MCElement,
) -> Result<LinftyModuleMorphism, String> {
    let source = twist_module(&km.source, pi)?;
    let target = twist_module(&km.target, pi)?;
    let odd = km.source.algebra.odd();
    let nar = km.source.algebra.n_ar;
    let mut out = LinftyModuleMorphism::zero(source, target)?;
    for n in 0..=nar {
        for w in km.source.algebra.words(n) {
            for m in 0..km.source.mbasis.dim() {
                let val =
                    pi_series(&odd, &pi.vector, &w, nar - n, km.target.mbasis.dim(), |u| {
                        km.eval_kappa(u, m)
                    });
                if !vis_zero(&val) {
                    out.set_kappa(&w, m, &val)?;
                }
            }
        }
    }
    Ok(out)
}

/// The twisted differential applied twice to a vector; zero for every vector
/// whenever pi is Maurer-Cartan. For a differential graded Lie algebra and a
/// degree-zero xi this is the curvature of the gauge direction.
pub fn tangent_residual(space: &LinftySpace, pi: &MCElement, xi: &[Rat]) -> Vec<Rat> {
    let odd = space.odd();
    let dim = space.basis.dim();
    let dtw = |v: &[Rat]| -> Vec<Rat> {
        let mut acc = vzero(dim);
        let mut pw: CElem = CElem::new();
        pw.insert(Vec::new(), Rat::one());
        for (b, c) in v.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let q = space.eval_q(&[b]);
            vadd(&mut acc, &q, c);
        }
        for k in 1..=space.n_ar.saturating_sub(1) {
            pw = wedge_vec(&odd, &pw, &pi.vector);
            let inv = inv_fact(k);
            for (w, cw) in &pw {
                for (b, c) in v.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let mut ww = w.clone();
                    ww.push(b);
                    let q = space.eval_q(&ww);
                    let coeff = cw * &inv * c;
                    vadd(&mut acc, &q, &coeff);
                }
            }
        }
        acc
    };
    dtw(&dtw(xi))
}

/// The pair decomposition that the coproduct of the reconstructed homotopy
/// value on `w` must satisfy; every product term crosses operators and
/// arguments with the Koszul rule, the homotopy itself being odd.
fn homotopy_pairs(
    m: &LinftyMorphism,
    bigh: &BTreeMap<Word, CElem>,
    hmin: usize,
    w: &Word,
) -> BTreeMap<(Word, Word), Rat> {
    let src = &m.source;
    let tgt = &m.target;
    let sodd = src.odd();
    let h_of = |u: &Word| -> CElem {
        if u.len() < hmin {
            CElem::new()
        } else {
            bigh.get(u).cloned().unwrap_or_default()
        }
    };
    let h_of_celem = |x: &CElem| -> CElem {
        let mut out = CElem::new();
        for (u, c) in x {
            for (v, cv) in h_of(u) {
                celem_insert(&mut out, v, cv * c);
            }
        }
        out
    };
    let mut out: BTreeMap<(Word, Word), Rat> = BTreeMap::new();
    let term = |acc: &mut BTreeMap<(Word, Word), Rat>, c: &Rat, left: &CElem, right: &CElem| {
        if c.is_zero() {
            return;
        }
        for (u1, c1) in left {
            for (u2, c2) in right {
                let coeff = c * c1 * c2;
                if coeff.is_zero() {
                    continue;
                }
                let e = acc.entry((u1.clone(), u2.clone())).or_insert_with(Rat::zero);
                *e += coeff;
            }
        }
    };
    let half = Rat::new(BigInt::one(), BigInt::from(2));
    let n = w.len();
    for mask in 1..(1usize << n).saturating_sub(1) {
        let (i_pos, j_pos) = mask_split(n, mask);
        let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
        let neg = perm_sign(&sodd, w, &perm);
        let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
        let wj: Word = j_pos.iter().map(|&p| w[p]).collect();
        let s = if neg { -Rat::one() } else { Rat::one() };
        let sig_i = word_sigma(&src.basis, &wi).rem_euclid(2) == 1;
        let si = if sig_i { -s.clone() } else { s.clone() };

        let f_i = m.full_word(&wi);
        let f_j = m.full_word(&wj);
        let h_i = h_of(&wi);
        let h_j = h_of(&wj);
        let qh_i = tgt.coderivation(&h_i);
        let qh_j = tgt.coderivation(&h_j);
        let mut src_i: CElem = CElem::new();
        src_i.insert(wi.clone(), Rat::one());
        let mut src_j: CElem = CElem::new();
        src_j.insert(wj.clone(), Rat::one());
        let hq_i = h_of_celem(&src.coderivation(&src_i));
        let hq_j = h_of_celem(&src.coderivation(&src_j));

        term(&mut out, &si, &f_i, &h_j);
        term(&mut out, &s, &h_i, &f_j);
        term(&mut out, &(&s * &half), &h_i, &qh_j);
        term(&mut out, &(&si * &half), &qh_i, &h_j);
        term(&mut out, &(&si * &half), &hq_i, &h_j);
        term(&mut out, &(&s * &half), &h_i, &hq_j);
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Deforms a morphism along a homotopy prescribed at a single arity. Tables
/// of lower arity are untouched; the table at that arity changes by the
/// differential of the homotopy plus its precomposition with the source
/// differential, and higher tables follow from the coalgebra recursion.
pub fn partial_homotopy(
    m: &LinftyMorphism,
    h: &BTreeMap<Word, Vec<Rat>>,
    n: usize,
) -> Result<LinftyMorphism, String> {
    let nar = m.arity();
    if n == 0 || n > nar {
        return Err(format!("homotopy arity {n} outside 1..={nar}"));
    }
    let src = &m.source;
    let tgt = &m.target;
    let sodd = src.odd();
    let todd = tgt.odd();

    let mut htab: BTreeMap<Word, Vec<Rat>> = BTreeMap::new();
    for (w, v) in h {
        if w.len() != n {
            return Err(format!("homotopy word {:?} does not have arity {n}", w));
        }
        if v.len() != tgt.basis.dim() {
            return Err("homotopy value has wrong length".into());
        }
        let (sw, neg) = match word_sort(&sodd, w) {
            Some(x) => x,
            None => {
                if vis_zero(v) {
                    continue;
                }
                return Err("homotopy word with a repeated odd letter vanishes".into());
            }
        };
        let want = word_sigma(&src.basis, &sw) - 1;
        for (b, x) in v.iter().enumerate() {
            if !x.is_zero() && tgt.basis.sigma(b) != want {
                return Err(format!(
                    "degree mismatch: homotopy value on {} must have suspended degree {want}",
                    word_name(&src.basis, &sw)
                ));
            }
        }
        let mut val = v.clone();
        if neg {
            for x in &mut val {
                *x = -x.clone();
            }
        }
        let e = htab.entry(sw).or_insert_with(|| vzero(tgt.basis.dim()));
        vadd(e, &val, &Rat::one());
    }

    // Reconstruct the full homotopy word by word, shorter words first.
    let mut bigh: BTreeMap<Word, CElem> = BTreeMap::new();
    for len in n..=nar {
        for w in src.words(len) {
            if len == n {
                let mut x = CElem::new();
                if let Some(v) = htab.get(&w) {
                    for (b, c) in v.iter().enumerate() {
                        if !c.is_zero() {
                            x.insert(vec![b], c.clone());
                        }
                    }
                }
                bigh.insert(w, x);
                continue;
            }
            let pairs = homotopy_pairs(m, &bigh, n, &w);
            let mut x = CElem::new();
            for ((w1, w2), c) in &pairs {
                if w1.len() != 1 {
                    continue;
                }
                let p = 1 + w2.len();
                let mut ww = w1.clone();
                ww.extend(w2.iter().copied());
                if let Some((sw, neg)) = word_sort(&todd, &ww) {
                    let mut coeff = c / Rat::from(BigInt::from(p));
                    if neg {
                        coeff = -coeff;
                    }
                    celem_insert(&mut x, sw, coeff);
                }
            }
            bigh.insert(w, x);
        }
    }

    let mut out = LinftyMorphism::zero(src.clone(), tgt.clone())?;
    for len in 1..=nar {
        for w in src.words(len) {
            let mut val = m.eval_f(&w);
            if len >= n {
                let hw = bigh.get(&w).cloned().unwrap_or_default();
                for (u, c) in tgt.coderivation(&hw) {
                    if u.len() == 1 {
                        val[u[0]] += c;
                    }
                }
                let mut single: CElem = CElem::new();
                single.insert(w.clone(), Rat::one());
                for (u, c) in src.coderivation(&single) {
                    if u.len() < n {
                        continue;
                    }
                    if let Some(hu) = bigh.get(&u) {
                        for (uu, cc) in hu {
                            if uu.len() == 1 {
                                val[uu[0]] += cc * &c;
                            }
                        }
                    }
                }
            }
            if !vis_zero(&val) {
                out.set_f(&w, &val)?;
            }
        }
    }
    Ok(out)
}
