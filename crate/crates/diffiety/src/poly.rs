//! Sparse multivariate polynomials over ℚ in [`Atom`] indeterminates.
//!
//! Terms are kept sorted in graded-lex order, which makes the representation
//! canonical: two polynomials are equal as values iff their term lists are
//! identical. The gcd uses trial division and modular degree probes to skip
//! the subresultant remainder sequence whenever the answer is trivial.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, Zero};

use crate::atom::Atom;

/// A power product of atoms, sorted by atom order with positive exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(vec![(a, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.0
            .iter()
            .find(|(b, _)| b == a)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Componentwise quotient; `None` when `other` does not divide `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (a, e) in &self.0 {
            let mut e = *e;
            while j < other.0.len() && other.0[j].0 < *a {
                return None; // divisor has an atom self lacks
            }
            if j < other.0.len() && other.0[j].0 == *a {
                if other.0[j].1 > e {
                    return None;
                }
                e -= other.0[j].1;
                j += 1;
            }
            if e > 0 {
                out.push((a.clone(), e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::new();
        for (a, e) in &self.0 {
            let oe = other.degree_in(a);
            let m = (*e).min(oe);
            if m > 0 {
                out.push((a.clone(), m));
            }
        }
        Monomial(out)
    }

    /// Formal derivative step: exponent and the reduced monomial, or None.
    pub fn derivative(&self, a: &Atom) -> Option<(u32, Monomial)> {
        let e = self.degree_in(a);
        if e == 0 {
            return None;
        }
        let mut out = self.0.clone();
        for pair in out.iter_mut() {
            if pair.0 == *a {
                pair.1 -= 1;
            }
        }
        out.retain(|(_, e)| *e > 0);
        Some((e, Monomial(out)))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        // graded lex: total degree, then exponent sequence along the atom order
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                let (mut i, mut j) = (0, 0);
                loop {
                    match (self.0.get(i), other.0.get(j)) {
                        (None, None) => return Ordering::Equal,
                        // having an earlier atom with positive exponent makes
                        // the monomial lex-larger
                        (Some(_), None) => return Ordering::Greater,
                        (None, Some(_)) => return Ordering::Less,
                        (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                            Ordering::Less => return Ordering::Greater,
                            Ordering::Greater => return Ordering::Less,
                            Ordering::Equal => {
                                match ea.cmp(eb) {
                                    Ordering::Equal => {}
                                    ord => return ord,
                                }
                                i += 1;
                                j += 1;
                            }
                        },
                    }
                }
            })
    }
}

/// Sparse polynomial; term list sorted descending, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: Vec<(Monomial, BigRational)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                terms: vec![(Monomial::one(), c)],
            }
        }
    }

    pub fn from_int(n: i64) -> Self {
        Poly::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn atom(a: Atom) -> Self {
        Poly {
            terms: vec![(Monomial::atom(a), BigRational::one())],
        }
    }

    fn from_map(map: BTreeMap<Monomial, BigRational>) -> Self {
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.reverse(); // descending
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_one() && self.terms[0].1.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.first().map_or(true, |(m, _)| m.is_one())
    }

    pub fn terms(&self) -> &[(Monomial, BigRational)] {
        &self.terms
    }

    pub fn leading(&self) -> Option<&(Monomial, BigRational)> {
        self.terms.first()
    }

    pub fn constant_value(&self) -> Option<BigRational> {
        if self.is_zero() {
            Some(BigRational::zero())
        } else if self.is_constant() {
            Some(self.terms[0].1.clone())
        } else {
            None
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(m, _)| m.total_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.terms
            .iter()
            .map(|(m, _)| m.degree_in(a))
            .max()
            .unwrap_or(0)
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for (m, _) in &self.terms {
            for (a, _) in m.factors() {
                out.insert(a.clone());
            }
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                Ordering::Greater => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(other.terms[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &self.terms[i].1 + &other.terms[j].1;
                    if !c.is_zero() {
                        out.push((self.terms[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&other.terms[j..]);
        Poly { terms: out }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_term(&self, m: &Monomial, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m0, c0)| (m0.mul(m), c0 * c))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if other.terms.len() == 1 {
            return self.mul_term(&other.terms[0].0, &other.terms[0].1);
        }
        if self.terms.len() == 1 {
            return other.mul_term(&self.terms[0].0, &self.terms[0].1);
        }
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                let c = c1 * c2;
                match map.entry(m) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(c);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        *o.get_mut() += c;
                    }
                }
            }
        }
        Poly::from_map(map)
    }

    pub fn pow(&self, mut e: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact multivariate division; `None` if the division leaves a remainder.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&(BigRational::one() / c)));
        }
        let (dm, dc) = d.leading().unwrap();
        let mut rem = self.clone();
        let mut q: Vec<(Monomial, BigRational)> = Vec::new();
        while !rem.is_zero() {
            let (rm, rc) = rem.leading().unwrap();
            let qm = rm.div(dm)?;
            let qc = rc / dc;
            q.push((qm.clone(), qc.clone()));
            rem = rem.sub(&d.mul_term(&qm, &qc));
        }
        // quotient terms are produced in descending order already
        Some(Poly { terms: q })
    }

    /// Formal derivative treating every atom as an independent indeterminate.
    pub fn derivative_atom(&self, a: &Atom) -> Poly {
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m, c) in &self.terms {
            if let Some((e, m2)) = m.derivative(a) {
                let coef = c * BigRational::from_integer(BigInt::from(e));
                match map.entry(m2) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(coef);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        *o.get_mut() += coef;
                    }
                }
            }
        }
        Poly::from_map(map)
    }

    /// Divide by the leading coefficient so the leading term is monic.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, c)) => self.scale(&(BigRational::one() / c)),
        }
    }

    /// Rational content: gcd of numerators over lcm of denominators, signed
    /// so that the primitive part has a positive leading coefficient.
    pub fn rational_content(&self) -> BigRational {
        if self.is_zero() {
            return BigRational::zero();
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for (_, c) in &self.terms {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut content = BigRational::new(num_gcd, den_lcm);
        if self.leading().unwrap().1.is_negative() {
            content = -content;
        }
        content
    }

    /// Integer-primitive form with positive leading coefficient.
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let c = self.rational_content();
        self.scale(&(BigRational::one() / c))
    }
}

// ---------------------------------------------------------------------------
// gcd machinery
// ---------------------------------------------------------------------------

const PROBE_PRIME: u64 = (1u64 << 61) - 1;

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a, p);
        }
        a = mulmod(a, a, p);
        e >>= 1;
    }
    r
}

fn invmod(a: u64, p: u64) -> Option<u64> {
    if a % p == 0 {
        None
    } else {
        Some(powmod(a, p - 2, p))
    }
}

fn bigint_mod(n: &BigInt, p: u64) -> u64 {
    let m = n.mod_floor(&BigInt::from(p));
    let (_, digits) = m.to_u64_digits();
    digits.first().copied().unwrap_or(0)
}

fn rational_mod(c: &BigRational, p: u64) -> Option<u64> {
    let num = bigint_mod(c.numer(), p);
    let den = bigint_mod(c.denom(), p);
    Some(mulmod(num, invmod(den, p)?, p))
}

impl Poly {
    /// Evaluate all atoms at the given residues mod `p`; `None` when a
    /// coefficient denominator vanishes mod `p`.
    pub fn eval_mod(&self, assign: &BTreeMap<Atom, u64>, p: u64) -> Option<u64> {
        let mut acc = 0u64;
        for (m, c) in &self.terms {
            let mut t = rational_mod(c, p)?;
            for (a, e) in m.factors() {
                let v = *assign.get(a).unwrap_or(&0);
                t = mulmod(t, powmod(v, *e as u64, p), p);
            }
            acc = (acc + t) % p;
        }
        Some(acc)
    }
}

/// Degree of gcd of the univariate images of `a`, `b` in `var`, with all
/// other atoms frozen at random residues. Overestimates are possible at
/// unlucky points; the true degree never exceeds the image degree.
fn probe_gcd_degree(a: &Poly, b: &Poly, var: &Atom, rng_state: &mut u64) -> Option<usize> {
    let p = PROBE_PRIME;
    let mut next = || {
        // xorshift; plenty for probe points
        let mut x = *rng_state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        *rng_state = x;
        x % p
    };
    let mut atoms: BTreeSet<Atom> = a.atoms();
    atoms.extend(b.atoms());
    atoms.remove(var);
    let assign: BTreeMap<Atom, u64> = atoms.into_iter().map(|at| (at, next())).collect();

    let image = |f: &Poly| -> Option<Vec<u64>> {
        let deg = f.degree_in(var) as usize;
        let mut coeffs = vec![0u64; deg + 1];
        for (m, c) in &f.terms {
            let e = m.degree_in(var) as usize;
            let mut t = rational_mod(c, p)?;
            for (at, ex) in m.factors() {
                if at == var {
                    continue;
                }
                let v = *assign.get(at).unwrap_or(&0);
                t = mulmod(t, powmod(v, *ex as u64, p), p);
            }
            coeffs[e] = (coeffs[e] + t) % p;
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0 {
            coeffs.pop();
        }
        Some(coeffs)
    };

    let mut fa = image(a)?;
    let mut fb = image(b)?;
    // a degraded leading coefficient would let the image gcd drop below the
    // true gcd degree, so such points are rejected as unlucky
    if fa.len() - 1 < a.degree_in(var) as usize || fb.len() - 1 < b.degree_in(var) as usize {
        return None;
    }
    // univariate Euclid in Z_p
    loop {
        if fb.iter().all(|&c| c == 0) {
            return Some(fa.len() - 1);
        }
        while fb.len() > 1 && *fb.last().unwrap() == 0 {
            fb.pop();
        }
        if fb.len() == 1 {
            return if fb[0] == 0 { Some(fa.len() - 1) } else { Some(0) };
        }
        let lb = invmod(*fb.last().unwrap(), p)?;
        while fa.len() >= fb.len() {
            let shift = fa.len() - fb.len();
            let factor = mulmod(*fa.last().unwrap(), lb, p);
            for i in 0..fb.len() {
                let sub = mulmod(factor, fb[i], p);
                fa[i + shift] = (fa[i + shift] + p - sub) % p;
            }
            while fa.len() > 1 && *fa.last().unwrap() == 0 {
                fa.pop();
            }
            if fa.len() == 1 && fa[0] == 0 {
                break;
            }
        }
        std::mem::swap(&mut fa, &mut fb);
    }
}

/// gcd via factor peeling: decompose the small operand into pairwise
/// coprime square-free pieces with multiplicities, transfer each piece's
/// multiplicity to the big operand by trial division, and certify the
/// cofactors coprime with modular probes. `None` when certification fails
/// (the caller falls back to the remainder sequence).
fn gcd_by_peeling(big: &Poly, small: &Poly, state: &mut u64) -> Option<Poly> {
    let pieces = squarefree_decompose(small);
    let mut g = Poly::one();
    let mut big_red = big.clone();
    let mut small_red = small.clone();
    for (s, mult) in &pieces {
        if s.is_constant() {
            continue;
        }
        let mut j = 0u32;
        while j < *mult {
            match big_red.exact_div(s) {
                Some(q) => {
                    big_red = q;
                    j += 1;
                }
                None => break,
            }
        }
        if j > 0 {
            let sj = s.pow(j);
            g = g.mul(&sj);
            small_red = small_red.exact_div(&sj).expect("piece divides small operand");
        }
    }
    // the cofactors must be coprime: a zero-degree image in every shared
    // variable certifies it (degraded probes return None and are retried)
    let shared: Vec<Atom> = big_red
        .atoms()
        .intersection(&small_red.atoms())
        .cloned()
        .collect();
    for v in shared {
        let mut certified = false;
        for _ in 0..4 {
            match probe_gcd_degree(&big_red, &small_red, &v, state) {
                Some(0) => {
                    certified = true;
                    break;
                }
                Some(_) => return None,
                None => continue,
            }
        }
        if !certified {
            return None;
        }
    }
    Some(g.monic())
}

/// Square-free decomposition into pairwise coprime pieces: Yun's algorithm
/// in the main variable, recursing on the content. Pieces may still be
/// reducible; the caller only relies on pairwise coprimality.
fn squarefree_decompose(p: &Poly) -> Vec<(Poly, u32)> {
    if p.is_constant() {
        return Vec::new();
    }
    let var = {
        let mut best: Option<(Atom, u32)> = None;
        for a in p.atoms() {
            let d = p.degree_in(&a);
            if best.as_ref().map_or(true, |(_, bd)| d > *bd) {
                best = Some((a, d));
            }
        }
        best.unwrap().0
    };
    let cont = content_in(p, &var);
    let mut out = if cont.is_constant() {
        Vec::new()
    } else {
        squarefree_decompose(&cont)
    };
    let pp = p.exact_div(&cont).expect("content divides").primitive();
    if pp.is_constant() {
        return out;
    }
    // Yun's loop on the primitive part
    let dp = pp.derivative_atom(&var);
    let g0 = poly_gcd(&pp, &dp);
    if g0.is_constant() {
        out.push((pp, 1));
        return out;
    }
    let mut w = pp.exact_div(&g0).expect("gcd divides");
    let mut y = dp.exact_div(&g0).expect("gcd divides");
    let mut i = 1u32;
    while !w.is_constant() {
        let z = y.sub(&w.derivative_atom(&var));
        if z.is_zero() {
            out.push((w.primitive(), i));
            break;
        }
        let gi = poly_gcd(&w, &z);
        if !gi.is_constant() {
            out.push((gi.primitive(), i));
        }
        w = w.exact_div(&gi).expect("gcd divides w");
        y = z.exact_div(&gi).expect("gcd divides z");
        i += 1;
        if i > 64 {
            break; // defensive bound; fall back to whatever was collected
        }
    }
    out
}

/// Content of `f` viewed as univariate in `var` (gcd of the coefficients).
fn content_in(f: &Poly, var: &Atom) -> Poly {
    let mut coeffs: BTreeMap<u32, Poly> = BTreeMap::new();
    for (m, c) in &f.terms {
        let e = m.degree_in(var);
        let reduced = Monomial(
            m.factors()
                .iter()
                .filter(|(a, _)| a != var)
                .cloned()
                .collect(),
        );
        let entry = coeffs.entry(e).or_insert_with(Poly::zero);
        *entry = entry.add(&Poly {
            terms: vec![(reduced, c.clone())],
        });
    }
    let mut g = Poly::zero();
    for (_, c) in coeffs {
        g = poly_gcd(&g, &c);
        if g.is_one() {
            return g;
        }
    }
    g
}

/// Pseudo-remainder of `a` by `b` in `var`: lc(b)^(da-db+1) * a mod b.
fn pseudo_rem(a: &Poly, b: &Poly, var: &Atom) -> Poly {
    let db = b.degree_in(var);
    let lc_b = coeff_of(b, var, db);
    let mut r = a.clone();
    loop {
        let dr = r.degree_in(var);
        if r.is_zero() || dr < db {
            return r;
        }
        let lc_r = coeff_of(&r, var, dr);
        let shift = Poly::atom(var.clone()).pow(dr - db);
        // r := lc_b * r - lc_r * x^(dr-db) * b
        r = r.mul(&lc_b).sub(&lc_r.mul(&shift).mul(b));
    }
}

/// Coefficient of `var^e` in `f`, a polynomial in the remaining atoms.
fn coeff_of(f: &Poly, var: &Atom, e: u32) -> Poly {
    let mut terms = Vec::new();
    for (m, c) in &f.terms {
        if m.degree_in(var) == e {
            let v: Vec<(Atom, u32)> = m
                .factors()
                .iter()
                .filter(|(a, _)| a != var)
                .cloned()
                .collect();
            terms.push((Monomial(v), c.clone()));
        }
    }
    terms.sort_by(|a, b| b.0.cmp(&a.0));
    Poly { terms }
}

/// Multivariate gcd over ℚ, returned monic. gcd(0, f) = monic(f).
pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    gcd_stats::CALLS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    // common monomial part
    let mono_a = a
        .terms
        .iter()
        .skip(1)
        .fold(a.terms[0].0.clone(), |acc, (m, _)| acc.gcd(m));
    let mono_b = b
        .terms
        .iter()
        .skip(1)
        .fold(b.terms[0].0.clone(), |acc, (m, _)| acc.gcd(m));
    let mono = mono_a.gcd(&mono_b);
    let a = strip_monomial(a, &mono_a);
    let b = strip_monomial(b, &mono_b);

    let core = poly_gcd_core(&a, &b);
    let g = core.mul(&Poly {
        terms: vec![(mono, BigRational::one())],
    });
    g.monic()
}

fn strip_monomial(f: &Poly, m: &Monomial) -> Poly {
    if m.is_one() {
        return f.clone();
    }
    Poly {
        terms: f
            .terms
            .iter()
            .map(|(mm, c)| (mm.div(m).expect("common monomial divides"), c.clone()))
            .collect(),
    }
}

fn poly_gcd_core(a: &Poly, b: &Poly) -> Poly {
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a.monic() == b.monic() {
        return a.monic();
    }
    if a.exact_div(b).is_some() {
        return b.monic();
    }
    if b.exact_div(a).is_some() {
        return a.monic();
    }

    let mut vars: Vec<Atom> = a.atoms().intersection(&b.atoms()).cloned().collect();
    if vars.is_empty() {
        return Poly::one();
    }

    // Modular probes: a zero-degree image in every shared variable certifies
    // a trivial gcd (image degree only ever overestimates, so insist on two
    // independent points before trusting a zero).
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut best: Option<(Atom, usize)> = None;
    vars.sort();
    let mut all_trivial = true;
    for v in &vars {
        let d1 = probe_gcd_degree(a, b, v, &mut state);
        let d2 = probe_gcd_degree(a, b, v, &mut state);
        let d = match (d1, d2) {
            (Some(x), Some(y)) => x.min(y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => a.degree_in(v).min(b.degree_in(v)) as usize,
        };
        if d > 0 {
            all_trivial = false;
            let score = d;
            if best.as_ref().map_or(true, |(_, s)| score < *s) {
                best = Some((v.clone(), score));
            }
        }
    }
    if all_trivial {
        return Poly::one();
    }
    let var = best.unwrap().0;

    // When one operand is small, peel its square-free factors and count
    // their multiplicities in the other by trial division. This covers the
    // common case of denominators that are powers of a few Jacobian factors
    // without ever running a remainder sequence against a large polynomial.
    let (big, small) = if a.terms.len() >= b.terms.len() {
        (a, b)
    } else {
        (b, a)
    };
    if small.terms.len() <= 64 {
        if let Some(g) = gcd_by_peeling(big, small, &mut state) {
            return g;
        }
    }

    gcd_stats::PRS_CALLS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    // subresultant-flavoured primitive PRS in `var`
    let ca = content_in(a, &var);
    let cb = content_in(b, &var);
    let cont = poly_gcd(&ca, &cb);
    let mut f = a.exact_div(&ca).expect("content divides").primitive();
    let mut g = b.exact_div(&cb).expect("content divides").primitive();
    if f.degree_in(&var) < g.degree_in(&var) {
        std::mem::swap(&mut f, &mut g);
    }
    loop {
        let r = pseudo_rem(&f, &g, &var);
        if r.is_zero() {
            let gp = g.exact_div(&content_in(&g, &var)).unwrap_or_else(|| g.clone());
            return cont.mul(&gp).monic();
        }
        if r.degree_in(&var) == 0 {
            return cont.monic();
        }
        f = g;
        g = r.exact_div(&content_in(&r, &var)).unwrap_or(r).primitive();
    }
}

// ---------------------------------------------------------------------------

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let abs = if neg { -c } else { c.clone() };
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{abs}")?;
            } else {
                if !abs.is_one() {
                    write!(f, "{abs}*")?;
                }
                let parts: Vec<String> = m
                    .factors()
                    .iter()
                    .map(|(a, e)| {
                        let base = format!("{a:?}");
                        if *e == 1 {
                            base
                        } else {
                            format!("{base}^{e}")
                        }
                    })
                    .collect();
                write!(f, "{}", parts.join("*"))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::MultiIndex;

    fn x() -> Atom {
        Atom::indep(0)
    }
    fn u() -> Atom {
        Atom::jet(0, MultiIndex::empty())
    }

    #[test]
    fn arithmetic_canonical() {
        let p = Poly::atom(x()).add(&Poly::atom(u()));
        let q = p.mul(&p);
        let r = Poly::atom(x())
            .pow(2)
            .add(&Poly::atom(x()).mul(&Poly::atom(u())).scale(&BigRational::from_integer(2.into())))
            .add(&Poly::atom(u()).pow(2));
        assert_eq!(q, r);
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn exact_division() {
        let p = Poly::atom(x()).pow(2).sub(&Poly::atom(u()).pow(2));
        let d = Poly::atom(x()).sub(&Poly::atom(u()));
        let q = p.exact_div(&d).expect("divides");
        assert_eq!(q, Poly::atom(x()).add(&Poly::atom(u())));
        assert!(p.exact_div(&Poly::atom(x()).add(&Poly::from_int(1))).is_none());
    }

    #[test]
    fn gcd_reduces_difference_of_squares() {
        let p = Poly::atom(x()).pow(2).sub(&Poly::one());
        let d = Poly::atom(x()).sub(&Poly::one());
        let g = poly_gcd(&p, &d);
        assert_eq!(g, Poly::atom(x()).sub(&Poly::one()));
    }

    #[test]
    fn gcd_trivial_and_multivariate() {
        let p = Poly::atom(x()).add(&Poly::atom(u()));
        let q = Poly::atom(x()).sub(&Poly::atom(u()));
        assert!(poly_gcd(&p, &q).is_one());
        let a = p.mul(&q).mul(&p);
        let b = p.mul(&Poly::atom(u()).add(&Poly::one()));
        assert_eq!(poly_gcd(&a, &b), p.monic());
    }

    #[test]
    fn gcd_power_denominators() {
        let d = Poly::atom(x()).add(&Poly::atom(u()));
        let a = d.pow(5).mul(&Poly::atom(u()));
        let b = d.pow(3);
        assert_eq!(poly_gcd(&a, &b), d.pow(3).monic());
    }

    #[test]
    fn derivative_formal() {
        let p = Poly::atom(x()).pow(3).mul(&Poly::atom(u()));
        let dp = p.derivative_atom(&x());
        assert_eq!(
            dp,
            Poly::atom(x()).pow(2).mul(&Poly::atom(u())).scale(&BigRational::from_integer(3.into()))
        );
    }
}

/// Instrumentation hooks for diagnosing gcd hotspots in tests.
pub mod gcd_stats {
    use std::sync::atomic::{AtomicU64, Ordering};
    pub static CALLS: AtomicU64 = AtomicU64::new(0);
    pub static PRS_CALLS: AtomicU64 = AtomicU64::new(0);
    pub static BIG_PRS: AtomicU64 = AtomicU64::new(0);
    pub fn snapshot() -> (u64, u64, u64) {
        (
            CALLS.load(Ordering::Relaxed),
            PRS_CALLS.load(Ordering::Relaxed),
            BIG_PRS.load(Ordering::Relaxed),
        )
    }
}
