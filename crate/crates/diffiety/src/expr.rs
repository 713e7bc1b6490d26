//! Canonical rational expressions over atoms.
//!
//! An [`Expr`] is a fraction of two canonical polynomials with gcd 1 and a
//! monic denominator, so equality of values is equality of representations
//! and the symbolic zero test is free. Formal partial derivatives chain
//! through function-symbol arguments and rewrite derivatives of implicitly
//! defined symbols through their defining relations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed};
use rand::Rng;

use crate::atom::{Atom, FuncId};
use crate::context::Context;
use crate::error::ExprError;
use crate::poly::{poly_gcd, Poly};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Inner {
    num: Poly,
    den: Poly,
}

/// A canonical fraction num/den. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Inner>);

impl Expr {
    fn build(num: Poly, den: Poly) -> Result<Expr, ExprError> {
        if den.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(Expr::zero());
        }
        let (num, den) = if den.is_one() {
            (num, den)
        } else {
            let g = poly_gcd(&num, &den);
            if g.is_one() {
                (num, den)
            } else {
                (
                    num.exact_div(&g).expect("gcd divides numerator"),
                    den.exact_div(&g).expect("gcd divides denominator"),
                )
            }
        };
        // monic denominator fixes the scaling
        let lc = den.leading().unwrap().1.clone();
        if lc.is_one() {
            Ok(Expr(Arc::new(Inner { num, den })))
        } else {
            let inv = BigRational::one() / lc;
            Ok(Expr(Arc::new(Inner {
                num: num.scale(&inv),
                den: den.scale(&inv),
            })))
        }
    }

    pub fn zero() -> Expr {
        Expr(Arc::new(Inner {
            num: Poly::zero(),
            den: Poly::one(),
        }))
    }

    pub fn one() -> Expr {
        Expr::from_poly(Poly::one())
    }

    pub fn from_int(n: i64) -> Expr {
        Expr::from_poly(Poly::from_int(n))
    }

    pub fn from_rational(r: BigRational) -> Expr {
        Expr::from_poly(Poly::constant(r))
    }

    pub fn from_poly(p: Poly) -> Expr {
        Expr(Arc::new(Inner {
            num: p,
            den: Poly::one(),
        }))
    }

    pub fn atom(a: Atom) -> Expr {
        Expr::from_poly(Poly::atom(a))
    }

    pub fn num(&self) -> &Poly {
        &self.0.num
    }

    pub fn den(&self) -> &Poly {
        &self.0.den
    }

    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.num.is_one() && self.0.den.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.0.num.is_constant() && self.0.den.is_constant()
    }

    pub fn constant_value(&self) -> Option<BigRational> {
        match (self.0.num.constant_value(), self.0.den.constant_value()) {
            (Some(n), Some(d)) => Some(n / d),
            _ => None,
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut s = self.0.num.atoms();
        s.extend(self.0.den.atoms());
        s
    }

    /// Highest jet order among the atoms of the expression.
    pub fn max_jet_order(&self) -> usize {
        self.atoms().iter().map(|a| a.jet_order()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let (a, b) = (&*self.0, &*other.0);
        if a.den == b.den {
            return Expr::build(a.num.add(&b.num), a.den.clone()).expect("den nonzero");
        }
        let g = poly_gcd(&a.den, &b.den);
        let (da, db) = if g.is_one() {
            (a.den.clone(), b.den.clone())
        } else {
            (
                a.den.exact_div(&g).unwrap(),
                b.den.exact_div(&g).unwrap(),
            )
        };
        let num = a.num.mul(&db).add(&b.num.mul(&da));
        let den = a.den.mul(&db);
        Expr::build(num, den).expect("den nonzero")
    }

    pub fn neg(&self) -> Expr {
        if self.is_zero() {
            return self.clone();
        }
        Expr(Arc::new(Inner {
            num: self.0.num.neg(),
            den: self.0.den.clone(),
        }))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        let (a, b) = (&*self.0, &*other.0);
        // cross-reduce so the product of reduced fractions stays reduced
        let g1 = poly_gcd(&a.num, &b.den);
        let g2 = poly_gcd(&b.num, &a.den);
        let an = if g1.is_one() { a.num.clone() } else { a.num.exact_div(&g1).unwrap() };
        let bd = if g1.is_one() { b.den.clone() } else { b.den.exact_div(&g1).unwrap() };
        let bn = if g2.is_one() { b.num.clone() } else { b.num.exact_div(&g2).unwrap() };
        let ad = if g2.is_one() { a.den.clone() } else { a.den.exact_div(&g2).unwrap() };
        let num = an.mul(&bn);
        let den = ad.mul(&bd);
        if den.is_one() {
            return Expr::from_poly(num);
        }
        let lc = den.leading().unwrap().1.clone();
        let inv = BigRational::one() / lc;
        Expr(Arc::new(Inner {
            num: num.scale(&inv),
            den: den.scale(&inv),
        }))
    }

    pub fn div(&self, other: &Expr) -> Result<Expr, ExprError> {
        if other.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        Ok(self.mul(&other.inv()?))
    }

    pub fn inv(&self) -> Result<Expr, ExprError> {
        if self.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        Expr::build(self.0.den.clone(), self.0.num.clone())
    }

    pub fn powi(&self, e: i32) -> Result<Expr, ExprError> {
        if e == 0 {
            return Ok(Expr::one());
        }
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let k = e.unsigned_abs();
        // num and den are coprime, so the powers are too
        Ok(Expr(Arc::new(Inner {
            num: base.0.num.pow(k),
            den: base.0.den.pow(k),
        })))
    }

    pub fn scale_int(&self, k: i64) -> Expr {
        self.mul(&Expr::from_int(k))
    }

    /// Substitute atoms by expressions (simultaneously).
    pub fn subst_atoms(&self, map: &BTreeMap<Atom, Expr>) -> Result<Expr, ExprError> {
        let eval_poly = |p: &Poly| -> Result<Expr, ExprError> {
            let mut acc = Expr::zero();
            for (m, c) in p.terms() {
                let mut t = Expr::from_rational(c.clone());
                for (a, e) in m.factors() {
                    let base = match map.get(a) {
                        Some(ex) => ex.clone(),
                        None => Expr::atom(a.clone()),
                    };
                    t = t.mul(&base.powi(*e as i32)?);
                }
                acc = acc.add(&t);
            }
            Ok(acc)
        };
        let n = eval_poly(&self.0.num)?;
        let d = eval_poly(&self.0.den)?;
        n.div(&d)
    }

    /// Normalized numerator used as the canonical form of a "≠ 0" assumption;
    /// `None` for constants (no content).
    pub fn assumption_form(&self) -> Option<Expr> {
        if self.is_constant() {
            return None;
        }
        Some(Expr::from_poly(self.0.num.primitive()))
    }

    // -- differentiation ----------------------------------------------------

    /// Formal partial derivative ∂/∂a, chaining through function-symbol
    /// arguments and rewriting derivatives of implicit symbols.
    pub fn partial(&self, ctx: &Context, a: &Atom) -> Result<Expr, ExprError> {
        self.partial_holding(ctx, a, None)
    }

    /// Like [`Expr::partial`] but treating the symbol `hold` as a primitive
    /// indeterminate (used when differentiating its own defining relation).
    pub fn partial_holding(
        &self,
        ctx: &Context,
        a: &Atom,
        hold: Option<FuncId>,
    ) -> Result<Expr, ExprError> {
        let dn = poly_partial(&self.0.num, ctx, a, hold)?;
        if self.0.den.is_one() {
            return Ok(dn);
        }
        let dd = poly_partial(&self.0.den, ctx, a, hold)?;
        // (n/d)' = (n'd - nd')/d^2
        let num_expr = dn
            .mul(&Expr::from_poly(self.0.den.clone()))
            .sub(&Expr::from_poly(self.0.num.clone()).mul(&dd));
        num_expr.div(&Expr::from_poly(self.0.den.pow(2)))
    }
}

/// Derivative of a polynomial: sum over atoms of the formal derivative times
/// the chain factor ∂b/∂a.
fn poly_partial(p: &Poly, ctx: &Context, a: &Atom, hold: Option<FuncId>) -> Result<Expr, ExprError> {
    let mut acc = Expr::zero();
    for b in p.atoms() {
        let chain = atom_partial(ctx, &b, a, hold)?;
        if chain.is_zero() {
            continue;
        }
        let formal = p.derivative_atom(&b);
        if formal.is_zero() {
            continue;
        }
        acc = acc.add(&Expr::from_poly(formal).mul(&chain));
    }
    Ok(acc)
}

/// ∂b/∂a for atoms. Jet and independent atoms are primitive; function
/// symbols chain through their argument slots.
pub fn atom_partial(
    ctx: &Context,
    b: &Atom,
    a: &Atom,
    hold: Option<FuncId>,
) -> Result<Expr, ExprError> {
    if b == a {
        return Ok(Expr::one());
    }
    let Atom::Func { id, slots, .. } = b else {
        return Ok(Expr::zero());
    };
    if hold == Some(*id) {
        return Ok(Expr::zero());
    }
    let sym = ctx.func(*id);
    let mut acc = Expr::zero();
    for (k, arg) in sym.args.iter().enumerate() {
        let da = atom_partial(ctx, arg, a, hold)?;
        if da.is_zero() {
            continue;
        }
        let deriv = func_slot_deriv(ctx, *id, slots, k as u8)?;
        acc = acc.add(&deriv.mul(&da));
    }
    Ok(acc)
}

/// The derivative of symbol `id` (already differentiated along `slots`) by
/// one more argument slot `k`: a fresh atom for uninterpreted symbols, the
/// rewritten expression for implicit ones.
pub fn func_slot_deriv(ctx: &Context, id: FuncId, slots: &[u8], k: u8) -> Result<Expr, ExprError> {
    let mut new_slots = slots.to_vec();
    new_slots.push(k);
    new_slots.sort_unstable();
    if ctx.is_implicit(id) {
        ctx.implicit_deriv(id, &new_slots)
    } else {
        Ok(Expr::atom(Atom::func(
            ctx.func(id).name.clone(),
            id,
            new_slots,
        )))
    }
}

// -- implicit partial public entry -------------------------------------------

/// ∂f/∂a for an implicitly defined symbol: −(∂R/∂a)/(∂R/∂f).
pub fn implicit_partial(ctx: &Context, id: FuncId, a: &Atom) -> Result<Expr, ExprError> {
    let sym = ctx.func(id);
    if sym.relation.is_none() {
        return Err(ExprError::UnknownSymbol(format!(
            "`{}` has no implicit relation",
            sym.name
        )));
    }
    // derivative by a declared argument reuses the memoized slot rule
    if let Some(k) = sym.args.iter().position(|arg| arg == a) {
        return ctx.implicit_deriv(id, &[k as u8]);
    }
    let relation = sym.relation.clone().unwrap();
    let jac = sym.relation_jacobian.clone().unwrap();
    let dr_da = relation.partial_holding(ctx, a, Some(id))?;
    dr_da.neg().div(&jac)
}

// -- raw trees ----------------------------------------------------------------

/// An unnormalized expression tree, as produced by the parser or by tests.
#[derive(Debug, Clone)]
pub enum RawExpr {
    Int(i64),
    Rat(BigRational),
    Atom(Atom),
    Add(Box<RawExpr>, Box<RawExpr>),
    Sub(Box<RawExpr>, Box<RawExpr>),
    Mul(Box<RawExpr>, Box<RawExpr>),
    Div(Box<RawExpr>, Box<RawExpr>),
    Pow(Box<RawExpr>, i32),
    Neg(Box<RawExpr>),
}

/// Fold a raw tree into canonical form. Division by an expression that
/// normalizes to zero is reported.
pub fn normalize(e: &RawExpr) -> Result<Expr, ExprError> {
    Ok(match e {
        RawExpr::Int(n) => Expr::from_int(*n),
        RawExpr::Rat(r) => Expr::from_rational(r.clone()),
        RawExpr::Atom(a) => Expr::atom(a.clone()),
        RawExpr::Add(a, b) => normalize(a)?.add(&normalize(b)?),
        RawExpr::Sub(a, b) => normalize(a)?.sub(&normalize(b)?),
        RawExpr::Mul(a, b) => normalize(a)?.mul(&normalize(b)?),
        RawExpr::Div(a, b) => normalize(a)?.div(&normalize(b)?)?,
        RawExpr::Pow(a, e) => normalize(a)?.powi(*e)?,
        RawExpr::Neg(a) => normalize(a)?.neg(),
    })
}

// -- probabilistic zero test ---------------------------------------------------

const PROBE_PRIME: u64 = (1u64 << 61) - 1;

/// Verdict of the probabilistic probe.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeVerdict {
    /// Some evaluation was nonzero: the expression is certainly nonzero.
    NonZero,
    /// All trials evaluated to zero; `failure_bound` is the Schwartz–Zippel
    /// style bound on the probability that a nonzero expression slipped by.
    ZeroLikely { failure_bound: f64 },
}

/// Evaluate the numerator at uniform random points of a large prime field.
/// Points that land on a zero of the denominator or of any recorded
/// genericity assumption are resampled (bounded retries).
pub fn probe_zero<R: Rng>(
    e: &Expr,
    ctx: &Context,
    rng: &mut R,
    trials: u32,
) -> Result<ProbeVerdict, ExprError> {
    let p = PROBE_PRIME;
    let mut atoms = e.atoms();
    let guards: Vec<Expr> = ctx.assumptions();
    for g in &guards {
        atoms.extend(g.atoms());
    }
    let max_retries = 16 * trials.max(1);
    let mut retries = 0u32;
    let mut done = 0u32;
    while done < trials {
        let assign: BTreeMap<Atom, u64> = atoms
            .iter()
            .map(|a| (a.clone(), rng.gen_range(0..p)))
            .collect();
        let den_ok = e
            .den()
            .eval_mod(&assign, p)
            .map_or(false, |v| v != 0);
        let guards_ok = guards.iter().all(|g| {
            g.num()
                .eval_mod(&assign, p)
                .map_or(false, |v| v != 0)
        });
        if !den_ok || !guards_ok {
            retries += 1;
            if retries > max_retries {
                return Err(ExprError::ProbeExhausted);
            }
            continue;
        }
        match e.num().eval_mod(&assign, p) {
            Some(0) => done += 1,
            Some(_) => return Ok(ProbeVerdict::NonZero),
            None => {
                retries += 1;
                if retries > max_retries {
                    return Err(ExprError::ProbeExhausted);
                }
            }
        }
    }
    let per_trial = (e.num().total_degree().max(1) as f64) / (p as f64);
    Ok(ProbeVerdict::ZeroLikely {
        failure_bound: per_trial.powi(trials.max(1) as i32),
    })
}

// -- ordering & display ---------------------------------------------------------

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        fn poly_key(p: &Poly) -> Vec<(&crate::poly::Monomial, &BigRational)> {
            p.terms().iter().map(|(m, c)| (m, c)).collect()
        }
        poly_key(&self.0.num)
            .cmp(&poly_key(&other.0.num))
            .then_with(|| poly_key(&self.0.den).cmp(&poly_key(&other.0.den)))
    }
}

/// Context-aware pretty printing.
pub struct ExprDisplay<'a> {
    pub expr: &'a Expr,
    pub ctx: &'a Context,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num_s = poly_display(self.expr.num(), self.ctx);
        if self.expr.den().is_one() {
            return write!(f, "{num_s}");
        }
        let den_s = poly_display(self.expr.den(), self.ctx);
        let num_wrapped = if self.expr.num().terms().len() > 1 {
            format!("({num_s})")
        } else {
            num_s
        };
        let den_wrapped = if self.expr.den().terms().len() > 1
            || self.expr.den().leading().map_or(false, |(m, _)| m.total_degree() > 1)
        {
            format!("({den_s})")
        } else {
            den_s
        };
        write!(f, "{num_wrapped}/{den_wrapped}")
    }
}

pub fn poly_display(p: &Poly, ctx: &Context) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in p.terms().iter().enumerate() {
        let neg = c.is_negative();
        let abs = if neg { -c } else { c.clone() };
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else if neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let mut parts: Vec<String> = Vec::new();
        if m.is_one() || !abs.is_one() {
            parts.push(abs.to_string());
        }
        for (a, e) in m.factors() {
            let name = ctx.display_atom(a);
            if *e == 1 {
                parts.push(name);
            } else {
                parts.push(format!("{name}^{e}"));
            }
        }
        out.push_str(&parts.join("*"));
    }
    out
}

pub fn expr_display(e: &Expr, ctx: &Context) -> String {
    ExprDisplay { expr: e, ctx }.to_string()
}

// convenience for literal rational coefficients in tests
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::MultiIndex;

    fn ux() -> Atom {
        Atom::jet(0, MultiIndex::from_indices(&[0]))
    }

    #[test]
    fn commutativity_cancellation() {
        // (u_x * F - F * u_x) -> 0
        let mut ctx = Context::new(vec!["x".into()], vec!["u".into()]);
        let f = ctx.add_func("F", vec![Atom::indep(0), ux()]).unwrap();
        let fe = RawExpr::Atom(ctx.func_atom(f));
        let u = RawExpr::Atom(ux());
        let tree = RawExpr::Sub(
            Box::new(RawExpr::Mul(Box::new(u.clone()), Box::new(fe.clone()))),
            Box::new(RawExpr::Mul(Box::new(fe), Box::new(u))),
        );
        assert!(normalize(&tree).unwrap().is_zero());
    }

    #[test]
    fn gcd_reduction_example() {
        // (u_x^2 - 1)/(u_x - 1) -> u_x + 1
        let u = RawExpr::Atom(ux());
        let tree = RawExpr::Div(
            Box::new(RawExpr::Sub(
                Box::new(RawExpr::Pow(Box::new(u.clone()), 2)),
                Box::new(RawExpr::Int(1)),
            )),
            Box::new(RawExpr::Sub(Box::new(u.clone()), Box::new(RawExpr::Int(1)))),
        );
        let e = normalize(&tree).unwrap();
        let expected = Expr::atom(ux()).add(&Expr::one());
        assert_eq!(e, expected);
    }

    #[test]
    fn normalize_idempotent_after_substitution() {
        // with F = f*u_y + g re-expanded, F_{u_y}*u_y + g re-normalizes to F
        let mut ctx = Context::new(vec!["x".into(), "y".into()], vec!["u".into()]);
        let uy = Atom::jet(0, MultiIndex::from_indices(&[1]));
        let f_id = ctx.add_func("f", vec![Atom::indep(0)]).unwrap();
        let g_id = ctx.add_func("g", vec![Atom::indep(0)]).unwrap();
        let f = Expr::atom(ctx.func_atom(f_id));
        let g = Expr::atom(ctx.func_atom(g_id));
        let big_f = f.mul(&Expr::atom(uy.clone())).add(&g);
        let d = big_f.partial(&ctx, &uy).unwrap();
        assert_eq!(d, f);
        let rebuilt = d.mul(&Expr::atom(uy)).add(&g);
        assert_eq!(rebuilt, big_f);
    }

    #[test]
    fn division_by_zero_detected() {
        let u = RawExpr::Atom(ux());
        let zero = RawExpr::Sub(Box::new(u.clone()), Box::new(u.clone()));
        let tree = RawExpr::Div(Box::new(u), Box::new(zero));
        assert_eq!(normalize(&tree).unwrap_err(), ExprError::DivisionByZero);
    }

    #[test]
    fn partial_chain_rule_second_order() {
        // partial(F_{u_y}, u_y) -> F_{u_y u_y}
        let mut ctx = Context::new(vec!["x".into(), "y".into()], vec!["u".into()]);
        let uy = Atom::jet(0, MultiIndex::from_indices(&[1]));
        let f_id = ctx.add_func("F", vec![Atom::indep(0), uy.clone()]).unwrap();
        let f_uy = Expr::atom(Atom::func("F".into(), f_id, vec![1]));
        let d = f_uy.partial(&ctx, &uy).unwrap();
        assert_eq!(d, Expr::atom(Atom::func("F".into(), f_id, vec![1, 1])));
    }

    #[test]
    fn leibniz_rule() {
        let mut ctx = Context::new(vec!["x".into()], vec!["u".into()]);
        let f_id = ctx.add_func("F", vec![ux()]).unwrap();
        let f = Expr::atom(ctx.func_atom(f_id));
        let u = Expr::atom(ux());
        let prod = f.mul(&u);
        let lhs = prod.partial(&ctx, &ux()).unwrap();
        let rhs = f
            .partial(&ctx, &ux())
            .unwrap()
            .mul(&u)
            .add(&f.mul(&u.partial(&ctx, &ux()).unwrap()));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn implicit_relation_rewrites_derivatives() {
        // f defined by H(f) + u_x*f - v_x = 0
        let mut ctx = Context::new(vec!["x".into(), "y".into()], vec!["u".into(), "v".into()]);
        let vx = Atom::jet(1, MultiIndex::from_indices(&[0]));
        let f_id = ctx.add_func("f", vec![ux(), vx.clone()]).unwrap();
        let f_atom = ctx.func_atom(f_id);
        let h_id = ctx.add_func("H", vec![f_atom.clone()]).unwrap();
        let relation = Expr::atom(ctx.func_atom(h_id))
            .add(&Expr::atom(ux()).mul(&Expr::atom(f_atom.clone())))
            .sub(&Expr::atom(vx.clone()));
        ctx.set_relation(f_id, relation.clone()).unwrap();

        let h_prime = Expr::atom(Atom::func("H".into(), h_id, vec![0]));
        let denom = h_prime.add(&Expr::atom(ux()));
        let f = Expr::atom(f_atom.clone());

        // f_{u_x} = -f/(H' + u_x), f_{v_x} = 1/(H' + u_x)
        let d_ux = implicit_partial(&ctx, f_id, &ux()).unwrap();
        let d_vx = implicit_partial(&ctx, f_id, &vx).unwrap();
        assert_eq!(d_ux, f.neg().div(&denom).unwrap());
        assert_eq!(d_vx, Expr::one().div(&denom).unwrap());

        // oracle: substituting back into the differentiated relation gives 0
        for (a, da) in [(ux(), &d_ux), (vx.clone(), &d_vx)] {
            let residual = relation
                .partial_holding(&ctx, &a, Some(f_id))
                .unwrap()
                .add(
                    &relation
                        .partial_holding(&ctx, &f_atom, Some(f_id))
                        .unwrap()
                        .mul(da),
                );
            assert!(residual.is_zero());
        }

        // f_{u_x} + f*f_{v_x} = 0
        let combo = d_ux.add(&f.mul(&d_vx));
        assert!(combo.is_zero());

        // chain rule through implicit symbols inside larger expressions
        let e = Expr::atom(ctx.func_atom(f_id)).powi(2).unwrap();
        let de = e.partial(&ctx, &ux()).unwrap();
        assert_eq!(de, Expr::from_int(2).mul(&f).mul(&d_ux));
    }

    #[test]
    fn probe_agrees_with_symbolic() {
        use rand::SeedableRng;
        let ctx = Context::new(vec!["x".into()], vec!["u".into()]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let u = Expr::atom(ux());
        let x = Expr::atom(Atom::indep(0));
        // (u+x)^2 - u^2 - 2ux - x^2 == 0
        let z = u
            .add(&x)
            .powi(2)
            .unwrap()
            .sub(&u.powi(2).unwrap())
            .sub(&Expr::from_int(2).mul(&u).mul(&x))
            .sub(&x.powi(2).unwrap());
        assert!(z.is_zero());
        match probe_zero(&z, &ctx, &mut rng, 3).unwrap() {
            ProbeVerdict::ZeroLikely { .. } => {}
            v => panic!("expected zero verdict, got {v:?}"),
        }
        let nz = u.add(&x);
        assert_eq!(probe_zero(&nz, &ctx, &mut rng, 3).unwrap(), ProbeVerdict::NonZero);
    }
}
