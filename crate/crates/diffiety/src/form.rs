//! Exterior calculus at truncation order, in the contact frame.
//!
//! On a prolonged chart the cotangent basis used everywhere is
//! {ω^j_I (parametric), dx_i}: a key `Jet` atom stands for the contact form
//! ω^j_I, a key `Independent` atom for dx_i. Contact forms of parametric
//! coordinates are unit vectors in this frame, contact forms of principal
//! derivatives come from the Lie recurrence L_{D_i} ω_f = ω_{D_i f}, and the
//! differentials of the frame elements close among themselves:
//! d ω^j_I = − Σ_i ω(w^j_{Ii}) ∧ dx_i. Expressions for the prolonged
//! right-hand sides therefore never get expanded beyond first order.
//!
//! On a finite chart (an explicit coordinate list, no jet structure) the
//! same keys are read as plain coordinate differentials.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::atom::{Atom, MultiIndex};
use crate::context::Context;
use crate::error::JetError;
use crate::expr::Expr;
use crate::jet::Chart;

/// A frame element: d(coordinate) on finite charts, ω^j_I / dx_i on
/// prolonged charts. Ordering mirrors the atom ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Covector(pub Atom);

impl Covector {
    pub fn jet_order(&self) -> usize {
        self.0.jet_order()
    }
}

/// A one-form: finite coefficient map over the frame. Zero coefficients are
/// never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OneForm {
    pub coeffs: BTreeMap<Covector, Expr>,
}

impl OneForm {
    pub fn zero() -> Self {
        OneForm::default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn unit(a: Atom) -> Self {
        OneForm::from_pairs([(a, Expr::one())])
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Atom, Expr)>) -> Self {
        let mut f = OneForm::zero();
        for (a, c) in pairs {
            f.insert(Covector(a), c);
        }
        f
    }

    pub fn insert(&mut self, k: Covector, c: Expr) {
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(k) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn coeff(&self, k: &Covector) -> Expr {
        self.coeffs.get(k).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn add(&self, other: &OneForm) -> OneForm {
        let mut out = self.clone();
        for (k, c) in &other.coeffs {
            out.insert(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &OneForm) -> OneForm {
        self.add(&other.scale(&Expr::from_int(-1)))
    }

    pub fn scale(&self, e: &Expr) -> OneForm {
        if e.is_zero() {
            return OneForm::zero();
        }
        OneForm {
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, c)| (k.clone(), c.mul(e)))
                .collect(),
        }
    }

    /// Highest jet order among the frame keys (dx's count as order 0).
    pub fn order(&self) -> usize {
        self.coeffs.keys().map(|k| k.jet_order()).max().unwrap_or(0)
    }
}

/// A two-form over ordered wedge pairs of frame elements (first < second).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TwoForm {
    pub coeffs: BTreeMap<(Covector, Covector), Expr>,
}

impl TwoForm {
    pub fn zero() -> Self {
        TwoForm::default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn insert(&mut self, a: Covector, b: Covector, c: Expr) {
        if c.is_zero() || a == b {
            return;
        }
        let (key, coef) = if a < b { ((a, b), c) } else { ((b, a), c.neg()) };
        match self.coeffs.entry(key) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&coef);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &TwoForm) -> TwoForm {
        let mut out = self.clone();
        for ((a, b), c) in &other.coeffs {
            out.insert(a.clone(), b.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, e: &Expr) -> TwoForm {
        if e.is_zero() {
            return TwoForm::zero();
        }
        TwoForm {
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, c)| (k.clone(), c.mul(e)))
                .collect(),
        }
    }
}

/// η ∧ ω for one-forms.
pub fn wedge(eta: &OneForm, omega: &OneForm) -> TwoForm {
    let mut out = TwoForm::zero();
    for (a, ca) in &eta.coeffs {
        for (b, cb) in &omega.coeffs {
            out.insert(a.clone(), b.clone(), ca.mul(cb));
        }
    }
    out
}

/// A formal derivation on the chart ring.
#[derive(Debug, Clone)]
pub enum VectorField {
    /// The total derivative D_i.
    TotalDerivative(usize),
    /// Components in the frame dual to {ω^j_I, dx_i}: an `Independent` key
    /// carries a D_i component, a jet key the dual vertical field of ω^j_I.
    /// On finite charts this is the plain coordinate derivation Σ ζ_c ∂/∂c.
    FrameDual(BTreeMap<Atom, Expr>),
    /// An F-linear combination Σ f_i Z_i.
    Combination(Vec<(Expr, VectorField)>),
}

impl VectorField {
    pub fn frame(pairs: impl IntoIterator<Item = (Atom, Expr)>) -> Self {
        VectorField::FrameDual(
            pairs
                .into_iter()
                .filter(|(_, e)| !e.is_zero())
                .collect(),
        )
    }

    /// Apply the derivation to a chart function (an expression in parametric
    /// atoms). Dual jet components act as chart partials, dx components as
    /// total derivatives.
    pub fn apply(&self, chart: &Chart, e: &Expr) -> Result<Expr, JetError> {
        match self {
            VectorField::TotalDerivative(i) => chart.total_derivative(*i, e),
            VectorField::FrameDual(map) => {
                let mut acc = Expr::zero();
                for (c, zeta) in map {
                    let d = match c {
                        Atom::Independent(i) => chart.total_derivative(*i, e)?,
                        _ => e.partial(&chart.ctx, c)?,
                    };
                    if !d.is_zero() {
                        acc = acc.add(&zeta.mul(&d));
                    }
                }
                Ok(acc)
            }
            VectorField::Combination(parts) => {
                let mut acc = Expr::zero();
                for (f, z) in parts {
                    acc = acc.add(&f.mul(&z.apply(chart, e)?));
                }
                Ok(acc)
            }
        }
    }

    /// Pairing with a frame element.
    pub fn pair_basis(&self, chart: &Chart, k: &Covector) -> Result<Expr, JetError> {
        match self {
            VectorField::TotalDerivative(i) => Ok(match &k.0 {
                Atom::Independent(j) if i == j => Expr::one(),
                _ => Expr::zero(), // contact forms vanish on total derivatives
            }),
            VectorField::FrameDual(map) => {
                Ok(map.get(&k.0).cloned().unwrap_or_else(Expr::zero))
            }
            VectorField::Combination(parts) => {
                let mut acc = Expr::zero();
                for (f, z) in parts {
                    let p = z.pair_basis(chart, k)?;
                    if !p.is_zero() {
                        acc = acc.add(&f.mul(&p));
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// The contact form of a jet coordinate in the frame: a unit vector for
/// parametric coordinates, the Lie recurrence ω(w_{Ii}) = L_{D_i} ω(w_I)
/// rooted at ω of the solved right-hand side for principal ones.
pub fn contact_form(chart: &Arc<Chart>, dep: usize, idx: &MultiIndex) -> Result<OneForm, JetError> {
    if idx.order() > chart.cap() {
        return Err(JetError::TruncationOverflow {
            requested: idx.order(),
            cap: chart.cap(),
        });
    }
    if !chart.is_principal(dep, idx) {
        return Ok(OneForm::unit(Atom::jet(dep, idx.clone())));
    }
    principal_contact(chart, dep, idx)
}

fn principal_contact(chart: &Arc<Chart>, dep: usize, idx: &MultiIndex) -> Result<OneForm, JetError> {
    let key = Atom::jet(dep, idx.clone());
    if let Some(pairs) = chart.principal_contact_memo.lock().unwrap().get(&key) {
        return Ok(OneForm::from_pairs(pairs.clone()));
    }
    let (lead_idx, rhs) = chart
        .leader_value(dep, idx)
        .expect("principal atoms have a leader");
    let form = if lead_idx == *idx {
        omega_of(chart, &rhs)?
    } else {
        let dir = (0..chart.n())
            .find(|&i| idx.count(i) > lead_idx.count(i))
            .expect("idx strictly extends the leader");
        let parent = idx.unbump(dir).unwrap();
        let parent_form = principal_contact(chart, dep, &parent)?;
        lie(chart, &VectorField::TotalDerivative(dir), &parent_form)?
    };
    let pairs: Vec<(Atom, Expr)> = form
        .coeffs
        .iter()
        .map(|(k, c)| (k.0.clone(), c.clone()))
        .collect();
    chart
        .principal_contact_memo
        .lock()
        .unwrap()
        .insert(key, pairs);
    Ok(form)
}

/// ω_f: the contact component of df, i.e. Σ (∂f/∂w^j_I) ω^j_I over the
/// parametric jet coordinates (chain rule through function symbols).
pub fn omega_of(chart: &Arc<Chart>, f: &Expr) -> Result<OneForm, JetError> {
    let mut out = OneForm::zero();
    for c in chart.jet_closure(f) {
        let p = f.partial(&chart.ctx, &c)?;
        if !p.is_zero() {
            out.insert(Covector(c), p);
        }
    }
    Ok(out)
}

/// Full differential in the frame: df = ω_f + Σ (D_i f) dx_i on prolonged
/// charts; on finite charts the plain coordinate differential.
pub fn d_expr(chart: &Arc<Chart>, f: &Expr) -> Result<OneForm, JetError> {
    if !chart.is_prolonged() {
        let mut out = OneForm::zero();
        for c in chart.coordinates() {
            let p = f.partial(&chart.ctx, c)?;
            if !p.is_zero() {
                out.insert(Covector(c.clone()), p);
            }
        }
        return Ok(out);
    }
    let mut out = omega_of(chart, f)?;
    for i in 0..chart.n() {
        let df = chart.total_derivative(i, f)?;
        if !df.is_zero() {
            out.insert(Covector(Atom::indep(i)), df);
        }
    }
    Ok(out)
}

/// d of a frame element: zero for dx and for finite-chart differentials;
/// d ω^j_I = −Σ_i ω(w^j_{Ii}) ∧ dx_i on prolonged charts.
fn d_basis(chart: &Arc<Chart>, k: &Covector) -> Result<TwoForm, JetError> {
    if !chart.is_prolonged() {
        return Ok(TwoForm::zero());
    }
    let Atom::Jet { dep, idx } = &k.0 else {
        return Ok(TwoForm::zero());
    };
    let mut out = TwoForm::zero();
    for i in 0..chart.n() {
        let bumped = idx.bump(i);
        let omega_bumped = contact_form(chart, *dep, &bumped)?;
        for (c, coef) in &omega_bumped.coeffs {
            out.insert(c.clone(), Covector(Atom::indep(i)), coef.neg());
        }
    }
    Ok(out)
}

/// d of a one-form: Σ da_K ∧ e_K + Σ a_K d(e_K).
pub fn d(chart: &Arc<Chart>, omega: &OneForm) -> Result<TwoForm, JetError> {
    let mut out = TwoForm::zero();
    for (k, a) in &omega.coeffs {
        let da = d_expr(chart, a)?;
        for (c, coef) in &da.coeffs {
            out.insert(c.clone(), k.clone(), coef.clone());
        }
        out = out.add(&d_basis(chart, k)?.scale(a));
    }
    Ok(out)
}

/// Pairing ω(Z).
pub fn eval(chart: &Chart, omega: &OneForm, z: &VectorField) -> Result<Expr, JetError> {
    let mut acc = Expr::zero();
    for (k, a) in &omega.coeffs {
        let zk = z.pair_basis(chart, k)?;
        if !zk.is_zero() {
            acc = acc.add(&a.mul(&zk));
        }
    }
    Ok(acc)
}

/// Lie derivative. Total derivatives act coefficientwise plus the frame
/// shift L_{D_i} ω^j_I = ω(w^j_{Ii}); all other derivations go through the
/// Cartan formula L_Z ω = Z ⌋ dω + d(ω(Z)).
pub fn lie(chart: &Arc<Chart>, z: &VectorField, omega: &OneForm) -> Result<OneForm, JetError> {
    match z {
        VectorField::TotalDerivative(i) => {
            let mut out = OneForm::zero();
            for (k, a) in &omega.coeffs {
                let da = chart.total_derivative(*i, a)?;
                out.insert(k.clone(), da);
                if let Atom::Jet { dep, idx } = &k.0 {
                    let bumped = idx.bump(*i);
                    let shifted = contact_form(chart, *dep, &bumped)?;
                    out = out.add(&shifted.scale(a));
                }
            }
            Ok(out)
        }
        VectorField::Combination(parts) => {
            let mut out = OneForm::zero();
            for (f, zi) in parts {
                out = out.add(&lie(chart, zi, omega)?.scale(f));
                let pairing = eval(chart, omega, zi)?;
                if !pairing.is_zero() {
                    out = out.add(&d_expr(chart, f)?.scale(&pairing));
                }
            }
            Ok(out)
        }
        _ => {
            let cart = contract(chart, z, &d(chart, omega)?)?;
            let pairing = eval(chart, omega, z)?;
            if pairing.is_zero() {
                Ok(cart)
            } else {
                Ok(cart.add(&d_expr(chart, &pairing)?))
            }
        }
    }
}

/// Interior product Z ⌋ τ.
pub fn contract(chart: &Chart, z: &VectorField, tau: &TwoForm) -> Result<OneForm, JetError> {
    let mut out = OneForm::zero();
    for ((a, b), c) in &tau.coeffs {
        let za = z.pair_basis(chart, a)?;
        if !za.is_zero() {
            out.insert(b.clone(), c.mul(&za));
        }
        let zb = z.pair_basis(chart, b)?;
        if !zb.is_zero() {
            out.insert(a.clone(), c.mul(&zb).neg());
        }
    }
    Ok(out)
}

/// Commutator [X, Y] of derivations, as frame-dual components on the chart.
pub fn bracket(chart: &Chart, x: &VectorField, y: &VectorField) -> Result<VectorField, JetError> {
    let mut map = BTreeMap::new();
    for c in chart.coordinates() {
        let ce = Expr::atom(c.clone());
        let yc = y.apply(chart, &ce)?;
        let xc = x.apply(chart, &ce)?;
        let v = x.apply(chart, &yc)?.sub(&y.apply(chart, &xc)?);
        if !v.is_zero() {
            map.insert(c.clone(), v);
        }
    }
    Ok(VectorField::FrameDual(map))
}

/// Expand a contact-frame one-form into coordinate differentials
/// (dw^j_I = ω^j_I + Σ subst(w^j_{Ii}) dx_i inverted). Materializes the
/// prolonged substitution values, so use only on low-order forms for
/// display and tests.
pub fn to_coordinate_basis(chart: &Arc<Chart>, omega: &OneForm) -> Result<OneForm, JetError> {
    if !chart.is_prolonged() {
        return Ok(omega.clone());
    }
    let mut out = OneForm::zero();
    for (k, a) in &omega.coeffs {
        match &k.0 {
            Atom::Jet { dep, idx } => {
                out.insert(k.clone(), a.clone());
                for i in 0..chart.n() {
                    let v = chart.subst_or_atom(&Atom::jet(*dep, idx.bump(i)))?;
                    out.insert(Covector(Atom::indep(i)), v.neg().mul(a));
                }
            }
            _ => out.insert(k.clone(), a.clone()),
        }
    }
    Ok(out)
}

/// Context-aware rendering. Jet keys on prolonged charts denote contact
/// frame elements and are rendered `ω[u_xy]`; dx and finite-chart keys are
/// rendered `dx`, `du`.
pub fn one_form_display(omega: &OneForm, ctx: &Context, prolonged: bool) -> String {
    if omega.is_zero() {
        return "0".to_string();
    }
    let mut parts = Vec::new();
    for (k, c) in &omega.coeffs {
        let name = ctx.display_atom(&k.0);
        let dk = if prolonged && k.0.is_jet() {
            format!("ω[{name}]")
        } else {
            format!("d{name}")
        };
        let cs = crate::expr::expr_display(c, ctx);
        let piece = if cs == "1" {
            dk
        } else if cs == "-1" {
            format!("-{dk}")
        } else if c.den().is_one() && c.num().terms().len() == 1 {
            format!("{cs}*{dk}")
        } else {
            format!("({cs})*{dk}")
        };
        parts.push(piece);
    }
    let mut out = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i == 0 {
            out.push_str(p);
        } else if let Some(stripped) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(stripped);
        } else {
            out.push_str(" + ");
            out.push_str(p);
        }
    }
    out
}
