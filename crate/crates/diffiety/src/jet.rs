//! Jet coordinates, solved-form systems, truncated prolongation and total
//! derivatives.
//!
//! A [`SystemSpec`] holds equations in orthonomic solved form: each equation
//! is solved for a distinct principal derivative and no right-hand side may
//! contain a principal derivative or any of its prolongations. [`prolong`]
//! produces a [`Chart`]: the list of parametric coordinates up to the chart
//! cap together with a (lazy, memoized) substitution table expressing every
//! principal derivative through iterated total derivatives of the solved
//! right-hand sides.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::atom::{Atom, MultiIndex};
use crate::context::Context;
use crate::error::JetError;
use crate::expr::Expr;

/// Truncation policy: module computations run at order `order` while
/// Lie derivatives and differentials may consume the extra `headroom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub order: usize,
    pub headroom: usize,
}

impl Truncation {
    pub fn new(order: usize, headroom: usize) -> Self {
        assert!(order >= 1, "truncation order must be at least 1");
        assert!(headroom >= 2, "headroom must be at least 2");
        Truncation { order, headroom }
    }

    pub fn cap(&self) -> usize {
        self.order + self.headroom
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::new(6, 2)
    }
}

/// One solved equation: principal derivative = rhs.
#[derive(Debug, Clone)]
pub struct Equation {
    pub dep: usize,
    pub idx: MultiIndex,
    pub rhs: Expr,
}

/// A system in solved form over a symbol context.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub ctx: Arc<Context>,
    pub equations: Vec<Equation>,
}

impl SystemSpec {
    pub fn new(ctx: Arc<Context>, mut equations: Vec<Equation>) -> Result<Self, JetError> {
        equations.sort_by(|a, b| a.dep.cmp(&b.dep).then_with(|| a.idx.cmp(&b.idx)));
        let spec = SystemSpec { ctx, equations };
        spec.validate_orthonomic()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.ctx.n_indep()
    }

    pub fn m(&self) -> usize {
        self.ctx.n_dep()
    }


    /// True when `w^dep_idx` is a prolongation of some leader.
    pub fn is_principal(&self, dep: usize, idx: &MultiIndex) -> bool {
        self.equations
            .iter()
            .any(|e| e.dep == dep && e.idx.divides(idx))
    }

    fn validate_orthonomic(&self) -> Result<(), JetError> {
        for (i, e) in self.equations.iter().enumerate() {
            if e.idx.is_empty() {
                return Err(JetError::NotOrthonomic(format!(
                    "equation for {} is algebraic, not differential",
                    self.ctx.display_atom(&Atom::jet(e.dep, e.idx.clone()))
                )));
            }
            for (j, f) in self.equations.iter().enumerate() {
                if i != j && e.dep == f.dep && e.idx.divides(&f.idx) {
                    return Err(JetError::NotOrthonomic(format!(
                        "principal derivative {} is a prolongation of {}",
                        self.ctx.display_atom(&Atom::jet(f.dep, f.idx.clone())),
                        self.ctx.display_atom(&Atom::jet(e.dep, e.idx.clone()))
                    )));
                }
            }
            for a in self.rhs_atom_closure(&e.rhs) {
                if let Atom::Jet { dep, idx } = &a {
                    if self.is_principal(*dep, idx) {
                        return Err(JetError::NotOrthonomic(format!(
                            "right-hand side of {} contains the principal derivative {}",
                            self.ctx.display_atom(&Atom::jet(e.dep, e.idx.clone())),
                            self.ctx.display_atom(&a)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Atoms of an expression plus, transitively, the argument atoms of every
    /// function symbol mentioned.
    fn rhs_atom_closure(&self, e: &Expr) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<Atom> = e.atoms().into_iter().collect();
        while let Some(a) = stack.pop() {
            if !out.insert(a.clone()) {
                continue;
            }
            if let Atom::Func { id, .. } = &a {
                let sym = self.ctx.func(*id);
                stack.extend(sym.args.iter().cloned());
                if let Some(rel) = &sym.relation {
                    stack.extend(rel.atoms());
                }
            }
        }
        out
    }
}

/// A coordinate chart at a fixed truncation. Prolonged charts carry the
/// substitution table for principal derivatives; finite charts (an explicit
/// coordinate list, no jet structure) share the same machinery.
pub struct Chart {
    pub ctx: Arc<Context>,
    pub trunc: Truncation,
    coords: Vec<Atom>,
    coord_set: BTreeSet<Atom>,
    /// echelon pivot preference: dependent differentials first, dx's last
    coord_priority: HashMap<Atom, usize>,
    leaders: Vec<(usize, MultiIndex, Expr)>,
    subst_memo: Mutex<HashMap<Atom, Expr>>,
    dtotal_memo: Mutex<HashMap<(usize, Atom), Expr>>,
    /// provenance of expressions produced by total derivatives: result (with
    /// content stripped) -> (direction, parent). Lets D_i(D_j e) evaluate as
    /// D_j(D_i e) with the higher direction innermost, which keeps iterated
    /// coefficient derivatives small.
    provenance: Mutex<HashMap<Expr, (usize, Expr)>>,
    /// contact expansion of principal derivatives, as (key, coefficient)
    /// pairs over the contact frame; computed by a Lie recurrence in form.rs
    pub(crate) principal_contact_memo: Mutex<HashMap<Atom, Vec<(Atom, Expr)>>>,
}

fn priority_map(coords: &[Atom]) -> HashMap<Atom, usize> {
    let n = coords.len();
    coords
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), n - 1 - i))
        .collect()
}

/// Pivot preference for a prolonged chart: differentials of the dependents
/// that own equations come first, then the remaining jets, dx's last. The
/// echelon then solves kernel combinations for the equation-bearing forms.
fn jet_priority_map(coords: &[Atom], eq_deps: &BTreeSet<usize>) -> HashMap<Atom, usize> {
    let mut ordered: Vec<&Atom> = coords.iter().collect();
    let class = |a: &Atom| -> u8 {
        match a {
            Atom::Jet { dep, .. } if eq_deps.contains(dep) => 0,
            Atom::Jet { .. } => 1,
            Atom::Independent(_) => 3,
            Atom::Func { .. } => 2,
        }
    };
    ordered.sort_by(|a, b| class(a).cmp(&class(b)).then_with(|| a.cmp(b)));
    ordered
        .into_iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect()
}

impl std::fmt::Debug for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chart")
            .field("coords", &self.coords.len())
            .field("trunc", &self.trunc)
            .finish()
    }
}

/// Enumerate all multi-indices over `n` directions with order ≤ `max`.
fn multi_indices_up_to(n: usize, max: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut counts = vec![0u8; n];
    fn rec(counts: &mut Vec<u8>, pos: usize, remaining: usize, out: &mut Vec<MultiIndex>) {
        if pos == counts.len() {
            out.push(MultiIndex::from_counts(counts.clone()));
            return;
        }
        for c in 0..=remaining {
            counts[pos] = c as u8;
            rec(counts, pos + 1, remaining - c, out);
        }
        counts[pos] = 0;
    }
    rec(&mut counts, 0, max, &mut out);
    out.sort();
    out
}

/// Build the truncated prolonged chart of a solved system.
pub fn prolong(spec: &SystemSpec, trunc: Truncation) -> Result<Arc<Chart>, JetError> {
    let cap = trunc.cap();
    let n = spec.n();
    let mut coords: Vec<Atom> = (0..n).map(Atom::indep).collect();
    for dep in 0..spec.m() {
        for idx in multi_indices_up_to(n, cap) {
            if !spec.is_principal(dep, &idx) {
                coords.push(Atom::jet(dep, idx));
            }
        }
    }
    // leaders must be inside the cap and their right-hand sides must fit too
    for e in &spec.equations {
        if e.idx.order() > cap {
            return Err(JetError::TruncationOverflow {
                requested: e.idx.order(),
                cap,
            });
        }
        let o = e.rhs.max_jet_order();
        if o > cap {
            return Err(JetError::TruncationOverflow { requested: o, cap });
        }
    }
    // function-symbol arguments must be chart functions
    for sym in spec.ctx.funcs() {
        for a in &sym.args {
            if let Atom::Jet { dep, idx } = a {
                if spec.is_principal(*dep, idx) {
                    return Err(JetError::NotOrthonomic(format!(
                        "argument {} of symbol {} is a principal derivative",
                        spec.ctx.display_atom(a),
                        sym.name
                    )));
                }
            }
        }
    }
    let coord_set: BTreeSet<Atom> = coords.iter().cloned().collect();
    let eq_deps: BTreeSet<usize> = spec.equations.iter().map(|e| e.dep).collect();
    let chart = Arc::new(Chart {
        ctx: spec.ctx.clone(),
        trunc,
        coord_priority: jet_priority_map(&coords, &eq_deps),
        coords,
        coord_set,
        leaders: spec
            .equations
            .iter()
            .map(|e| (e.dep, e.idx.clone(), e.rhs.clone()))
            .collect(),
        subst_memo: Mutex::new(HashMap::new()),
        dtotal_memo: Mutex::new(HashMap::new()),
        provenance: Mutex::new(HashMap::new()),
        principal_contact_memo: Mutex::new(HashMap::new()),
    });
    chart.check_cross_derivatives()?;
    Ok(chart)
}

impl Chart {
    /// A finite chart on an explicit list of coordinate atoms. Pivot
    /// preference is the reverse of the listed order.
    pub fn finite(ctx: Arc<Context>, coords: Vec<Atom>) -> Arc<Chart> {
        let coord_set = coords.iter().cloned().collect();
        Arc::new(Chart {
            ctx,
            trunc: Truncation::new(1, 2),
            coord_priority: priority_map(&coords),
            coords,
            coord_set,
            leaders: Vec::new(),
            subst_memo: Mutex::new(HashMap::new()),
            dtotal_memo: Mutex::new(HashMap::new()),
            provenance: Mutex::new(HashMap::new()),
            principal_contact_memo: Mutex::new(HashMap::new()),
        })
    }

    /// Echelon pivot preference of a coordinate differential (lower wins).
    pub fn pivot_priority(&self, a: &Atom) -> usize {
        self.coord_priority.get(a).copied().unwrap_or(usize::MAX)
    }

    pub fn n(&self) -> usize {
        self.ctx.n_indep()
    }

    pub fn coordinates(&self) -> &[Atom] {
        &self.coords
    }

    pub fn is_coordinate(&self, a: &Atom) -> bool {
        self.coord_set.contains(a)
    }

    pub fn cap(&self) -> usize {
        self.trunc.cap()
    }

    pub fn is_prolonged(&self) -> bool {
        !self.leaders.is_empty() || self.coords.iter().any(|a| a.is_jet())
    }

    fn leader_for(&self, dep: usize, idx: &MultiIndex) -> Option<&(usize, MultiIndex, Expr)> {
        self.leaders
            .iter()
            .find(|(d, i, _)| *d == dep && i.divides(idx))
    }

    pub fn is_principal(&self, dep: usize, idx: &MultiIndex) -> bool {
        self.leader_for(dep, idx).is_some()
    }

    /// The leader covering a principal derivative, with its right-hand side.
    pub fn leader_value(&self, dep: usize, idx: &MultiIndex) -> Option<(MultiIndex, Expr)> {
        self.leader_for(dep, idx)
            .map(|(_, i, e)| (i.clone(), e.clone()))
    }

    /// Parametric jet atoms an expression can depend on: its own jet atoms
    /// plus, transitively, the argument and relation atoms of every function
    /// symbol mentioned.
    pub fn jet_closure(&self, e: &Expr) -> Vec<Atom> {
        let mut seen = BTreeSet::new();
        let mut jets = BTreeSet::new();
        let mut stack: Vec<Atom> = e.atoms().into_iter().collect();
        while let Some(a) = stack.pop() {
            if !seen.insert(a.clone()) {
                continue;
            }
            match &a {
                Atom::Jet { .. } => {
                    jets.insert(a);
                }
                Atom::Func { id, .. } => {
                    let sym = self.ctx.func(*id);
                    stack.extend(sym.args.iter().cloned());
                    if let Some(rel) = &sym.relation {
                        stack.extend(rel.atoms());
                    }
                }
                Atom::Independent(_) => {}
            }
        }
        jets.into_iter().collect()
    }

    /// All principal jet atoms up to the chart cap, with their values: the
    /// substitution table of the prolongation.
    pub fn substitution_table(&self) -> Result<Vec<(Atom, Expr)>, JetError> {
        let mut out = Vec::new();
        for dep in 0..self.ctx.n_dep() {
            for idx in multi_indices_up_to(self.n(), self.cap()) {
                if self.is_principal(dep, &idx) {
                    let a = Atom::jet(dep, idx);
                    let v = self.subst_or_atom(&a)?;
                    out.push((a, v));
                }
            }
        }
        Ok(out)
    }

    /// The value of a jet atom on the chart: principal atoms are replaced by
    /// their prolonged right-hand sides, parametric atoms stay themselves.
    pub fn subst_or_atom(&self, a: &Atom) -> Result<Expr, JetError> {
        let Atom::Jet { dep, idx } = a else {
            return Ok(Expr::atom(a.clone()));
        };
        if idx.order() > self.cap() {
            return Err(JetError::TruncationOverflow {
                requested: idx.order(),
                cap: self.cap(),
            });
        }
        if !self.is_principal(*dep, idx) {
            return Ok(Expr::atom(a.clone()));
        }
        let mut visiting = BTreeSet::new();
        self.principal_value(*dep, idx, &mut visiting)
    }

    fn principal_value(
        &self,
        dep: usize,
        idx: &MultiIndex,
        visiting: &mut BTreeSet<Atom>,
    ) -> Result<Expr, JetError> {
        let key = Atom::jet(dep, idx.clone());
        if let Some(v) = self.subst_memo.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        if !visiting.insert(key.clone()) {
            return Err(JetError::InconsistentSystem(format!(
                "substitution for {} depends on itself",
                self.ctx.display_atom(&key)
            )));
        }
        let (_, lead_idx, rhs) = self
            .leader_for(dep, idx)
            .expect("principal atoms have a leader")
            .clone();
        let value = if lead_idx == *idx {
            rhs
        } else {
            // peel one derivative along the smallest direction beyond the leader
            let dir = (0..self.n())
                .find(|&i| idx.count(i) > lead_idx.count(i))
                .expect("idx strictly extends the leader");
            let parent = idx.unbump(dir).unwrap();
            let parent_value = self.principal_value(dep, &parent, visiting)?;
            self.total_derivative_inner(dir, &parent_value, visiting)?
        };
        visiting.remove(&key);
        self.subst_memo.lock().unwrap().insert(key, value.clone());
        Ok(value)
    }

    /// Total derivative D_i of an expression on the chart. Expressions that
    /// were themselves produced by a total derivative are differentiated in
    /// commuted order (higher direction innermost): iterated coefficient
    /// derivatives like D_i(D_j^k f) then never expand the deep prolongation
    /// substitutions that a direct chain rule would materialize.
    pub fn total_derivative(&self, dir: usize, e: &Expr) -> Result<Expr, JetError> {
        use num::One;
        if e.is_zero() {
            return Ok(Expr::zero());
        }
        // strip the rational content so scalar multiples share provenance
        let content = e.num().rational_content() / e.den().rational_content();
        let stripped = if content.is_one() {
            e.clone()
        } else {
            e.mul(&Expr::from_rational(num::BigRational::one() / content.clone()))
        };
        let parent = self.provenance.lock().unwrap().get(&stripped).cloned();
        if let Some((pdir, parent)) = parent {
            if pdir > dir {
                // D_dir D_pdir parent = D_pdir D_dir parent
                let inner = self.total_derivative(dir, &parent)?;
                let outer = self.total_derivative(pdir, &inner)?;
                let result = if num::One::is_one(&content) {
                    outer
                } else {
                    outer.mul(&Expr::from_rational(content))
                };
                return Ok(result);
            }
        }
        let mut visiting = BTreeSet::new();
        let out = self.total_derivative_inner(dir, &stripped, &mut visiting)?;
        self.record_provenance(dir, &stripped, &out);
        Ok(if content.is_one() {
            out
        } else {
            out.mul(&Expr::from_rational(content))
        })
    }

    fn record_provenance(&self, dir: usize, parent: &Expr, result: &Expr) {
        if result.is_zero() || result.is_constant() {
            return;
        }
        let mut map = self.provenance.lock().unwrap();
        if map.len() < 100_000 {
            map.entry(result.clone())
                .or_insert_with(|| (dir, parent.clone()));
        }
    }

    fn total_derivative_inner(
        &self,
        dir: usize,
        e: &Expr,
        visiting: &mut BTreeSet<Atom>,
    ) -> Result<Expr, JetError> {
        let dnum = self.poly_total(dir, e.num(), visiting)?;
        if e.den().is_one() {
            return Ok(dnum);
        }
        let dden = self.poly_total(dir, e.den(), visiting)?;
        let num = dnum
            .mul(&Expr::from_poly(e.den().clone()))
            .sub(&Expr::from_poly(e.num().clone()).mul(&dden));
        num.div(&Expr::from_poly(e.den().pow(2)))
            .map_err(|err| JetError::Expr(err))
    }

    fn poly_total(
        &self,
        dir: usize,
        p: &crate::poly::Poly,
        visiting: &mut BTreeSet<Atom>,
    ) -> Result<Expr, JetError> {
        let mut acc = Expr::zero();
        for b in p.atoms() {
            let db = self.atom_total(dir, &b, visiting)?;
            if db.is_zero() {
                continue;
            }
            let formal = p.derivative_atom(&b);
            if formal.is_zero() {
                continue;
            }
            acc = acc.add(&Expr::from_poly(formal).mul(&db));
        }
        Ok(acc)
    }

    /// D_dir of a single atom, memoized.
    fn atom_total(
        &self,
        dir: usize,
        b: &Atom,
        visiting: &mut BTreeSet<Atom>,
    ) -> Result<Expr, JetError> {
        if let Some(v) = self.dtotal_memo.lock().unwrap().get(&(dir, b.clone())) {
            return Ok(v.clone());
        }
        let value = match b {
            Atom::Independent(i) => {
                if *i == dir {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Atom::Jet { dep, idx } => {
                let bumped = idx.bump(dir);
                if bumped.order() > self.cap() {
                    return Err(JetError::TruncationOverflow {
                        requested: bumped.order(),
                        cap: self.cap(),
                    });
                }
                if self.is_principal(*dep, &bumped) {
                    self.principal_value(*dep, &bumped, visiting)?
                } else {
                    Expr::atom(Atom::jet(*dep, bumped))
                }
            }
            Atom::Func { id, slots, .. } => {
                // chain rule through the argument slots
                let sym = self.ctx.func(*id);
                let mut acc = Expr::zero();
                for (k, arg) in sym.args.iter().enumerate() {
                    let darg = self.atom_total(dir, arg, visiting)?;
                    if darg.is_zero() {
                        continue;
                    }
                    let deriv = crate::expr::func_slot_deriv(&self.ctx, *id, slots, k as u8)?;
                    acc = acc.add(&deriv.mul(&darg));
                }
                acc
            }
        };
        self.dtotal_memo
            .lock()
            .unwrap()
            .insert((dir, b.clone()), value.clone());
        Ok(value)
    }

    /// Passivity check: when two leaders of the same dependent variable are
    /// incomparable, both routes to their least common prolongation must
    /// agree inside the cap.
    fn check_cross_derivatives(&self) -> Result<(), JetError> {
        for (i, (d1, i1, _)) in self.leaders.iter().enumerate() {
            for (d2, i2, _) in self.leaders.iter().skip(i + 1) {
                if d1 != d2 {
                    continue;
                }
                let join = i1.join(i2);
                if join.order() > self.cap() {
                    continue;
                }
                let via = |start: &MultiIndex| -> Result<Expr, JetError> {
                    // differentiate the leader's value up to the join
                    let mut idx = start.clone();
                    let mut visiting = BTreeSet::new();
                    let mut val = self.principal_value(*d1, &idx, &mut visiting)?;
                    for dir in 0..self.n() {
                        while idx.count(dir) < join.count(dir) {
                            val = self.total_derivative(dir, &val)?;
                            idx = idx.bump(dir);
                        }
                    }
                    Ok(val)
                };
                let a = via(i1)?;
                let b = via(i2)?;
                if !a.sub(&b).is_zero() {
                    return Err(JetError::InconsistentSystem(format!(
                        "cross-derivatives of {} at {} disagree",
                        self.ctx.dep_names[*d1],
                        self.ctx.display_atom(&Atom::jet(*d1, join))
                    )));
                }
            }
        }
        Ok(())
    }
}
