//! The symbol context: names of independent/dependent variables, the
//! registry of uninterpreted function symbols, memoized derivative rules for
//! implicitly defined symbols, and the log of genericity assumptions.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::atom::{Atom, FuncId};
use crate::error::ExprError;
use crate::expr::Expr;

/// An uninterpreted function symbol. `args` are the formal argument slots;
/// an optional `relation` R(args…, self) = 0 defines the symbol implicitly,
/// in which case derivatives of the symbol are rewritten through the rule
/// ∂f/∂a = −(∂R/∂a)/(∂R/∂f).
#[derive(Debug, Clone)]
pub struct FuncSymbol {
    pub name: Arc<str>,
    pub args: Vec<Atom>,
    pub relation: Option<Expr>,
    /// ∂R/∂f, validated nonzero when the relation is attached.
    pub relation_jacobian: Option<Expr>,
}

#[derive(Debug, Default)]
pub struct Context {
    pub indep_names: Vec<String>,
    pub dep_names: Vec<String>,
    funcs: Vec<FuncSymbol>,
    by_name: HashMap<String, FuncId>,
    implicit_memo: Mutex<HashMap<(FuncId, Vec<u8>), Expr>>,
    assumptions: Mutex<BTreeSet<Expr>>,
}

impl Context {
    pub fn new(indep_names: Vec<String>, dep_names: Vec<String>) -> Self {
        Context {
            indep_names,
            dep_names,
            ..Default::default()
        }
    }

    pub fn n_indep(&self) -> usize {
        self.indep_names.len()
    }

    pub fn n_dep(&self) -> usize {
        self.dep_names.len()
    }

    pub fn funcs(&self) -> &[FuncSymbol] {
        &self.funcs
    }

    pub fn func(&self, id: FuncId) -> &FuncSymbol {
        &self.funcs[id.0 as usize]
    }

    pub fn func_by_name(&self, name: &str) -> Option<FuncId> {
        self.by_name.get(name).copied()
    }

    /// Register an uninterpreted symbol. Argument atoms must be pairwise
    /// distinct; function-symbol arguments must already be registered, which
    /// keeps the dependency graph acyclic.
    pub fn add_func(&mut self, name: &str, args: Vec<Atom>) -> Result<FuncId, ExprError> {
        if self.by_name.contains_key(name) {
            return Err(ExprError::UnknownSymbol(format!(
                "symbol `{name}` declared twice"
            )));
        }
        let mut seen = BTreeSet::new();
        for a in &args {
            if !seen.insert(a.clone()) {
                return Err(ExprError::UnknownSymbol(format!(
                    "symbol `{name}` has a repeated argument"
                )));
            }
            if let Atom::Func { id, .. } = a {
                if id.0 as usize >= self.funcs.len() {
                    return Err(ExprError::UnknownSymbol(format!(
                        "argument of `{name}` references an unregistered symbol"
                    )));
                }
            }
        }
        let id = FuncId(self.funcs.len() as u32);
        self.funcs.push(FuncSymbol {
            name: Arc::from(name),
            args,
            relation: None,
            relation_jacobian: None,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// The symbol itself as an atom.
    pub fn func_atom(&self, id: FuncId) -> Atom {
        Atom::func(self.func(id).name.clone(), id, vec![])
    }

    /// Attach an implicit relation R = 0 to symbol `id`. The relation must
    /// contain the bare symbol and ∂R/∂f must not vanish identically; the
    /// Jacobian is recorded as a genericity assumption.
    pub fn set_relation(&mut self, id: FuncId, relation: Expr) -> Result<(), ExprError> {
        let self_atom = self.func_atom(id);
        // derivatives of the defined symbol must not appear in its relation
        for a in relation.atoms() {
            if let Atom::Func { id: fid, slots, .. } = &a {
                if *fid == id && !slots.is_empty() {
                    return Err(ExprError::DegenerateImplicitRelation(
                        self.func(id).name.to_string(),
                    ));
                }
            }
        }
        // a cycle of implicit definitions would make the derivative rewriting
        // non-terminating: nothing already implicit may reference this symbol
        for g in &self.funcs {
            if let Some(rel) = &g.relation {
                let cyclic = rel
                    .atoms()
                    .iter()
                    .any(|a| matches!(a, Atom::Func { id: fid, .. } if *fid == id));
                if cyclic {
                    return Err(ExprError::UnknownSymbol(format!(
                        "implicit relations for `{}` and `{}` form a cycle",
                        self.func(id).name,
                        g.name
                    )));
                }
            }
        }
        let jac = relation.partial_holding(self, &self_atom, Some(id))?;
        if jac.is_zero() {
            return Err(ExprError::DegenerateImplicitRelation(
                self.func(id).name.to_string(),
            ));
        }
        self.assume_nonzero(&jac);
        let f = &mut self.funcs[id.0 as usize];
        f.relation = Some(relation);
        f.relation_jacobian = Some(jac);
        Ok(())
    }

    pub fn is_implicit(&self, id: FuncId) -> bool {
        self.func(id).relation.is_some()
    }

    /// The rewritten expression for the derivative of implicit symbol `id`
    /// along the sorted slot multiset `slots` (nonempty). Memoized.
    pub fn implicit_deriv(&self, id: FuncId, slots: &[u8]) -> Result<Expr, ExprError> {
        debug_assert!(!slots.is_empty());
        if let Some(e) = self.implicit_memo.lock().unwrap().get(&(id, slots.to_vec())) {
            return Ok(e.clone());
        }
        let result = if slots.len() == 1 {
            let k = slots[0] as usize;
            let sym = self.func(id);
            let relation = sym
                .relation
                .clone()
                .ok_or_else(|| ExprError::UnknownSymbol(sym.name.to_string()))?;
            let jac = sym.relation_jacobian.clone().unwrap();
            let arg = sym.args[k].clone();
            let dr_da = relation.partial_holding(self, &arg, Some(id))?;
            dr_da.neg().div(&jac)?
        } else {
            // peel the largest slot; partials commute so the order is free
            let (last, rest) = slots.split_last().unwrap();
            let prev = self.implicit_deriv(id, rest)?;
            let arg = self.func(id).args[*last as usize].clone();
            prev.partial(self, &arg)?
        };
        self.implicit_memo
            .lock()
            .unwrap()
            .insert((id, slots.to_vec()), result.clone());
        Ok(result)
    }

    /// Record a nonzero assumption (the numerator polynomial, normalized).
    pub fn assume_nonzero(&self, e: &Expr) {
        if let Some(canon) = e.assumption_form() {
            self.assumptions.lock().unwrap().insert(canon);
        }
    }

    pub fn assumptions(&self) -> Vec<Expr> {
        self.assumptions.lock().unwrap().iter().cloned().collect()
    }

    // -- display ------------------------------------------------------------

    /// Classical rendering: `u_xy` when every independent name is a single
    /// character, `u_{102}` digits otherwise.
    pub fn display_atom(&self, a: &Atom) -> String {
        match a {
            Atom::Independent(i) => self
                .indep_names
                .get(*i)
                .cloned()
                .unwrap_or_else(|| format!("x{}", i + 1)),
            Atom::Jet { dep, idx } => {
                let base = self
                    .dep_names
                    .get(*dep)
                    .cloned()
                    .unwrap_or_else(|| format!("w{}", dep + 1));
                if idx.is_empty() {
                    base
                } else if self.letters_ok() {
                    let letters: String = idx
                        .expansion()
                        .map(|i| self.indep_names[i].chars().next().unwrap())
                        .collect();
                    format!("{base}_{letters}")
                } else {
                    format!("{base}_{{{idx}}}")
                }
            }
            Atom::Func { name, id, slots } => {
                if slots.is_empty() {
                    return name.to_string();
                }
                let sym = self.func(*id);
                // single-argument symbols read best with prime marks
                if sym.args.len() == 1 {
                    let primes: String = std::iter::repeat('\'').take(slots.len()).collect();
                    return format!("{name}{primes}");
                }
                let subs: Vec<String> = slots
                    .iter()
                    .map(|&s| self.display_atom(&sym.args[s as usize]))
                    .collect();
                format!("{name}_{{{}}}", subs.join(","))
            }
        }
    }

    fn letters_ok(&self) -> bool {
        !self.indep_names.is_empty()
            && self.indep_names.len() <= 3
            && self.indep_names.iter().all(|s| s.chars().count() == 1)
    }
}
