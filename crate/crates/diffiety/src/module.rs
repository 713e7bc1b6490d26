//! Module-level linear algebra over the expression field: reduced echelon
//! generator sets, membership, kernels under Lie derivatives, orthogonal and
//! Adj modules, the Frobenius flatness test and Cauchy characteristics, all
//! at truncation order.
//!
//! Echelon pivoting follows the chart's covector preference (dependent
//! differentials first, dx's last), so reduced generator sets come out in the
//! solved shapes one writes by hand. The reduced set is unique for a given
//! span and serves as the module equality witness.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use crate::atom::Atom;
use crate::error::ModError;
use crate::expr::Expr;
use crate::form::{contract, d, lie, Covector, OneForm, VectorField};
use crate::jet::Chart;

/// Rank witness of a reduction: pivots and any symbolic pivots that were
/// divided by (recorded as nonzero assumptions).
#[derive(Debug, Clone)]
pub struct RankCertificate {
    pub rank: usize,
    pub pivots: Vec<Covector>,
    pub assumptions: Vec<Expr>,
}

#[derive(Debug, Clone)]
struct Reduced {
    /// rows sorted by pivot preference, each monic at its pivot
    rows: Vec<OneForm>,
    pivots: Vec<Covector>,
    assumptions: Vec<Expr>,
}

/// A finitely generated module of one-forms over the expression field.
#[derive(Clone)]
pub struct FormModule {
    pub chart: Arc<Chart>,
    pub label: String,
    gens: Vec<OneForm>,
    reduced: Arc<OnceLock<Reduced>>,
}

impl std::fmt::Debug for FormModule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormModule")
            .field("label", &self.label)
            .field("gens", &self.gens.len())
            .finish()
    }
}

struct Echelon<'a> {
    chart: &'a Chart,
    /// keyed by pivot priority
    rows: BTreeMap<usize, (Covector, OneForm)>,
    assumptions: Vec<Expr>,
}

impl<'a> Echelon<'a> {
    fn new(chart: &'a Chart) -> Self {
        Echelon {
            chart,
            rows: BTreeMap::new(),
            assumptions: Vec::new(),
        }
    }

    /// Residual of ω against the current rows. Rows are mutually reduced, so
    /// one subtraction per row suffices.
    fn residual(&self, omega: &OneForm) -> OneForm {
        let mut w = omega.clone();
        for (_, (p, row)) in &self.rows {
            let c = w.coeff(p);
            if !c.is_zero() {
                w = w.sub(&row.scale(&c));
            }
        }
        w
    }

    fn insert(&mut self, omega: &OneForm) {
        let w = self.residual(omega);
        if w.is_zero() {
            return;
        }
        let pivot = w
            .coeffs
            .keys()
            .min_by_key(|k| self.chart.pivot_priority(&k.0))
            .unwrap()
            .clone();
        let prio = self.chart.pivot_priority(&pivot.0);
        let lead = w.coeff(&pivot);
        if !lead.is_constant() {
            self.chart.ctx.assume_nonzero(&lead);
            if let Some(a) = lead.assumption_form() {
                if !self.assumptions.contains(&a) {
                    self.assumptions.push(a);
                }
            }
        }
        let w = w.scale(&lead.inv().expect("pivot nonzero"));
        let keys: Vec<usize> = self.rows.keys().cloned().collect();
        for k in keys {
            let c = self.rows[&k].1.coeff(&pivot);
            if !c.is_zero() {
                let updated = self.rows[&k].1.sub(&w.scale(&c));
                let cov = self.rows[&k].0.clone();
                self.rows.insert(k, (cov, updated));
            }
        }
        self.rows.insert(prio, (pivot, w));
    }

    fn finish(self) -> Reduced {
        let pivots = self.rows.values().map(|(p, _)| p.clone()).collect();
        let rows = self.rows.into_values().map(|(_, r)| r).collect();
        Reduced {
            rows,
            pivots,
            assumptions: self.assumptions,
        }
    }
}

impl FormModule {
    pub fn new(chart: Arc<Chart>, label: impl Into<String>, gens: Vec<OneForm>) -> Self {
        FormModule {
            chart,
            label: label.into(),
            gens,
            reduced: Arc::new(OnceLock::new()),
        }
    }

    pub fn zero(chart: Arc<Chart>, label: impl Into<String>) -> Self {
        FormModule::new(chart, label, Vec::new())
    }

    pub fn generators(&self) -> &[OneForm] {
        &self.gens
    }

    fn reduced(&self) -> &Reduced {
        self.reduced.get_or_init(|| {
            let mut ech = Echelon::new(&self.chart);
            for g in &self.gens {
                ech.insert(g);
            }
            ech.finish()
        })
    }

    /// Canonical reduced generator set plus its rank certificate.
    pub fn reduce(&self) -> (FormModule, RankCertificate) {
        let r = self.reduced();
        let cert = RankCertificate {
            rank: r.rows.len(),
            pivots: r.pivots.clone(),
            assumptions: r.assumptions.clone(),
        };
        let m = FormModule::new(self.chart.clone(), self.label.clone(), r.rows.clone());
        let _ = m.reduced.set(r.clone());
        (m, cert)
    }

    pub fn rank(&self) -> usize {
        self.reduced().rows.len()
    }

    pub fn rows(&self) -> &[OneForm] {
        &self.reduced().rows
    }

    pub fn pivots(&self) -> &[Covector] {
        &self.reduced().pivots
    }

    pub fn assumptions(&self) -> &[Expr] {
        &self.reduced().assumptions
    }

    /// Residual of ω modulo the span.
    pub fn reduce_form(&self, omega: &OneForm) -> OneForm {
        let r = self.reduced();
        let mut w = omega.clone();
        for (p, row) in r.pivots.iter().zip(r.rows.iter()) {
            let c = w.coeff(p);
            if !c.is_zero() {
                w = w.sub(&row.scale(&c));
            }
        }
        w
    }

    pub fn contains(&self, omega: &OneForm) -> bool {
        self.reduce_form(omega).is_zero()
    }

    pub fn contains_module(&self, other: &FormModule) -> bool {
        other.rows().iter().all(|r| self.contains(r))
    }

    /// Span equality through the canonical echelon witness.
    pub fn span_eq(&self, other: &FormModule) -> bool {
        self.rows() == other.rows()
    }

    /// Highest covector jet-order among the reduced rows.
    pub fn max_order(&self) -> usize {
        self.rows().iter().map(|r| r.order()).max().unwrap_or(0)
    }

    /// The submodule of forms supported on covectors of jet order ≤ `cut`:
    /// eliminate high-order covectors first; rows whose leading covector
    /// falls inside the zone have no high-order components left.
    pub fn intersect_up_to_order(&self, cut: usize) -> FormModule {
        let mut rows: Vec<OneForm> = self.rows().to_vec();
        let mut universe: Vec<Covector> = {
            let mut set = BTreeSet::new();
            for r in &rows {
                set.extend(r.coeffs.keys().cloned());
            }
            set.into_iter().collect()
        };
        universe.sort_by(|a, b| {
            b.jet_order()
                .cmp(&a.jet_order())
                .then_with(|| self.chart.pivot_priority(&a.0).cmp(&self.chart.pivot_priority(&b.0)))
        });
        for k in &universe {
            if k.jet_order() <= cut {
                break;
            }
            let Some(pos) = rows.iter().position(|r| !r.coeff(k).is_zero()) else {
                continue;
            };
            let lead = rows[pos].coeff(k);
            if !lead.is_constant() {
                self.chart.ctx.assume_nonzero(&lead);
            }
            let pivot_row = rows.remove(pos).scale(&lead.inv().expect("pivot nonzero"));
            for r in rows.iter_mut() {
                let c = r.coeff(k);
                if !c.is_zero() {
                    *r = r.sub(&pivot_row.scale(&c));
                }
            }
        }
        rows.retain(|r| !r.is_zero());
        FormModule::new(self.chart.clone(), format!("{}|{}", self.label, cut), rows)
            .reduce()
            .0
    }

    // -- kernels ------------------------------------------------------------

    /// Largest submodule K ⊆ self with lie(Z, K) ⊆ ambient. Requires
    /// self ⊆ ambient, so for θ = Σ c_i θ_i the Leibniz terms (Zc_i)θ_i stay
    /// inside the ambient module and the condition is a matrix kernel over
    /// the expression field.
    pub fn ker_vf(&self, ambient: &FormModule, z: &VectorField) -> Result<FormModule, ModError> {
        let gens = self.rows().to_vec();
        let label = format!("Ker[{}]", self.label);
        if gens.is_empty() {
            return Ok(FormModule::zero(self.chart.clone(), label));
        }
        let mut residuals: Vec<OneForm> = Vec::with_capacity(gens.len());
        for g in &gens {
            let lg = lie(&self.chart, z, g)?;
            residuals.push(ambient.reduce_form(&lg));
        }
        let mut covs = BTreeSet::new();
        for r in &residuals {
            covs.extend(r.coeffs.keys().cloned());
        }
        let rows: Vec<Vec<Expr>> = covs
            .iter()
            .map(|k| residuals.iter().map(|r| r.coeff(k)).collect())
            .collect();
        let kernel = kernel_basis(&self.chart, rows, gens.len());
        let new_gens: Vec<OneForm> = kernel
            .into_iter()
            .map(|coeffs| {
                let mut acc = OneForm::zero();
                for (c, g) in coeffs.iter().zip(gens.iter()) {
                    if !c.is_zero() {
                        acc = acc.add(&g.scale(c));
                    }
                }
                acc
            })
            .collect();
        Ok(FormModule::new(self.chart.clone(), label, new_gens)
            .reduce()
            .0)
    }

    /// Iterate `ker_vf` with the previous module as ambient until the span
    /// stabilizes. Truncation erodes the top orders by one per step, so when
    /// the ranks differ, stability is judged on the spans cut at the later
    /// module's top order; the earlier module of the matching pair is
    /// returned (its top orders are the most complete) with the rank chain.
    pub fn iterate_ker(
        &self,
        z: &VectorField,
        max_iter: usize,
    ) -> Result<(FormModule, Vec<usize>, bool), ModError> {
        let mut current = self.reduce().0;
        let mut chain = vec![current.rank()];
        for _ in 0..max_iter {
            let next = current.ker_vf(&current, z)?;
            chain.push(next.rank());
            let stable = if next.rank() == current.rank() {
                next.span_eq(&current)
            } else {
                let cut = next.max_order();
                current
                    .intersect_up_to_order(cut)
                    .span_eq(&next.intersect_up_to_order(cut))
            };
            if stable {
                return Ok((current, chain, true));
            }
            current = next;
        }
        Ok((current, chain, false))
    }

    // -- orthogonal / adjoint -----------------------------------------------

    /// Basis of the vector fields annihilating the module on the chart at
    /// truncation. The pairing with the dual frame is diagonal, so the rows
    /// are the coefficient vectors themselves; the basis consists of the
    /// dual fields of the non-pivot frame elements. Fields with only
    /// constant dx components are total-derivative combinations.
    pub fn h_module(&self) -> Result<Vec<VectorField>, ModError> {
        let mut coords: Vec<Atom> = self.chart.coordinates().to_vec();
        coords.sort_by_key(|a| self.chart.pivot_priority(a));
        let rows: Vec<Vec<Expr>> = self
            .rows()
            .iter()
            .map(|r| {
                coords
                    .iter()
                    .map(|c| r.coeff(&Covector(c.clone())))
                    .collect()
            })
            .collect();
        let kernel = kernel_basis(&self.chart, rows, coords.len());
        let mut out = Vec::new();
        for vec in kernel {
            let map: BTreeMap<Atom, Expr> = coords
                .iter()
                .cloned()
                .zip(vec.into_iter())
                .filter(|(_, e)| !e.is_zero())
                .collect();
            out.push(self.recognize_total(map));
        }
        Ok(out)
    }

    /// Present a frame-dual field with only constant dx components as the
    /// total-derivative combination it is.
    fn recognize_total(&self, map: BTreeMap<Atom, Expr>) -> VectorField {
        if !self.chart.is_prolonged() || map.is_empty() {
            return VectorField::FrameDual(map);
        }
        if !map
            .iter()
            .all(|(c, e)| matches!(c, Atom::Independent(_)) && e.is_constant())
        {
            return VectorField::FrameDual(map);
        }
        let mut parts: Vec<(Expr, VectorField)> = map
            .into_iter()
            .map(|(c, e)| match c {
                Atom::Independent(i) => (e, VectorField::TotalDerivative(i)),
                _ => unreachable!(),
            })
            .collect();
        if parts.len() == 1 && parts[0].0.is_one() {
            match parts.remove(0).1 {
                VectorField::TotalDerivative(i) => VectorField::TotalDerivative(i),
                _ => unreachable!(),
            }
        } else {
            VectorField::Combination(parts)
        }
    }

    /// Adj: the module generated by the generators together with X ⌋ dθ for
    /// every generator θ and every X annihilating the module.
    pub fn adj(&self) -> Result<FormModule, ModError> {
        let h = self.h_module()?;
        let mut gens = self.rows().to_vec();
        for theta in self.rows() {
            let dtheta = d(&self.chart, theta)?;
            for x in &h {
                let c = contract(&self.chart, x, &dtheta)?;
                if !c.is_zero() {
                    gens.push(c);
                }
            }
        }
        Ok(
            FormModule::new(self.chart.clone(), format!("Adj[{}]", self.label), gens)
                .reduce()
                .0,
        )
    }

    /// Frobenius condition: dθ ≡ 0 modulo the module ideal, decided by
    /// eliminating pivot covectors from the wedge representation.
    pub fn is_flat(&self) -> Result<bool, ModError> {
        for theta in self.rows() {
            let dtheta = d(&self.chart, theta)?;
            if !self.two_form_reduces_to_zero(&dtheta)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Reduce a two-form modulo the degree-2 part of the module ideal and
    /// test for zero: each pivot covector dp ≡ dp − ρ_p (mod M), which has
    /// no pivot components, and a wedge with no pivot components survives
    /// the quotient map untouched.
    fn two_form_reduces_to_zero(&self, tau: &crate::form::TwoForm) -> Result<bool, ModError> {
        let r = self.reduced();
        let pivot_expansion = |k: &Covector| -> Option<OneForm> {
            let pos = r.pivots.iter().position(|p| p == k)?;
            let mut row = r.rows[pos].clone();
            row.coeffs.remove(k);
            Some(row.scale(&Expr::from_int(-1)))
        };
        let mut residual = crate::form::TwoForm::zero();
        for ((a, b), c) in &tau.coeffs {
            match (pivot_expansion(a), pivot_expansion(b)) {
                (None, None) => residual.insert(a.clone(), b.clone(), c.clone()),
                (Some(fa), None) => {
                    for (k, ca) in &fa.coeffs {
                        residual.insert(k.clone(), b.clone(), c.mul(ca));
                    }
                }
                (None, Some(fb)) => {
                    for (k, cb) in &fb.coeffs {
                        residual.insert(a.clone(), k.clone(), c.mul(cb));
                    }
                }
                (Some(fa), Some(fb)) => {
                    for (ka, ca) in &fa.coeffs {
                        for (kb, cb) in &fb.coeffs {
                            residual.insert(ka.clone(), kb.clone(), c.mul(ca).mul(cb));
                        }
                    }
                }
            }
        }
        Ok(residual.is_zero())
    }

    /// Cauchy characteristics: the fields Z ∈ H(M) with Z ⌋ dθ ∈ M for every
    /// generator θ — the fields all of whose function multiples preserve M.
    pub fn cauchy(&self) -> Result<Vec<VectorField>, ModError> {
        let h = self.h_module()?;
        if h.is_empty() {
            return Ok(Vec::new());
        }
        let mut rows: Vec<Vec<Expr>> = Vec::new();
        for theta in self.rows() {
            let dtheta = d(&self.chart, theta)?;
            let mut per_field = Vec::new();
            for x in &h {
                let c = contract(&self.chart, x, &dtheta)?;
                per_field.push(self.reduce_form(&c));
            }
            let mut covs = BTreeSet::new();
            for r in &per_field {
                covs.extend(r.coeffs.keys().cloned());
            }
            for k in covs {
                rows.push(per_field.iter().map(|r| r.coeff(&k)).collect());
            }
        }
        let kernel = kernel_basis(&self.chart, rows, h.len());
        let mut out = Vec::new();
        for vec in kernel {
            let mut parts: Vec<(Expr, VectorField)> = vec
                .into_iter()
                .zip(h.iter().cloned())
                .filter(|(c, _)| !c.is_zero())
                .collect();
            if parts.len() == 1 && parts[0].0.is_one() {
                out.push(parts.remove(0).1);
            } else {
                out.push(VectorField::Combination(parts));
            }
        }
        Ok(out)
    }
}

/// Kernel of the column space: canonical basis of the solutions c of
/// Σ_j rows[i][j]·c_j = 0, indexed by the free columns of the reduced
/// echelon form (column order as given).
pub fn kernel_basis(chart: &Chart, rows: Vec<Vec<Expr>>, ncols: usize) -> Vec<Vec<Expr>> {
    let mut mat: Vec<Vec<Expr>> = rows
        .into_iter()
        .filter(|r| r.iter().any(|e| !e.is_zero()))
        .collect();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..ncols {
        if rank == mat.len() {
            break;
        }
        let Some(pos) = (rank..mat.len()).find(|&i| !mat[i][col].is_zero()) else {
            continue;
        };
        mat.swap(rank, pos);
        let lead = mat[rank][col].clone();
        if !lead.is_constant() {
            chart.ctx.assume_nonzero(&lead);
        }
        let inv = lead.inv().expect("pivot nonzero");
        for e in mat[rank].iter_mut() {
            *e = e.mul(&inv);
        }
        for i in 0..mat.len() {
            if i != rank && !mat[i][col].is_zero() {
                let c = mat[i][col].clone();
                let pivot_row = mat[rank].clone();
                for (e, p) in mat[i].iter_mut().zip(pivot_row.iter()) {
                    *e = e.sub(&c.mul(p));
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![Expr::zero(); ncols];
        v[free] = Expr::one();
        for (row_idx, &p) in pivot_cols.iter().enumerate() {
            let c = mat[row_idx][free].clone();
            if !c.is_zero() {
                v[p] = c.neg();
            }
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::MultiIndex;
    use crate::context::Context;
    use crate::fixtures::{mi, noncontrollable_system, ode_system, pde_system};
    use crate::form::{contact_form, d_expr, OneForm};
    use crate::jet::Truncation;

    /// Ω_l: parametric contact forms of order ≤ l.
    fn omega_level(chart: &Arc<Chart>, l: usize) -> FormModule {
        let mut gens = Vec::new();
        for dep in 0..chart.ctx.n_dep() {
            for idx in all_multi_indices(chart.n(), l) {
                if !chart.is_principal(dep, &idx) {
                    gens.push(contact_form(chart, dep, &idx).unwrap());
                }
            }
        }
        FormModule::new(chart.clone(), format!("O_{l}"), gens)
    }

    fn all_multi_indices(n: usize, max: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        fn rec(counts: &mut Vec<u8>, pos: usize, rem: usize, out: &mut Vec<MultiIndex>) {
            if pos == counts.len() {
                out.push(MultiIndex::from_counts(counts.clone()));
                return;
            }
            for c in 0..=rem {
                counts[pos] = c as u8;
                rec(counts, pos + 1, rem - c, out);
            }
            counts[pos] = 0;
        }
        let mut counts = vec![0u8; n];
        rec(&mut counts, 0, max, &mut out);
        out.sort();
        out
    }

    #[test]
    fn ranks_of_filtration_levels() {
        // ODE chart: dim Ω_l = l + 3; PDE chart: dim Ω_l = (l+1)(l+4)/2
        let (_, chart) = ode_system(Truncation::new(4, 2));
        for l in 0..=3 {
            assert_eq!(omega_level(&chart, l).rank(), l + 3);
        }
        let (_, chart) = pde_system(Truncation::new(4, 2));
        for l in 0..=3 {
            assert_eq!(omega_level(&chart, l).rank(), (l + 1) * (l + 4) / 2);
        }
        // rank of a dependent list
        let a = contact_form(&chart, 0, &mi(&[])).unwrap();
        let m = FormModule::new(chart.clone(), "dup", vec![a.clone(), a.scale(&Expr::from_int(2))]);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn ode_kernel_basis_xi_zeta() {
        let (_, chart) = ode_system(Truncation::new(3, 2));
        let o0 = omega_level(&chart, 0).reduce().0;
        let x = VectorField::TotalDerivative(0);
        let ker = o0.ker_vf(&o0, &x).unwrap();
        assert_eq!(ker.rank(), 2);
        // expected: ξ = α − F_{w1} γ0, ζ = β − G_{w1} γ0
        let fid = chart.ctx.func_by_name("F").unwrap();
        let gid = chart.ctx.func_by_name("G").unwrap();
        let fw1 = Expr::atom(Atom::func("F".into(), fid, vec![4]));
        let gw1 = Expr::atom(Atom::func("G".into(), gid, vec![4]));
        let alpha = contact_form(&chart, 0, &mi(&[])).unwrap();
        let beta = contact_form(&chart, 1, &mi(&[])).unwrap();
        let g0 = contact_form(&chart, 2, &mi(&[])).unwrap();
        let xi = alpha.sub(&g0.scale(&fw1));
        let zeta = beta.sub(&g0.scale(&gw1));
        let expected = FormModule::new(chart.clone(), "expected", vec![xi.clone(), zeta.clone()]);
        assert!(ker.span_eq(&expected.reduce().0));
        assert!(ker.contains(&xi) && ker.contains(&zeta));
        assert!(!ker.contains(&g0));
    }

    #[test]
    fn pde_kernel_chain_under_d1() {
        let (_, chart) = pde_system(Truncation::new(3, 2));
        let d1 = VectorField::TotalDerivative(0);
        // Ker_{D1} Ω_0 = 0
        let o0 = omega_level(&chart, 0).reduce().0;
        let k = o0.ker_vf(&o0, &d1).unwrap();
        assert_eq!(k.rank(), 0);
        // Ker_{D1} Ω_{l+1} = Ω_l
        for l in 0..2 {
            let this = omega_level(&chart, l + 1).reduce().0;
            let k = this.ker_vf(&this, &d1).unwrap();
            assert!(k.span_eq(&omega_level(&chart, l).reduce().0));
        }
    }

    #[test]
    fn pde_kernel_d2_on_derived_module_gives_gamma_chain() {
        let (_, chart) = noncontrollable_system(Truncation::new(3, 2));
        let d1 = VectorField::TotalDerivative(0);
        let d2 = VectorField::TotalDerivative(1);
        // Ω(D1)_0: α_{r0}, β_r for r ≤ order
        let cap = chart.trunc.order;
        let mut gens = Vec::new();
        for r in 0..=cap {
            gens.push(contact_form(&chart, 0, &mi(&vec![0; r])).unwrap());
            gens.push(contact_form(&chart, 1, &mi(&vec![0; r])).unwrap());
        }
        let od1 = FormModule::new(chart.clone(), "O(D1)_0", gens).reduce().0;
        let ker = od1.ker_vf(&od1, &d2).unwrap();
        // basis γ_r = L_{D1}^r (β0 − f α00), r ≤ cap−1
        assert_eq!(ker.rank(), cap);
        let fid = chart.ctx.func_by_name("f").unwrap();
        let f = Expr::atom(chart.ctx.func_atom(fid));
        let mut gamma = contact_form(&chart, 1, &mi(&[]))
            .unwrap()
            .sub(&contact_form(&chart, 0, &mi(&[])).unwrap().scale(&f));
        for _ in 0..cap {
            assert!(ker.contains(&gamma), "γ_r must lie in the kernel");
            gamma = crate::form::lie(&chart, &d1, &gamma).unwrap();
        }
        // membership example: β0 ∉ Ker generically
        let b0 = contact_form(&chart, 1, &mi(&[])).unwrap();
        assert!(!ker.contains(&b0));
        // second kernel step is stable on the eroded zone
        let (stable, chain, ok) = od1.iterate_ker(&d2, 8).unwrap();
        assert!(ok, "chain {chain:?} must stabilize");
        assert_eq!(stable.rank(), cap);
    }

    #[test]
    fn h_module_finds_total_derivatives() {
        let (_, chart) = pde_system(Truncation::new(2, 2));
        let o = omega_level(&chart, 2).reduce().0;
        let h = o.h_module().unwrap();
        let totals: Vec<usize> = h
            .iter()
            .filter_map(|z| match z {
                VectorField::TotalDerivative(i) => Some(*i),
                _ => None,
            })
            .collect();
        assert_eq!(totals, vec![0, 1]);
        // every H field annihilates every generator
        for z in &h {
            for row in o.rows() {
                assert!(crate::form::eval(&chart, row, z).unwrap().is_zero());
            }
        }
        // the full covector span has trivial annihilator
        let all = FormModule::new(
            chart.clone(),
            "full",
            chart
                .coordinates()
                .iter()
                .map(|c| OneForm::from_pairs([(c.clone(), Expr::one())]))
                .collect(),
        );
        assert!(all.h_module().unwrap().is_empty());
    }

    /// The rank-1 Pfaffian module of the noncontrollable family on the
    /// 5-coordinate chart (x, y, u, v, f): γ = dv − f du − H dx − G dy.
    fn gamma_pfaffian() -> (Arc<Chart>, FormModule, Expr, Expr, Expr) {
        let mut ctx = Context::new(
            vec!["x".into(), "y".into(), "u".into(), "v".into()],
            vec![],
        );
        let x = Atom::indep(0);
        let y = Atom::indep(1);
        let u = Atom::indep(2);
        let v = Atom::indep(3);
        let f_id = ctx.add_func("f", vec![]).unwrap();
        let f_atom = ctx.func_atom(f_id);
        let h_id = ctx.add_func("H", vec![f_atom.clone()]).unwrap();
        let h_atom = ctx.func_atom(h_id);
        let w_id = ctx
            .add_func("W", vec![x.clone(), u.clone(), v.clone(), f_atom.clone()])
            .unwrap();
        let w_atom = ctx.func_atom(w_id);
        let rel_w = Expr::atom(w_atom.clone())
            .sub(&Expr::atom(h_atom.clone()).mul(&Expr::atom(x.clone())))
            .sub(&Expr::atom(f_atom.clone()).mul(&Expr::atom(u.clone())))
            .add(&Expr::atom(v.clone()));
        ctx.set_relation(w_id, rel_w).unwrap();
        let g_id = ctx.add_func("G", vec![y.clone(), w_atom]).unwrap();
        let g_atom = ctx.func_atom(g_id);
        let ctx = Arc::new(ctx);
        let chart = Chart::finite(
            ctx.clone(),
            vec![x.clone(), y.clone(), u.clone(), v.clone(), f_atom.clone()],
        );
        let f = Expr::atom(f_atom);
        let h = Expr::atom(h_atom);
        let g = Expr::atom(g_atom);
        let mut gamma = OneForm::zero();
        gamma.insert(Covector(v), Expr::one());
        gamma.insert(Covector(u), f.neg());
        gamma.insert(Covector(x), h.neg());
        gamma.insert(Covector(y), g.neg());
        let m = FormModule::new(chart.clone(), "gamma", vec![gamma]);
        (chart, m, f, h, g)
    }

    #[test]
    fn adj_of_gamma_pfaffian_matches_flat_basis() {
        let (chart, m, f, h, _g) = gamma_pfaffian();
        let m = m.reduce().0;
        let adj = m.adj().unwrap();
        assert_eq!(adj.rank(), 3);
        // expected basis: γ, df, du + H dx + G_w(H'x + u) dy
        let ctx = &chart.ctx;
        let gid = ctx.func_by_name("G").unwrap();
        let hid = ctx.func_by_name("H").unwrap();
        let gw = Expr::atom(Atom::func("G".into(), gid, vec![1]));
        let hp = Expr::atom(Atom::func("H".into(), hid, vec![0]));
        let x = Atom::indep(0);
        let y = Atom::indep(1);
        let u = Atom::indep(2);
        let fid = ctx.func_by_name("f").unwrap();
        let f_atom = ctx.func_atom(fid);
        let df = OneForm::from_pairs([(f_atom, Expr::one())]);
        let mut third = OneForm::zero();
        third.insert(Covector(u.clone()), Expr::one());
        third.insert(Covector(x.clone()), h.clone());
        third.insert(
            Covector(y.clone()),
            gw.mul(&hp.mul(&Expr::atom(x)).add(&Expr::atom(u))),
        );
        let expected = FormModule::new(
            chart.clone(),
            "expected",
            vec![m.rows()[0].clone(), df, third],
        )
        .reduce()
        .0;
        assert!(adj.span_eq(&expected));
        // M ⊆ Adj M, Adj is flat, and Adj Adj = Adj
        assert!(adj.contains_module(&m));
        assert!(adj.is_flat().unwrap());
        assert!(adj.adj().unwrap().span_eq(&adj));
        let _ = f;
    }

    #[test]
    fn flatness_checks() {
        let (chart, m, ..) = gamma_pfaffian();
        let m = m.reduce().0;
        // dγ ∧ γ ≠ 0: not flat as a rank-1 module
        assert!(!m.is_flat().unwrap());
        // span{df} is flat; span{dv − f du} with independent f, v, u is not
        let ctx = &chart.ctx;
        let fid = ctx.func_by_name("f").unwrap();
        let f_atom = ctx.func_atom(fid);
        let df = FormModule::new(
            chart.clone(),
            "df",
            vec![OneForm::from_pairs([(f_atom.clone(), Expr::one())])],
        );
        assert!(df.is_flat().unwrap());
        let mut pf = OneForm::zero();
        pf.insert(Covector(Atom::indep(3)), Expr::one());
        pf.insert(Covector(Atom::indep(2)), Expr::atom(f_atom).neg());
        let pfm = FormModule::new(chart.clone(), "pf", vec![pf]);
        assert!(!pfm.is_flat().unwrap());
    }

    #[test]
    fn cauchy_characteristics() {
        // Cauchy fields of the adj-closed γ module: 5 − 3 = 2 dimensional
        let (_, m, ..) = gamma_pfaffian();
        let adj = m.reduce().0.adj().unwrap();
        let cauchy = adj.cauchy().unwrap();
        assert_eq!(cauchy.len(), 2);
        // cauchy(span{df}) in the chart (f, g): the ∂/∂g line
        let mut ctx = Context::new(vec![], vec![]);
        let f_id = ctx.add_func("f", vec![]).unwrap();
        let g_id = ctx.add_func("g", vec![]).unwrap();
        let f_atom = ctx.func_atom(f_id);
        let g_atom = ctx.func_atom(g_id);
        let ctx = Arc::new(ctx);
        let chart = Chart::finite(ctx, vec![f_atom.clone(), g_atom.clone()]);
        let df = FormModule::new(
            chart.clone(),
            "df",
            vec![OneForm::from_pairs([(f_atom, Expr::one())])],
        );
        let c = df.reduce().0.cauchy().unwrap();
        assert_eq!(c.len(), 1);
        match &c[0] {
            VectorField::FrameDual(map) => {
                assert_eq!(map.len(), 1);
                assert!(map.contains_key(&g_atom));
            }
            other => panic!("expected a finite field, got {other:?}"),
        }
        // the full contact module has no Cauchy characteristics at truncation
        let (_, chart) = pde_system(Truncation::new(2, 2));
        let o = omega_level(&chart, 2).reduce().0;
        assert!(o.cauchy().unwrap().is_empty());
    }

    #[test]
    fn intersect_up_to_order_cuts_high_covectors() {
        let (_, chart) = pde_system(Truncation::new(3, 2));
        let o2 = omega_level(&chart, 2).reduce().0;
        let cut = o2.intersect_up_to_order(1);
        assert!(cut.span_eq(&omega_level(&chart, 1).reduce().0));
    }

    #[test]
    fn monotone_kernel_chain_on_ode() {
        let (_, chart) = ode_system(Truncation::new(3, 2));
        let o0 = omega_level(&chart, 0);
        let x = VectorField::TotalDerivative(0);
        let (stable, chain, ok) = o0.iterate_ker(&x, 10).unwrap();
        // generic F, G: chain 3, 2, 1, 0, 0
        assert!(ok);
        assert_eq!(chain, vec![3, 2, 1, 0, 0]);
        assert_eq!(stable.rank(), 0);
        for w in chain.windows(2) {
            assert!(w[1] <= w[0], "kernel chain must be monotone");
        }
    }

    #[test]
    fn omega_of_membership_in_contact_span() {
        // ω_f lies in the contact span for chart functions f
        let (_, chart) = pde_system(Truncation::new(2, 2));
        let o = omega_level(&chart, 2).reduce().0;
        let f = Expr::atom(Atom::jet(0, mi(&[0])))
            .mul(&Expr::atom(Atom::indep(0)))
            .add(&Expr::atom(Atom::jet(1, mi(&[]))));
        let w = crate::form::omega_of(&chart, &f).unwrap();
        assert!(o.contains(&w));
        // and ω(D_i) = 0
        for i in 0..2 {
            let z = VectorField::TotalDerivative(i);
            assert!(crate::form::eval(&chart, &w, &z).unwrap().is_zero());
        }
        let _ = d_expr(&chart, &f).unwrap();
    }
}
