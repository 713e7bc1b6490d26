//! Symbolic controllability structure of ODE/PDE systems.
//!
//! The engine builds truncated jet-space prolongations of solved-form
//! systems, computes residual submodules of the associated contact module
//! via iterated Lie-derivative kernel chains, fits Hilbert polynomials,
//! verifies flatness, and emits the composition series together with reduced
//! coordinate descriptions of each projected system.

pub mod atom;
pub mod context;
pub mod error;
pub mod expr;
pub mod form;
pub mod jet;
pub mod module;
pub mod poly;

pub use atom::{Atom, FuncId, MultiIndex};
pub use context::{Context, FuncSymbol};
pub use error::{CtrlError, ExprError, JetError, ModError, ParseError};
pub use expr::{normalize, Expr, RawExpr};
pub use form::{Covector, OneForm, TwoForm, VectorField};
pub use jet::{prolong, Chart, Equation, SystemSpec, Truncation};
pub use module::{FormModule, RankCertificate};

/// Shared example systems used across the unit test suites.
#[cfg(test)]
pub(crate) mod fixtures {
    use std::sync::Arc;

    use crate::atom::{Atom, MultiIndex};
    use crate::context::Context;
    use crate::expr::Expr;
    use crate::jet::{prolong, Chart, Equation, SystemSpec, Truncation};

    pub fn mi(indices: &[usize]) -> MultiIndex {
        MultiIndex::from_indices(indices)
    }

    /// Single PDE v_y = F(x, y, u, v, u_x, v_x, u_y).
    pub fn pde_system(trunc: Truncation) -> (SystemSpec, Arc<Chart>) {
        let mut ctx = Context::new(vec!["x".into(), "y".into()], vec!["u".into(), "v".into()]);
        let args = vec![
            Atom::indep(0),
            Atom::indep(1),
            Atom::jet(0, MultiIndex::empty()),
            Atom::jet(1, MultiIndex::empty()),
            Atom::jet(0, mi(&[0])),
            Atom::jet(1, mi(&[0])),
            Atom::jet(0, mi(&[1])),
        ];
        let f = ctx.add_func("F", args).unwrap();
        let rhs = Expr::atom(ctx.func_atom(f));
        let ctx = Arc::new(ctx);
        let spec = SystemSpec::new(
            ctx.clone(),
            vec![Equation {
                dep: 1,
                idx: mi(&[1]),
                rhs,
            }],
        )
        .unwrap();
        let chart = prolong(&spec, trunc).unwrap();
        (spec, chart)
    }

    /// Underdetermined ODE pair u' = F(x,u,v,w,w'), v' = G(x,u,v,w,w') with
    /// dependents u, v, w.
    pub fn ode_system(trunc: Truncation) -> (SystemSpec, Arc<Chart>) {
        let mut ctx = Context::new(
            vec!["x".into()],
            vec!["u".into(), "v".into(), "w".into()],
        );
        let args = vec![
            Atom::indep(0),
            Atom::jet(0, MultiIndex::empty()),
            Atom::jet(1, MultiIndex::empty()),
            Atom::jet(2, MultiIndex::empty()),
            Atom::jet(2, mi(&[0])),
        ];
        let f = ctx.add_func("F", args.clone()).unwrap();
        let g = ctx.add_func("G", args).unwrap();
        let rhs_f = Expr::atom(ctx.func_atom(f));
        let rhs_g = Expr::atom(ctx.func_atom(g));
        let ctx = Arc::new(ctx);
        let spec = SystemSpec::new(
            ctx.clone(),
            vec![
                Equation {
                    dep: 0,
                    idx: mi(&[0]),
                    rhs: rhs_f,
                },
                Equation {
                    dep: 1,
                    idx: mi(&[0]),
                    rhs: rhs_g,
                },
            ],
        )
        .unwrap();
        let chart = prolong(&spec, trunc).unwrap();
        (spec, chart)
    }

    /// The noncontrollable PDE family: v_y = f·u_y + G(y, w) with
    /// f = f(u_x, v_x) implicit through H(f) + u_x·f = v_x and
    /// w = H·x + f·u − v.
    pub fn noncontrollable_system(trunc: Truncation) -> (SystemSpec, Arc<Chart>) {
        let mut ctx = Context::new(vec!["x".into(), "y".into()], vec!["u".into(), "v".into()]);
        let ux = Atom::jet(0, mi(&[0]));
        let vx = Atom::jet(1, mi(&[0]));
        let uy = Atom::jet(0, mi(&[1]));
        let u0 = Atom::jet(0, MultiIndex::empty());
        let v0 = Atom::jet(1, MultiIndex::empty());

        let f_id = ctx.add_func("f", vec![ux.clone(), vx.clone()]).unwrap();
        let f_atom = ctx.func_atom(f_id);
        let h_id = ctx.add_func("H", vec![f_atom.clone()]).unwrap();
        let h_atom = ctx.func_atom(h_id);
        let relation_f = Expr::atom(h_atom.clone())
            .add(&Expr::atom(ux).mul(&Expr::atom(f_atom.clone())))
            .sub(&Expr::atom(vx));
        ctx.set_relation(f_id, relation_f).unwrap();

        let w_id = ctx
            .add_func(
                "W",
                vec![
                    Atom::indep(0),
                    u0.clone(),
                    v0.clone(),
                    f_atom.clone(),
                ],
            )
            .unwrap();
        let w_atom = ctx.func_atom(w_id);
        let relation_w = Expr::atom(w_atom.clone())
            .sub(&Expr::atom(h_atom).mul(&Expr::atom(Atom::indep(0))))
            .sub(&Expr::atom(f_atom.clone()).mul(&Expr::atom(u0)))
            .add(&Expr::atom(v0));
        ctx.set_relation(w_id, relation_w).unwrap();

        let g_id = ctx
            .add_func("G", vec![Atom::indep(1), w_atom])
            .unwrap();

        let rhs = Expr::atom(f_atom)
            .mul(&Expr::atom(uy))
            .add(&Expr::atom(ctx.func_atom(g_id)));
        let ctx = Arc::new(ctx);
        let spec = SystemSpec::new(
            ctx.clone(),
            vec![Equation {
                dep: 1,
                idx: mi(&[1]),
                rhs,
            }],
        )
        .unwrap();
        let chart = prolong(&spec, trunc).unwrap();
        (spec, chart)
    }
}

#[cfg(test)]
mod probe {
    use std::sync::Arc;
    use std::time::Instant;
    use crate::fixtures::{mi, noncontrollable_system};
    use crate::jet::Truncation;
    use crate::form::{contact_form, lie, VectorField, d};

    #[test]
    fn probe_d1_chain() {
        let (_, chart) = noncontrollable_system(Truncation::new(6, 2));
        let fid = chart.ctx.func_by_name("f").unwrap();
        let uy = crate::atom::Atom::jet(0, mi(&[1]));
        let gid = chart.ctx.func_by_name("G").unwrap();
        let mut e = crate::expr::Expr::atom(chart.ctx.func_atom(fid))
            .mul(&crate::expr::Expr::atom(uy))
            .add(&crate::expr::Expr::atom(chart.ctx.func_atom(gid)));
        for r in 1..=6 {
            let t = Instant::now();
            e = chart.total_derivative(0, &e).unwrap();
            eprintln!("D1^{r} F: {:?}, num {} den {} atoms {}", t.elapsed(),
                e.num().terms().len(), e.den().terms().len(), e.atoms().len());
        }
    }

    #[test]
    fn probe_noncontrollable_costs() {
        let t0 = Instant::now();
        let (_, chart) = noncontrollable_system(Truncation::new(3, 2));
        eprintln!("chart: {:?}", t0.elapsed());
        let d1 = VectorField::TotalDerivative(0);
        let d2 = VectorField::TotalDerivative(1);
        for r in 0..=3 {
            let t = Instant::now();
            let b = contact_form(&chart, 1, &mi(&vec![0; r])).unwrap();
            eprintln!("beta_{r} contact: {:?}, covs {}", t.elapsed(), b.coeffs.len());
            let t = Instant::now();
            let lb = lie(&chart, &d2, &b).unwrap();
            eprintln!("lie(D2, beta_{r}): {:?}, covs {}, num terms {:?}", t.elapsed(), lb.coeffs.len(),
                lb.coeffs.values().map(|e| e.num().terms().len()).max());
        }
        let t = Instant::now();
        let a = contact_form(&chart, 0, &mi(&[0,0,0])).unwrap();
        let la = lie(&chart, &d2, &a).unwrap();
        eprintln!("lie(D2, alpha_30): {:?} covs {}", t.elapsed(), la.coeffs.len());
        let t = Instant::now();
        let fid = chart.ctx.func_by_name("f").unwrap();
        let f = crate::expr::Expr::atom(chart.ctx.func_atom(fid));
        let mut gamma = contact_form(&chart, 1, &mi(&[])).unwrap()
            .sub(&contact_form(&chart, 0, &mi(&[])).unwrap().scale(&f));
        for r in 0..3 {
            let tt = Instant::now();
            gamma = lie(&chart, &d1, &gamma).unwrap();
            eprintln!("gamma_{}: {:?}", r+1, tt.elapsed());
        }
        eprintln!("gammas total: {:?}", t.elapsed());
        let t = Instant::now();
        let dg = d(&chart, &gamma).unwrap();
        eprintln!("d(gamma_3): {:?}, wedges {}", t.elapsed(), dg.coeffs.len());
    }
}
