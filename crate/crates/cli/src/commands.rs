use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::Serialize;
use serde_json::Value;

use subharm_core::constructions::{
    fundlem_sequence, lemma_n_laminate, moment_recursions, staircase_schedule, verify_lemma_n,
    MomentTable,
};
use subharm_core::integrand::IntegrandRegistry;
use subharm_core::interval::Interval;
use subharm_core::laminate::Laminate;
use subharm_core::obstacle::{self, Grid, ObstacleInstance, SolveOptions};
use subharm_core::scalar::{parse_rational, Rational, Scalar};
use subharm_core::synth::template::Rect;
use subharm_core::synth::{realize_laminate, staircase_build, SynthConfig};
use subharm_core::verifier::{self, neg_part_lq, realization_report, verify_staircase};
use subharm_core::wavecone::{agreement_suite, lattice_invariants};

use crate::experiment::{Context, Experiment, Outcome, RunError};

fn config_of<T: Serialize>(name: &str, args: &T) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    if let Value::Object(m) = &mut v {
        m.insert("command".into(), Value::String(name.into()));
    }
    v
}

fn unit_square() -> Rect {
    Rect::new([0.0, 0.0], [1.0, 1.0])
}

fn e17(x: f64) -> String {
    format!("{x:.17e}")
}

fn iv(x: Interval) -> String {
    format!("{},{}", e17(x.lo()), e17(x.hi()))
}

/// Either an exact rational `2^p` or a certified enclosure of `2^p`.
#[derive(Clone, Copy)]
enum Base {
    Exact,
    Certified,
}

fn base_of(p: f64, two_p: &Option<String>) -> Result<(Base, Option<Rational>), RunError> {
    match two_p {
        Some(s) => {
            let r = parse_rational(s).ok_or_else(|| {
                RunError::Validation(format!("cannot parse 2^p = '{s}' as a rational"))
            })?;
            if r.to_f64() <= 2.0 {
                return Err(RunError::Validation(format!("2^p = {s} must exceed 2")));
            }
            Ok((Base::Exact, Some(r)))
        }
        None => {
            if !(p > 1.0 && p.is_finite()) {
                return Err(RunError::Validation(format!("p = {p} must exceed 1")));
            }
            Ok((Base::Certified, None))
        }
    }
}

fn check_q(q: &[f64], hi_open: bool) -> Result<(), RunError> {
    for &x in q {
        let ok = if hi_open {
            (1.0..2.0).contains(&x)
        } else {
            x >= 1.0 && x.is_finite()
        };
        if !ok {
            return Err(RunError::Validation(format!("q = {x} outside [1, 2)")));
        }
    }
    if q.is_empty() {
        return Err(RunError::Validation("at least one q is required".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- laminate

#[derive(Args, Clone, Debug, Serialize)]
pub struct LaminateArgs {
    /// Exponent p > 1 (certified-interval mode).
    #[arg(long, default_value_t = 1.5)]
    pub p: f64,
    /// Exact rational 2^p (switches to rational mode, overrides --p).
    #[arg(long)]
    pub two_p: Option<String>,
    /// Barycenter scale k of the single-step laminate.
    #[arg(long, default_value_t = 1)]
    pub k: i64,
    #[arg(long, default_value_t = 8)]
    pub m: u32,
    #[arg(long, default_value_t = 1.5)]
    pub q: f64,
}

pub struct LaminateExp(pub LaminateArgs);

impl LaminateExp {
    fn run_with<S: Scalar>(
        &self,
        two_p: S,
        ctx: &mut Context,
        extra: impl FnOnce(&MomentTable<S>, &mut Context) -> Result<(), RunError>,
    ) -> Result<Outcome, RunError> {
        let a = &self.0;
        let k = S::from_i64(a.k);
        let report = ctx.timed("lemma", || verify_lemma_n(two_p.clone(), k, a.q))?;
        let table = ctx.timed("moments", || moment_recursions(two_p, a.q, a.m))?;
        let mut items = String::from("item,status,detail\n");
        for it in &report.items {
            let _ = writeln!(
                items,
                "{},{:?},\"{}\"",
                it.item,
                it.status,
                it.detail.replace('"', "'")
            );
        }
        let mut consts = String::from("name,lo,hi\n");
        for (n, v) in [("C", report.big_c), ("c1", report.c1), ("c2", report.c2)] {
            let _ = writeln!(consts, "{n},{}", iv(v));
        }
        ctx.write("lemma_items.csv", &items)?;
        ctx.write("constants.csv", &consts)?;
        ctx.write("moments.csv", &table.to_csv())?;
        ctx.write_json("lemma_report.json", &report)?;
        extra(&table, ctx)?;
        let mut o = Outcome::default();
        o.check("lemma items", report.ok());
        o.check("moments match closed forms", table.agree());
        Ok(o)
    }
}

impl Experiment for LaminateExp {
    fn name(&self) -> &'static str {
        "laminate"
    }

    fn config(&self) -> Value {
        config_of(self.name(), &self.0)
    }

    fn validate(&self) -> Result<(), RunError> {
        base_of(self.0.p, &self.0.two_p)?;
        check_q(&[self.0.q], true)?;
        if self.0.k < 1 {
            return Err(RunError::Validation(format!(
                "k = {} must be positive",
                self.0.k
            )));
        }
        if self.0.m > 40 {
            return Err(RunError::Validation(format!("m = {} exceeds 40", self.0.m)));
        }
        Ok(())
    }

    fn run(&self, ctx: &mut Context) -> Result<Outcome, RunError> {
        match base_of(self.0.p, &self.0.two_p)? {
            (Base::Exact, Some(r)) => self.run_with(r, ctx, |t, ctx| {
                let mut s = String::from("m,a\n");
                for row in &t.rows {
                    let _ = writeln!(s, "{},{}", row.m, row.a_direct);
                }
                ctx.write("moments_exact.csv", &s)
            }),
            _ => self.run_with(Interval::two_pow(self.0.p), ctx, |_, _| Ok(())),
        }
    }
}

// ----------------------------------------------------------------- realize

#[derive(Args, Clone, Debug, Serialize)]
pub struct RealizeArgs {
    #[arg(long, default_value_t = 1.5)]
    pub p: f64,
    #[arg(long)]
    pub two_p: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub k: i64,
    /// 0 realizes the single-step laminate; m ≥ 1 the m-stage sequence.
    #[arg(long, default_value_t = 0)]
    pub m: u32,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Hessian tolerance relative to the matrix size.
    #[arg(long)]
    pub relative: bool,
    /// Exponents for the negative-part functionals.
    #[arg(long, default_values_t = vec![1.5])]
    pub q: Vec<f64>,
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: usize,
    /// Write the flat cell dump.
    #[arg(long)]
    pub emit_cells: bool,
    #[arg(long, default_value_t = 2_000_000)]
    pub cell_limit: usize,
}

pub struct RealizeExp(pub RealizeArgs);

impl RealizeExp {
    fn run_with<S: Scalar>(&self, two_p: S, ctx: &mut Context) -> Result<Outcome, RunError> {
        let a = &self.0;
        let nu: Laminate<S> = if a.m == 0 {
            lemma_n_laminate(two_p, S::from_i64(a.k))?
        } else {
            fundlem_sequence(two_p, a.m)?
        };
        let mut cfg = if a.relative {
            SynthConfig::relative(a.eps)
        } else {
            SynthConfig::new(a.eps)
        };
        cfg.budget = a.budget;
        let (u, tree) = ctx.timed("synthesize", || realize_laminate(&nu, unit_square(), &cfg))?;
        let reg = IntegrandRegistry::builtin();
        let mut phis = reg.all_with(a.q[0]);
        for &q in &a.q[1..] {
            phis.push(
                reg.resolve("neg11", Some(q))
                    .map_err(|e| RunError::Validation(e.to_string()))?,
            );
            phis.push(
                reg.resolve("neg22", Some(q))
                    .map_err(|e| RunError::Validation(e.to_string()))?,
            );
        }
        let mut report = ctx.timed("verify", || {
            realization_report(&u, &tree, &nu, a.eps, &phis)
        })?;
        let grad: f64 = verifier::level_sup_distance(&u).values().sum();
        report.push(
            "gradient_deviation",
            "Omega",
            None,
            None,
            Interval::point(grad),
            None,
        );
        for &q in &a.q {
            for i in [1, 2] {
                let v = neg_part_lq(&u, i, q)?;
                report.push(
                    &format!("neg_part_l{i}{i}"),
                    "Omega",
                    None,
                    Some(q),
                    v,
                    None,
                );
            }
        }
        ctx.write("report.csv", &report.to_csv())?;
        if a.emit_cells {
            let dump = ctx.timed("dump", || u.dump_csv(a.cell_limit))?;
            ctx.write("cells.csv", &dump)?;
        }
        let mut o = Outcome::default();
        o.check("realization report", report.passed());
        Ok(o)
    }
}

impl Experiment for RealizeExp {
    fn name(&self) -> &'static str {
        "realize"
    }

    fn config(&self) -> Value {
        config_of(self.name(), &self.0)
    }

    fn validate(&self) -> Result<(), RunError> {
        let a = &self.0;
        base_of(a.p, &a.two_p)?;
        check_q(&a.q, true)?;
        if !(a.eps > 0.0 && a.eps < 1.0) {
            return Err(RunError::Validation(format!(
                "eps = {} outside (0, 1)",
                a.eps
            )));
        }
        if a.k < 1 {
            return Err(RunError::Validation(format!(
                "k = {} must be positive",
                a.k
            )));
        }
        Ok(())
    }

    fn run(&self, ctx: &mut Context) -> Result<Outcome, RunError> {
        match base_of(self.0.p, &self.0.two_p)? {
            (Base::Exact, Some(r)) => self.run_with(r, ctx),
            _ => self.run_with(Interval::two_pow(self.0.p), ctx),
        }
    }
}

// --------------------------------------------------------------- staircase

#[derive(Args, Clone, Debug, Serialize)]
pub struct StaircaseArgs {
    /// Depth J.
    #[arg(long = "J", short = 'J', default_value_t = 4)]
    #[serde(rename = "J")]
    pub depth: u32,
    #[arg(long, default_values_t = vec![1.5])]
    pub q: Vec<f64>,
    /// Diagonal entry of the negative-part functional.
    #[arg(long, default_value_t = 2)]
    pub i: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: usize,
    #[arg(long)]
    pub emit_cells: bool,
    #[arg(long, default_value_t = 2_000_000)]
    pub cell_limit: usize,
}

pub struct StaircaseExp(pub StaircaseArgs);

impl Experiment for StaircaseExp {
    fn name(&self) -> &'static str {
        "staircase"
    }

    fn config(&self) -> Value {
        config_of(self.name(), &self.0)
    }

    fn validate(&self) -> Result<(), RunError> {
        let a = &self.0;
        if !(1..=8).contains(&a.depth) {
            return Err(RunError::Validation(format!(
                "J = {} outside 1..=8",
                a.depth
            )));
        }
        if !(1..=2).contains(&a.i) {
            return Err(RunError::Validation(format!("i = {} must be 1 or 2", a.i)));
        }
        if !(a.eps > 0.0 && a.eps < 1.0) {
            return Err(RunError::Validation(format!(
                "eps = {} outside (0, 1)",
                a.eps
            )));
        }
        check_q(&a.q, true)
    }

    fn run(&self, ctx: &mut Context) -> Result<Outcome, RunError> {
        let a = &self.0;
        let mut cfg = SynthConfig::relative(a.eps);
        cfg.budget = a.budget;
        let schedule = staircase_schedule(a.depth);
        let st = ctx.timed("synthesize", || {
            staircase_build(&schedule, unit_square(), &cfg)
        })?;
        let rep = ctx.timed("verify", || verify_staircase(&schedule, &st))?;
        let table = ctx.timed("divergence", || {
            verifier::lp_divergence_table(a.depth, &a.q, a.i, unit_square(), &cfg)
        })?;

        let mut levels = String::from(
            "j,p_lo,p_hi,sup_distance,sup_bound,measure_lo,measure_hi,product_lo,product_hi,step_ok,cumulative_ok,l1_lo,l1_hi,l1_bound,l1_cumulative_hi\n",
        );
        let mut cum = 0.0;
        for l in &rep.levels {
            cum += l.l1.hi();
            let p = schedule.layer(l.j).p;
            let _ = writeln!(
                levels,
                "{},{},{},{},{},{},{},{},{},{},{}",
                l.j,
                iv(p),
                e17(l.sup_distance),
                e17(l.sup_bound),
                iv(l.measure),
                iv(l.product),
                l.step_ok,
                l.cumulative_ok,
                iv(l.l1),
                e17(l.l1_bound),
                e17(cum)
            );
        }
        let mut summary = String::from("quantity,lo,hi\n");
        let _ = writeln!(summary, "golden,{},{}", e17(rep.golden), e17(rep.golden));
        let _ = writeln!(
            summary,
            "min_trace,{},{}",
            e17(rep.min_trace),
            e17(f64::INFINITY)
        );
        let _ = writeln!(summary, "hessian_l1,{}", iv(rep.hessian_l1));
        ctx.write("levels.csv", &levels)?;
        ctx.write("summary.csv", &summary)?;
        ctx.write("divergence.csv", &table.to_csv())?;
        if a.emit_cells {
            let dump = ctx.timed("dump", || st.u.dump_csv(a.cell_limit))?;
            ctx.write("cells.csv", &dump)?;
        }

        let mut o = Outcome::default();
        o.check("level sup-distance", rep.sup_ok());
        o.check("region measures", rep.measures_ok());
        o.check("level Hessian mass", rep.l1_ok());
        o.check("subharmonic", rep.min_trace >= 0.0);
        for &q in &a.q {
            let vals = table.values(q);
            let growing = vals
                .windows(2)
                .skip(1)
                .all(|w| w[1].value.lo() > w[0].value.hi());
            o.check(&format!("q={q} values increase over J>=2"), growing);
        }
        Ok(o)
    }
}

// ---------------------------------------------------------------- wavecone

#[derive(Args, Clone, Debug, Serialize)]
pub struct WaveconeArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Simplex grid resolution of the brute-force search.
    #[arg(long, default_value_t = 8)]
    pub resolution: usize,
}

pub struct WaveconeExp(pub WaveconeArgs);

impl Experiment for WaveconeExp {
    fn name(&self) -> &'static str {
        "wavecone"
    }

    fn config(&self) -> Value {
        config_of(self.name(), &self.0)
    }

    fn validate(&self) -> Result<(), RunError> {
        let a = &self.0;
        if !(2..=4).contains(&a.n) {
            return Err(RunError::Validation(format!("n = {} outside 2..=4", a.n)));
        }
        if a.trials == 0 {
            return Err(RunError::Validation("trials must be positive".into()));
        }
        if a.resolution < 8 {
            return Err(RunError::Validation(format!(
                "resolution = {} below 8",
                a.resolution
            )));
        }
        Ok(())
    }

    fn run(&self, ctx: &mut Context) -> Result<Outcome, RunError> {
        let a = &self.0;
        let report = ctx.timed("agreement", || {
            agreement_suite(a.n, a.trials, a.seed, a.resolution)
        });
        let lattice = ctx.timed("lattice", || lattice_invariants(a.n));
        ctx.write("wavecone.csv", &report.to_csv())?;
        let mut lat = String::from("n,checked,failures\n");
        let _ = writeln!(
            lat,
            "{},{},{}",
            lattice.n,
            lattice.checked,
            lattice.failures.len()
        );
        ctx.write("lattice.csv", &lat)?;
        let mut o = Outcome::default();
        o.check(
            &format!("agreement {}/{}", report.agree, report.trials),
            report.all_agree(),
        );
        o.check("lattice invariants", lattice.failures.is_empty());
        Ok(o)
    }
}

// ---------------------------------------------------------------- obstacle

#[derive(Args, Clone, Debug, Serialize)]
pub struct ObstacleArgs {
    #[command(subcommand)]
    pub action: ObstacleAction,
}

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum ObstacleAction {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Check that `−u_J` is its own solution.
    Proplip(PropLipArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 129)]
    pub n: usize,
    #[arg(long, default_value_t = 1.8)]
    pub omega: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
    #[arg(long, default_value = "red-black")]
    pub order: String,
    /// `builtin:radial`, `builtin:concave`, `builtin:convex`, or a CSV file
    /// `x,y,value` of an n×n grid on the unit square (boundary datum = obstacle).
    #[arg(long, default_value = "builtin:radial")]
    pub obstacle: String,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct PropLipArgs {
    #[arg(long, default_value_t = 3)]
    pub staircase_depth: u32,
    #[arg(long, default_value_t = 257)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.8)]
    pub omega: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Grids for the positive-part Hessian refinement table (empty: skip).
    #[arg(long, num_args = 0..)]
    pub hessian_plus_n: Vec<usize>,
    #[arg(long, default_values_t = vec![1.0, 1.5, 2.0])]
    pub hessian_plus_p: Vec<f64>,
}

pub struct ObstacleExp(pub ObstacleArgs);

fn load_grid_csv(path: &str, n: usize) -> Result<Vec<f64>, RunError> {
    let text = std::fs::read_to_string(PathBuf::from(path))
        .map_err(|e| RunError::Validation(format!("{path}: {e}")))?;
    let vals: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| RunError::Validation(format!("{path}: bad row '{l}'")))
        })
        .collect::<Result<_, _>>()?;
    if vals.len() != n * n {
        return Err(RunError::Validation(format!(
            "{path}: {} values, expected n² = {}",
            vals.len(),
            n * n
        )));
    }
    Ok(vals)
}

impl ObstacleExp {
    fn solve(&self, a: &SolveArgs, ctx: &mut Context) -> Result<Outcome, RunError> {
        let opts = SolveOptions {
            omega: a.omega,
            tol: a.tol,
            max_iter: a.max_iter,
            order: a.order.clone(),
            ..Default::default()
        };
        let mut o = Outcome::default();
        let (inst, exact) = match a.obstacle.as_str() {
            "builtin:radial" => {
                let r0 = obstacle::radial_contact_radius(20_000);
                (obstacle::radial_instance(a.n, r0)?, Some(r0))
            }
            "builtin:concave" => {
                let phi = |x: [f64; 2]| -0.5 * (x[0] * x[0] + x[1] * x[1]);
                (
                    ObstacleInstance::from_fns(Grid::square(a.n, -1.0, 1.0)?, phi, phi)?,
                    None,
                )
            }
            "builtin:convex" => {
                let phi = |x: [f64; 2]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
                (
                    ObstacleInstance::from_fns(Grid::square(a.n, -1.0, 1.0)?, phi, phi)?,
                    None,
                )
            }
            b if b.starts_with("builtin:") => {
                return Err(RunError::Validation(format!(
                    "unknown builtin obstacle '{b}'"
                )))
            }
            path => {
                let phi = load_grid_csv(path, a.n)?;
                (
                    ObstacleInstance::new(Grid::square(a.n, 0.0, 1.0)?, phi.clone(), phi)?,
                    None,
                )
            }
        };
        let sol = ctx.timed("solve", || obstacle::solve(&inst, &opts))?;
        ctx.write("obstacle.csv", &obstacle::grid_csv(&inst.grid, &inst.phi))?;
        ctx.write("solution.csv", &obstacle::grid_csv(&inst.grid, &sol.u))?;
        let mut s = String::from("quantity,value\n");
        let r = sol.residuals;
        for (k, v) in [
            ("laplacian", r.laplacian),
            ("constraint", r.constraint),
            ("complementarity", r.complementarity),
        ] {
            let _ = writeln!(s, "residual_{k},{}", e17(v));
        }
        let _ = writeln!(s, "iterations,{}", sol.iterations);
        let _ = writeln!(s, "contact_nodes,{}", sol.contact_count(&inst, a.tol));
        let gap = (0..inst.grid.len())
            .filter(|&k| inst.grid.kind[k] == obstacle::NodeKind::Interior)
            .map(|k| sol.u[k] - inst.phi[k])
            .fold(0.0, f64::max);
        let _ = writeln!(s, "max_gap,{}", e17(gap));
        if let Some(r0) = exact {
            let err = (0..inst.grid.len())
                .filter(|&k| inst.grid.kind[k] == obstacle::NodeKind::Interior)
                .map(|k| (sol.u[k] - obstacle::radial_solution(r0, inst.grid.point(k))).abs())
                .fold(0.0, f64::max);
            let _ = writeln!(s, "contact_radius,{}", e17(r0));
            let _ = writeln!(s, "max_error,{}", e17(err));
        }
        ctx.write("summary.csv", &s)?;
        o.check("converged", sol.converged);
        o.check("energy non-increasing", sol.energy_monotone);
        Ok(o)
    }

    fn proplip(&self, a: &PropLipArgs, ctx: &mut Context) -> Result<Outcome, RunError> {
        let opts = SolveOptions {
            omega: a.omega,
            tol: a.tol,
            ..Default::default()
        };
        let schedule = staircase_schedule(a.staircase_depth);
        let st = ctx.timed("synthesize", || {
            staircase_build(&schedule, unit_square(), &SynthConfig::relative(a.eps))
        })?;
        let r = ctx.timed("solve", || obstacle::prop_lip_check(&st.u, a.n, &opts))?;
        let mut s = String::from(
            "n,h,deviation,constant,contact_fraction,iterations,converged,obstacle_defect\n",
        );
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.n,
            e17(r.h),
            e17(r.deviation),
            e17(r.constant),
            e17(r.contact_fraction),
            r.iterations,
            r.converged,
            e17(r.obstacle_defect)
        );
        ctx.write("proplip.csv", &s)?;
        if !a.hessian_plus_n.is_empty() {
            let rows = ctx.timed("hessian_plus", || {
                obstacle::hessian_plus_diagnostics(
                    &st.u,
                    &a.hessian_plus_n,
                    &a.hessian_plus_p,
                    &opts,
                )
            })?;
            let mut t = String::from("n,p,value\n");
            for row in &rows {
                for (p, v) in &row.norms {
                    let _ = writeln!(t, "{},{p},{}", row.n, e17(*v));
                }
            }
            ctx.write("hessian_plus.csv", &t)?;
        }
        let mut o = Outcome::default();
        o.check("converged", r.converged);
        Ok(o)
    }
}

impl Experiment for ObstacleExp {
    fn name(&self) -> &'static str {
        "obstacle"
    }

    fn config(&self) -> Value {
        config_of(self.name(), &self.0.action)
    }

    fn validate(&self) -> Result<(), RunError> {
        let (n, omega, tol) = match &self.0.action {
            ObstacleAction::Solve(a) => {
                obstacle::sweep_order(&a.order)?;
                (a.n, a.omega, a.tol)
            }
            ObstacleAction::Proplip(a) => {
                if !(1..=6).contains(&a.staircase_depth) {
                    return Err(RunError::Validation(format!(
                        "staircase depth {} outside 1..=6",
                        a.staircase_depth
                    )));
                }
                if a.hessian_plus_n.iter().any(|&m| m < 8) {
                    return Err(RunError::Validation(
                        "hessian-plus grids need at least 8 nodes".into(),
                    ));
                }
                (a.n, a.omega, a.tol)
            }
        };
        if n < 8 {
            return Err(RunError::Validation(format!("n = {n} below 8")));
        }
        if !(omega > 0.0 && omega < 2.0) {
            return Err(RunError::Validation(format!(
                "omega = {omega} outside (0, 2)"
            )));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(RunError::Validation(format!(
                "tol = {tol} must be positive"
            )));
        }
        Ok(())
    }

    fn run(&self, ctx: &mut Context) -> Result<Outcome, RunError> {
        match &self.0.action {
            ObstacleAction::Solve(a) => self.solve(a, ctx),
            ObstacleAction::Proplip(a) => self.proplip(a, ctx),
        }
    }
}
