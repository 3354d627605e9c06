//! Fixed-step integration of dynamical systems.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diagram::{SumVariableId, VariableId};
use crate::expr::{EvalError, Params};
use crate::full::FullStockFlow;
use crate::open::Diagram;
use crate::semantics::{DynamicalSystem, SemanticsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub initial: BTreeMap<String, f64>,
    pub params: Params,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub method: Method,
    /// Keep every k-th step (the final state is always kept).
    pub save_every: usize,
}

impl Scenario {
    pub fn new(initial: BTreeMap<String, f64>, params: Params, t1: f64, dt: f64) -> Self {
        Scenario {
            initial,
            params,
            t0: 0.0,
            t1,
            dt,
            method: Method::Rk4,
            save_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.states.iter().map(|s| s[k]).collect())
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no initial value for stock `{0}`")]
    MissingInitial(String),
    #[error("initial value given for unknown stock `{0}`")]
    UnknownStock(String),
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("non-finite value {value} in stock `{stock}` at step {step} (t = {t})")]
    NonFiniteState { step: usize, t: f64, stock: String, value: f64 },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("trajectory does not match the diagram: {0}")]
    DiagramMismatch(String),
}

fn check_scenario(system: &DynamicalSystem, sc: &Scenario) -> Result<Vec<f64>, SimulateError> {
    let bad = |m: &str| Err(SimulateError::InvalidScenario(m.into()));
    if !(sc.t0.is_finite() && sc.t1.is_finite() && sc.dt.is_finite()) {
        return bad("times must be finite");
    }
    if sc.t1 <= sc.t0 {
        return bad("t1 must exceed t0");
    }
    if sc.dt <= 0.0 {
        return bad("dt must be positive");
    }
    if sc.dt > sc.t1 - sc.t0 {
        return bad("dt exceeds the time span");
    }
    if sc.save_every == 0 {
        return bad("save_every must be at least 1");
    }
    if let Some(name) = sc.initial.keys().find(|k| !system.stocks().contains(k)) {
        return Err(SimulateError::UnknownStock(name.clone()));
    }
    if let Some(p) = system.params().iter().find(|p| !sc.params.contains_key(*p)) {
        return Err(SimulateError::UnboundParameter(p.clone()));
    }
    system
        .stocks()
        .iter()
        .map(|s| sc.initial.get(s).copied().ok_or_else(|| SimulateError::MissingInitial(s.clone())))
        .collect()
}

fn lift(e: SemanticsError) -> SimulateError {
    match e {
        SemanticsError::Eval { source: EvalError::UnknownParameter(p), .. } => SimulateError::UnboundParameter(p),
        other => other.into(),
    }
}

/// `x += inc` with Kahan compensation, so rounding does not accumulate
/// over many small increments.
fn compensated_add(x: &mut f64, carry: &mut f64, inc: f64) {
    let y = inc - *carry;
    let t = *x + y;
    *carry = (t - *x) - y;
    *x = t;
}

struct Stepper<'a> {
    system: &'a DynamicalSystem,
    params: &'a Params,
    method: Method,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    /// Kahan compensation for each state entry, carried across steps.
    carry: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(system: &'a DynamicalSystem, params: &'a Params, method: Method) -> Self {
        let n = system.dim();
        Stepper {
            system,
            params,
            method,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            carry: vec![0.0; n],
        }
    }

    fn f(&mut self, x_from_tmp: bool, stage: usize, x: &[f64]) -> Result<(), SimulateError> {
        let input = if x_from_tmp { &self.tmp } else { x };
        self.system.eval_into(input, self.params, &mut self.k[stage]).map_err(lift)
    }

    fn step(&mut self, x: &mut [f64], h: f64) -> Result<(), SimulateError> {
        match self.method {
            Method::Euler => {
                self.f(false, 0, x)?;
                for ((xi, ci), ki) in x.iter_mut().zip(&mut self.carry).zip(&self.k[0]) {
                    compensated_add(xi, ci, h * ki);
                }
            }
            Method::Rk4 => {
                self.f(false, 0, x)?;
                for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k[0]) {
                    *t = xi + 0.5 * h * ki;
                }
                self.f(true, 1, x)?;
                for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k[1]) {
                    *t = xi + 0.5 * h * ki;
                }
                self.f(true, 2, x)?;
                for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k[2]) {
                    *t = xi + h * ki;
                }
                self.f(true, 3, x)?;
                let k = &self.k;
                for (i, (xi, ci)) in x.iter_mut().zip(&mut self.carry).enumerate() {
                    compensated_add(xi, ci, h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]));
                }
            }
        }
        Ok(())
    }
}

/// Integrates `system` from `t0` to `t1`. Step `k` lands on `t0 + k·dt`;
/// the last step is shortened to land exactly on `t1`.
pub fn simulate(system: &DynamicalSystem, sc: &Scenario) -> Result<Trajectory, SimulateError> {
    let mut x = check_scenario(system, sc)?;
    let mut stepper = Stepper::new(system, &sc.params, sc.method);
    let mut traj = Trajectory {
        columns: system.stocks().to_vec(),
        times: vec![sc.t0],
        states: vec![x.clone()],
    };
    let span = sc.t1 - sc.t0;
    let steps = {
        let n = (span / sc.dt).ceil() as usize;
        // avoid a sliver step caused by rounding in span / dt
        if n > 1 && sc.t0 + (n - 1) as f64 * sc.dt >= sc.t1 - 1e-12 * span {
            n - 1
        } else {
            n
        }
    };
    let mut t = sc.t0;
    for k in 1..=steps {
        let next = if k == steps { sc.t1 } else { sc.t0 + k as f64 * sc.dt };
        stepper.step(&mut x, next - t)?;
        t = next;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(SimulateError::NonFiniteState {
                step: k,
                t,
                stock: system.stocks()[i].clone(),
                value: x[i],
            });
        }
        if k % sc.save_every == 0 || k == steps {
            traj.times.push(t);
            traj.states.push(x.clone());
        }
    }
    Ok(traj)
}

/// Appends a column per sum variable and auxiliary variable of a full
/// diagram, evaluated at every saved state. Simple diagrams add nothing.
pub fn observe(diagram: &Diagram, traj: &Trajectory, params: &Params) -> Result<Trajectory, SimulateError> {
    let stocks = diagram.stock_names();
    if stocks.len() != traj.columns.len() || stocks.iter().zip(&traj.columns).any(|(a, b)| a != b) {
        return Err(SimulateError::DiagramMismatch(format!(
            "columns [{}] differ from stocks [{}]",
            traj.columns.join(", "),
            stocks.join(", ")
        )));
    }
    let Diagram::Full(d) = diagram else {
        return Ok(traj.clone());
    };
    let mut out = traj.clone();
    out.columns.extend(d.sum_variables.iter().map(|s| s.name.clone()));
    out.columns.extend(d.variables.iter().map(|v| v.name.clone()));
    for row in &mut out.states {
        let extra = observe_state(d, row, params)?;
        row.extend(extra);
    }
    Ok(out)
}

/// Sum-variable values followed by auxiliary-variable values at one state.
pub fn observe_state(d: &FullStockFlow, x: &[f64], params: &Params) -> Result<Vec<f64>, SimulateError> {
    let sums: Vec<f64> = (0..d.sum_variables.len())
        .map(|s| d.summands(SumVariableId(s)).iter().fold(0.0, |acc, st| acc + x[st.0]))
        .collect();
    let mut out = sums.clone();
    for (v, var) in d.variables.iter().enumerate() {
        let links: Vec<f64> = d.link_sources(VariableId(v)).iter().map(|s| x[s.0]).collect();
        let svs: Vec<f64> = d.sum_var_sources(VariableId(v)).iter().map(|s| sums[s.0]).collect();
        let value = d.aux_fn[v].eval(&links, &svs, params).map_err(|source| match source {
            EvalError::UnknownParameter(p) => SimulateError::UnboundParameter(p),
            source => SimulateError::Semantics(SemanticsError::Eval {
                context: format!("variable `{}`", var.name),
                source,
            }),
        })?;
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> DynamicalSystem {
        DynamicalSystem::from_fn(vec!["x".into()], |x, _, out| {
            out[0] = -x[0];
            Ok(())
        })
    }

    fn scenario(method: Method, dt: f64) -> Scenario {
        Scenario {
            method,
            ..Scenario::new(BTreeMap::from([("x".into(), 1.0)]), Params::new(), 1.0, dt)
        }
    }

    fn error(method: Method, dt: f64) -> f64 {
        let t = simulate(&decay(), &scenario(method, dt)).unwrap();
        (t.last().unwrap()[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn rk4_decay() {
        let t = simulate(&decay(), &scenario(Method::Rk4, 0.01)).unwrap();
        assert_eq!(t.len(), 101);
        assert_eq!(*t.times.last().unwrap(), 1.0);
        assert!((t.last().unwrap()[0] - 0.3678794).abs() < 1e-6);
    }

    #[test]
    fn orders() {
        for (method, lo, hi) in [(Method::Rk4, 14.0, 18.0), (Method::Euler, 1.8, 2.2)] {
            let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| error(method, dt)).collect();
            for w in e.windows(2) {
                let r = w[0] / w[1];
                assert!((lo..=hi).contains(&r), "{method:?}: {r}");
            }
        }
    }

    #[test]
    fn final_step_shortened() {
        let t = simulate(&decay(), &scenario(Method::Euler, 0.3)).unwrap();
        assert_eq!(t.times.len(), 5);
        assert_eq!(*t.times.last().unwrap(), 1.0);
        assert!((t.times[3] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_field_is_constant() {
        let sys = DynamicalSystem::zero(vec!["x".into(), "y".into()]);
        let sc = Scenario::new(BTreeMap::from([("x".into(), 3.5), ("y".into(), -1.0)]), Params::new(), 2.0, 0.1);
        let t = simulate(&sys, &sc).unwrap();
        assert!(t.states.iter().all(|s| s == &vec![3.5, -1.0]));
    }

    #[test]
    fn save_every_thins() {
        let mut sc = scenario(Method::Rk4, 0.1);
        sc.save_every = 3;
        let t = simulate(&decay(), &sc).unwrap();
        assert_eq!(t.times.len(), 5); // t0, steps 3, 6, 9, and 10
        assert_eq!(*t.times.last().unwrap(), 1.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = DynamicalSystem::from_fn(vec!["x".into()], |x, _, out| {
            out[0] = x[0] * x[0] * 1e200;
            Ok(())
        });
        let sc = Scenario::new(BTreeMap::from([("x".into(), 1e200)]), Params::new(), 1.0, 0.5);
        assert!(matches!(simulate(&sys, &sc), Err(SimulateError::NonFiniteState { step: 1, .. })));
    }

    #[test]
    fn scenario_checks() {
        let mut sc = scenario(Method::Rk4, 0.1);
        sc.t1 = 0.0;
        assert!(matches!(simulate(&decay(), &sc), Err(SimulateError::InvalidScenario(_))));
        let sc = Scenario::new(BTreeMap::new(), Params::new(), 1.0, 0.1);
        assert_eq!(simulate(&decay(), &sc), Err(SimulateError::MissingInitial("x".into())));
    }

    #[test]
    fn deterministic() {
        let a = simulate(&decay(), &scenario(Method::Rk4, 0.013)).unwrap();
        let b = simulate(&decay(), &scenario(Method::Rk4, 0.013)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sir_total_is_conserved_along_trajectory() {
        let d = crate::models::sir_simple();
        let sc = crate::models::reference_scenario("sir_simple").unwrap();
        let traj = simulate(&crate::vector_field(&d), &sc).unwrap();
        let total: f64 = traj.states[0].iter().sum();
        for x in &traj.states {
            assert!((x.iter().sum::<f64>() - total).abs() <= 1e-9);
        }
    }
}
