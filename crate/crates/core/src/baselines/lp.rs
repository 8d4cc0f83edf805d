//! Dense two-phase simplex and the charging LP built on it.
//!
//! Problems here have at most a few dozen variables, so the solver keeps a
//! full tableau and uses Bland's rule throughout. Among optimal vertices it
//! returns the lexicographically smallest one by re-optimizing each variable in
//! turn over the optimal face.

use crate::env::EvEnvConfig;
use crate::error::{Error, Result};

const TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

/// `min c.x` subject to the constraints and `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.cols + c]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let p = self.at(r, c);
        for j in 0..cols {
            self.a[r * cols + j] /= p;
        }
        self.b[r] /= p;
        self.a[r * cols + c] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f == 0.0 {
                continue;
            }
            for j in 0..cols {
                self.a[i * cols + j] -= f * self.a[r * cols + j];
            }
            self.a[i * cols + c] = 0.0;
            self.b[i] -= f * self.b[r];
            if self.b[i].abs() < TOL {
                self.b[i] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.at(i, j);
                }
            }
        }
        d
    }

    fn value(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.b).map(|(&j, &v)| cost[j] * v).sum()
    }

    /// Bland's-rule primal simplex restricted to `allowed` entering columns.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let d = self.reduced_costs(cost);
            let entering = (0..self.cols).find(|&j| allowed[j] && d[j] < -TOL && !self.basis.contains(&j));
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let arc = self.at(r, c);
                if arc > TOL {
                    let ratio = self.b[r] / arc;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, best)) => {
                            if ratio < best - TOL || (ratio <= best + TOL && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Runtime("linear program is unbounded".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::Runtime("simplex pivot limit reached".into()))
    }
}

/// Optimal point and objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct LpOptimum {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    /// Solves to the lexicographically smallest optimal vertex.
    pub fn solve(&self) -> Result<LpOptimum> {
        let n = self.objective.len();
        let m = self.constraints.len();
        let slack_count = self.constraints.iter().filter(|c| c.sense != Sense::Eq).count();
        let art_start = n + slack_count;
        let cols = art_start + m;
        let mut t = Tableau {
            rows: m,
            cols,
            a: vec![0.0; m * cols],
            b: vec![0.0; m],
            basis: vec![0; m],
        };
        let mut slack = n;
        for (i, con) in self.constraints.iter().enumerate() {
            if con.coeffs.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    actual: con.coeffs.len(),
                });
            }
            let flip = if con.rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, &v) in con.coeffs.iter().enumerate() {
                t.a[i * cols + j] = flip * v;
            }
            t.b[i] = flip * con.rhs;
            match con.sense {
                Sense::Le => {
                    t.a[i * cols + slack] = flip;
                    slack += 1;
                }
                Sense::Ge => {
                    t.a[i * cols + slack] = -flip;
                    slack += 1;
                }
                Sense::Eq => {}
            }
            // Every row starts on its own artificial; slack columns can then
            // enter as ordinary variables.
            t.a[i * cols + art_start + i] = 1.0;
            t.basis[i] = art_start + i;
        }

        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|c| *c = 1.0);
        t.optimize(&phase1, &vec![true; cols])?;
        let infeasibility = t.value(&phase1);
        if infeasibility > FEAS_TOL {
            let row = (0..m)
                .filter(|&r| t.basis[r] >= art_start && t.b[r] > FEAS_TOL)
                .map(|r| self.constraints[t.basis[r] - art_start].name.clone())
                .next()
                .unwrap_or_default();
            return Err(Error::Infeasible(format!(
                "no point satisfies all constraints (residual {infeasibility:.3e}, at {row})"
            )));
        }
        for r in 0..m {
            if t.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| t.at(r, c).abs() > 1e-9) {
                    t.pivot(r, c);
                }
            }
        }

        let mut allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.objective);
        let stages = std::iter::once(cost.clone()).chain((0..n).map(|k| {
            let mut e = vec![0.0; cols];
            e[k] = 1.0;
            e
        }));
        for stage in stages {
            t.optimize(&stage, &allowed)?;
            let d = t.reduced_costs(&stage);
            for j in 0..cols {
                if d[j] > TOL && !t.basis.contains(&j) {
                    allowed[j] = false;
                }
            }
        }

        let mut x = vec![0.0; n];
        for (r, &j) in t.basis.iter().enumerate() {
            if j < n {
                x[j] = t.b[r].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.objective).map(|(a, c)| a * c).sum();
        Ok(LpOptimum { x, objective })
    }
}

/// Charging plan over `prices.len()` parked hours.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    /// Price estimates per step (€/kWh).
    pub prices: Vec<f64>,
    pub initial_soc: f64,
    pub soc_min: f64,
    pub capacity: f64,
    pub soc_target: f64,
    pub max_charge: f64,
    pub max_discharge: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    /// kWh per step.
    pub schedule: Vec<f64>,
    /// `sum prices * schedule` (€).
    pub objective: f64,
}

impl LpProblem {
    pub fn from_env(cfg: &EvEnvConfig, prices: Vec<f64>, initial_soc: f64) -> Self {
        Self {
            prices,
            initial_soc,
            soc_min: cfg.soc_min,
            capacity: cfg.capacity,
            soc_target: cfg.soc_target,
            max_charge: cfg.max_charge,
            max_discharge: cfg.max_discharge,
        }
    }

    pub fn horizon(&self) -> usize {
        self.prices.len()
    }

    /// Exact feasibility check by forward propagation of the reachable SOC
    /// interval. Names the first constraint that cannot be met.
    pub fn check_feasible(&self) -> Result<()> {
        let h = self.horizon();
        if h == 0 {
            return Err(Error::Infeasible("empty planning horizon".into()));
        }
        if self.max_charge < 0.0 || self.max_discharge < 0.0 || self.soc_min > self.capacity {
            return Err(Error::Infeasible("inconsistent battery bounds".into()));
        }
        let (mut lo, mut hi) = (self.initial_soc, self.initial_soc);
        for k in 1..=h {
            let (reach_lo, reach_hi) = (lo - self.max_discharge, hi + self.max_charge);
            let (band_lo, band_hi, what) = if k == h {
                (self.soc_target, self.soc_target, "terminal SOC = target")
            } else {
                (self.soc_min, self.capacity, "SOC corridor")
            };
            lo = reach_lo.max(band_lo);
            hi = reach_hi.min(band_hi);
            if lo > hi + FEAS_TOL {
                return Err(Error::Infeasible(format!(
                    "{what} at step {k}: reachable SOC [{reach_lo}, {reach_hi}] misses [{band_lo}, {band_hi}]"
                )));
            }
            hi = hi.max(lo);
        }
        Ok(())
    }

    /// The LP in shifted variables `x_t = a_t + max_discharge >= 0`.
    pub fn linear_program(&self) -> LinearProgram {
        let h = self.horizon();
        let d = self.max_discharge;
        let mut constraints = Vec::with_capacity(3 * h);
        for t in 0..h {
            let mut c = vec![0.0; h];
            c[t] = 1.0;
            constraints.push(Constraint {
                coeffs: c,
                sense: Sense::Le,
                rhs: self.max_charge + d,
                name: format!("action box at step {t}"),
            });
        }
        for k in 1..=h {
            let prefix: Vec<f64> = (0..h).map(|t| if t < k { 1.0 } else { 0.0 }).collect();
            let shift = k as f64 * d - self.initial_soc;
            if k == h {
                constraints.push(Constraint {
                    coeffs: prefix,
                    sense: Sense::Eq,
                    rhs: self.soc_target + shift,
                    name: "terminal SOC = target".into(),
                });
            } else {
                constraints.push(Constraint {
                    coeffs: prefix.clone(),
                    sense: Sense::Le,
                    rhs: self.capacity + shift,
                    name: format!("SOC <= capacity after step {k}"),
                });
                constraints.push(Constraint {
                    coeffs: prefix,
                    sense: Sense::Ge,
                    rhs: self.soc_min + shift,
                    name: format!("SOC >= soc_min after step {k}"),
                });
            }
        }
        LinearProgram {
            objective: self.prices.clone(),
            constraints,
        }
    }
}

/// Minimum-cost schedule; ties resolve to the lexicographically smallest
/// schedule.
pub fn solve_charging_lp(p: &LpProblem) -> Result<LpSolution> {
    if p.prices.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("price forecast"));
    }
    p.check_feasible()?;
    let opt = p.linear_program().solve()?;
    let schedule: Vec<f64> = opt
        .x
        .iter()
        .map(|x| (x - p.max_discharge).clamp(-p.max_discharge, p.max_charge))
        .collect();
    let objective = schedule.iter().zip(&p.prices).map(|(a, c)| a * c).sum();
    Ok(LpSolution { schedule, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(prices: &[f64], soc0: f64) -> LpProblem {
        LpProblem {
            prices: prices.to_vec(),
            initial_soc: soc0,
            soc_min: 4.8,
            capacity: 24.0,
            soc_target: 24.0,
            max_charge: 6.0,
            max_discharge: 6.0,
        }
    }

    #[test]
    fn hand_derived_instances() {
        let s = solve_charging_lp(&problem(&[0.1, 0.3, 0.2], 20.0)).unwrap();
        assert_eq!(s.schedule, vec![4.0, -6.0, 6.0]);
        assert!((s.objective + 0.20).abs() < 1e-12);
        let s = solve_charging_lp(&problem(&[0.3, 0.2, 0.1], 20.0)).unwrap();
        assert_eq!(s.schedule, vec![-6.0, 4.0, 6.0]);
        assert!((s.objective + 0.40).abs() < 1e-12);
    }

    #[test]
    fn constant_prices_at_target() {
        let s = solve_charging_lp(&problem(&[0.2; 4], 24.0)).unwrap();
        assert!(s.objective.abs() < 1e-12);
        assert!(s.schedule.iter().sum::<f64>().abs() < 1e-12);
        // lexicographically smallest: discharge first, then refill
        assert_eq!(s.schedule[0], -6.0);
    }

    #[test]
    fn unreachable_target_is_reported() {
        let err = solve_charging_lp(&problem(&[0.1, 0.1], 4.8)).unwrap_err();
        match err {
            Error::Infeasible(msg) => assert!(msg.contains("terminal"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn generic_simplex_small_programs() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6  ->  min -x - y
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 2.0],
                    sense: Sense::Le,
                    rhs: 4.0,
                    name: "a".into(),
                },
                Constraint {
                    coeffs: vec![3.0, 1.0],
                    sense: Sense::Le,
                    rhs: 6.0,
                    name: "b".into(),
                },
            ],
        };
        let o = lp.solve().unwrap();
        assert!((o.x[0] - 1.6).abs() < 1e-12 && (o.x[1] - 1.2).abs() < 1e-12);
        assert!((o.objective + 2.8).abs() < 1e-12);

        let infeasible = LinearProgram {
            objective: vec![1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0],
                    sense: Sense::Ge,
                    rhs: 3.0,
                    name: "lower".into(),
                },
                Constraint {
                    coeffs: vec![1.0],
                    sense: Sense::Le,
                    rhs: 2.0,
                    name: "upper".into(),
                },
            ],
        };
        assert!(matches!(infeasible.solve(), Err(Error::Infeasible(_))));
    }
}
