//! Solves small charging LPs directly and prints the optimal schedules.
//!
//! cargo run --example lp_solver

use ev_alsac::baselines::{solve_charging_lp, LpProblem};

fn main() {
    let problem = |prices: &[f64], initial_soc: f64| LpProblem {
        prices: prices.to_vec(),
        initial_soc,
        soc_min: 4.8,
        capacity: 24.0,
        soc_target: 24.0,
        max_charge: 6.0,
        max_discharge: 6.0,
    };
    let cases = [
        problem(&[0.1, 0.3, 0.2], 20.0),
        problem(&[0.3, 0.2, 0.1], 20.0),
        problem(&[0.30, 0.30, 0.05, 0.05, 0.05, 0.30], 12.0),
        // needs 18 kWh in two hours at 6 kW: infeasible
        problem(&[0.1, 0.1], 6.0),
    ];
    for p in &cases {
        match solve_charging_lp(p) {
            Ok(s) => println!(
                "prices {:?} soc {:>4}: schedule {:?}, objective {:+.4} EUR",
                p.prices, p.initial_soc, s.schedule, s.objective
            ),
            Err(e) => println!("prices {:?} soc {:>4}: {e}", p.prices, p.initial_soc),
        }
    }
}
