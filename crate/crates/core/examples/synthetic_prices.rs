//! Prints one day of each synthetic price pattern.
//!
//! cargo run --example synthetic_prices

use ev_alsac::prices::{gen_synthetic, PricePattern, SyntheticPriceSpec};

fn main() -> ev_alsac::Result<()> {
    let specs = [
        ("two-tier", SyntheticPriceSpec::two_tier(0.05, 0.30, 0, 6)),
        (
            "sinusoid",
            SyntheticPriceSpec::new(
                PricePattern::Sinusoid {
                    low: 0.05,
                    high: 0.35,
                    peak_hour: 19.0,
                },
                0.01,
                3,
            ),
        ),
        (
            "random-walk",
            SyntheticPriceSpec::new(
                PricePattern::RandomWalk {
                    initial: 0.15,
                    low: 0.0,
                    high: 0.4,
                },
                0.02,
                3,
            ),
        ),
    ];
    let series: Vec<_> = specs
        .iter()
        .map(|(_, spec)| gen_synthetic(spec, 2))
        .collect::<Result<_, _>>()?;

    print!("hour");
    for (name, _) in &specs {
        print!("  {name:>11}");
    }
    println!();
    for h in 0..24 {
        print!("{h:>4}");
        for s in &series {
            print!("  {:>11.4}", s.prices()[h]);
        }
        println!();
    }
    Ok(())
}
