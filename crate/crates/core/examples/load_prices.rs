//! Loads an hourly `timestamp,price` CSV (EUR/MWh), normalizes it with
//! training statistics and splits off the test days.
//!
//! cargo run --example load_prices [prices.csv] [test_days]
//!
//! Without a file argument a 60-day demo file is written to the temp dir.

use std::path::PathBuf;

use ev_alsac::env::Normalizer;
use ev_alsac::prices::{gen_synthetic, load_price_csv, split_train_test, PricePattern, PriceUnit, SyntheticPriceSpec};

fn main() -> ev_alsac::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let test_days: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(14);
    let path = match args.get(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let path = std::env::temp_dir().join("ev_alsac_demo_prices.csv");
            let pattern = PricePattern::Sinusoid {
                low: 20.0,
                high: 90.0,
                peak_hour: 19.0,
            };
            gen_synthetic(&SyntheticPriceSpec::new(pattern, 6.0, 42), 60)?.write_csv(&path)?;
            path
        }
    };

    let series = load_price_csv(&path, PriceUnit::EurPerMwh)?;
    println!(
        "{}: {} hours, {} days from {}",
        path.display(),
        series.len(),
        series.days(),
        series.start()
    );
    let split = split_train_test(&series, test_days)?;
    let norm = Normalizer::from_series(&split.train);
    println!("{}", split.split_policy);
    println!(
        "train {} days from {}, test {} days from {}",
        split.train.days(),
        split.train.start(),
        split.test.days(),
        split.test.start()
    );
    println!("price mean {:.4} EUR/kWh, std {:.4}", norm.price_mean, norm.price_std);
    Ok(())
}
