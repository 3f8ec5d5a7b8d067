//! Kernel density estimation of reward samples, written out as CSV and SVG.
//!
//! Run with: `cargo run --example kde_curves`

use anyhow::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use schedq::eval::Kde;
use schedq::plot::kde_svg;

fn main() -> Result<()> {
    // total-reward-like samples: a blob of agents plus a couple of outliers
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples: Vec<f64> = (0..24)
        .map(|_| -350.0 + 18.0 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    samples.push(-430.0);
    samples.push(-300.0);

    let est = Kde::new(&samples)?;
    println!(
        "{} samples, Silverman bandwidth {:.3}",
        samples.len(),
        est.bandwidth()
    );
    let curve = est.curve(256)?;
    println!(
        "grid [{:.1}, {:.1}], density integrates to {:.4}",
        curve.grid[0],
        curve.grid[curve.grid.len() - 1],
        curve.integral()
    );

    let out = std::env::temp_dir().join("schedq_kde_demo");
    std::fs::create_dir_all(&out)?;

    let mut csv = String::from("total_reward,density\n");
    for (g, d) in curve.grid.iter().zip(&curve.density) {
        csv.push_str(&format!("{g},{d}\n"));
    }
    let csv_path = out.join("kde.csv");
    std::fs::write(&csv_path, csv)?;

    let svg = kde_svg(&curve, Some(-415.0), "agent reward distribution (demo)");
    let svg_path = out.join("kde.svg");
    std::fs::write(&svg_path, svg)?;

    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}
