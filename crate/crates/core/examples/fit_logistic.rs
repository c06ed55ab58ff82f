//! Fit a regularized logistic model and compare it with the true outcome
//! model it is estimating.
//!
//!     cargo run --example fit_logistic

use fairaudit::estimation::{self, FittedModel, ModelSpec, OptimizerConfig};
use fairaudit::{dgp, scenarios};

fn main() -> fairaudit::Result<()> {
    let spec = scenarios::get("neutral")?.dgp();
    let train = dgp::sample(&spec, 20_000, 1)?;
    let holdout = dgp::sample(&spec, 20_000, 2)?;

    let oracle = FittedModel::oracle(&spec)?;
    for l2 in [0.0, 0.01, 1.0] {
        let model = estimation::fit(&train, &ModelSpec::new(&["income", "debt"]).with_l2(l2), &OptimizerConfig::default())?;
        let eps = estimation::estimation_error(&model, &spec, &holdout)?;
        let mae = eps.iter().map(|e| e.abs()).sum::<f64>() / eps.len() as f64;
        let pi_hat = estimation::predict_dataset(&model, &holdout)?;
        println!(
            "l2={l2:<5} iterations={:<2} intercept={:+.3} income={:+.3} debt={:+.3}  mean|π̂−π|={mae:.4}  log-loss={:.4}",
            model.convergence.iterations,
            model.intercept,
            model.coefficients["income"],
            model.coefficients["debt"],
            estimation::log_loss(&pi_hat, holdout.y()),
        );
    }
    let pi = estimation::predict_dataset(&oracle, &holdout)?;
    println!("oracle log-loss={:.4}", estimation::log_loss(&pi, holdout.y()));

    println!("\n{}", oracle.to_json());
    Ok(())
}
