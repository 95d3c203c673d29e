//! Linear SVM: training, decision values, C selection and Platt calibration.

use attnfuse::linalg::FeatureMatrix;
use attnfuse::svm::{decision, fit_calibrator, select_c, train_svm, Scaler, TrainConfig, DEFAULT_C_GRID};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> attnfuse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, d) = (120, 5);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut users = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let row: Vec<f64> = (0..d).map(|j| rng.random::<f64>() + if j == 0 { 0.6 * label } else { 0.0 }).collect();
        rows.push(row);
        y.push(label);
        users.push(format!("user{}", i % 4));
    }
    let x = FeatureMatrix::from_rows(&rows)?;
    let z = Scaler::fit(&x)?.transform(&x)?;

    let c = select_c(&z, &y, &users, &DEFAULT_C_GRID, 3, &TrainConfig::default())?;
    let model = train_svm(&z, &y, &TrainConfig::default().with_c(c))?;
    println!("C = {c}, objective {:.4}, {} iterations, converged {}", model.objective_value, model.n_iterations, model.converged);
    println!("w = {:?}\nb = {:.4}", model.weights, model.bias);

    let dec: Vec<f64> = (0..n).map(|i| decision(&model, z.row(i))).collect::<attnfuse::Result<_>>()?;
    let pos: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
    let cal = fit_calibrator(&dec, &pos)?;
    println!("calibrator a={:.3} b={:.3}; P(high | d=0) = {:.3}", cal.a, cal.b, cal.calibrate(0.0));
    Ok(())
}
