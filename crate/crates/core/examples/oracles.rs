//! The brute-force oracles next to the fast implementations.

use attnfuse::linalg::FeatureMatrix;
use attnfuse::metrics::{eer, max_accuracy, roc};
use attnfuse::svm::{train_svm, TrainConfig};
use attnfuse::synthgen::{brute_force_eer, brute_force_max_accuracy, reference_svm_solve};

fn main() -> attnfuse::Result<()> {
    let scores = [0.3, 0.9, 0.4, 0.6, 0.6, 0.1, 0.8];
    let labels = [false, true, false, true, false, false, true];
    let bf = brute_force_eer(&scores, &labels)?;
    println!("EER fast {:.6}  brute force {:.6} (min-max {:.6})", eer(&roc(&scores, &labels)?).0, bf.interpolated, bf.min_max);
    println!("max acc fast {:.6}  brute force {:.6}", max_accuracy(&scores, &labels)?.0, brute_force_max_accuracy(&scores, &labels)?.0);

    let x = FeatureMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.5], [2.0, 2.0], [3.0, 1.5], [1.5, 1.0]])?;
    let y = [-1.0, -1.0, 1.0, 1.0, 1.0];
    let fast = train_svm(&x, &y, &TrainConfig { tol: 1e-9, ..TrainConfig::default() })?;
    let slow = reference_svm_solve(&x, &y, 1.0)?;
    println!("objective fast {:.9}  reference {:.9}", fast.objective_value, slow.objective);
    Ok(())
}
