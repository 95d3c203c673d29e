//! ROC, EER, max accuracy and class-conditional score densities.

use attnfuse::metrics::{class_densities, eer, max_accuracy, roc};

fn main() -> attnfuse::Result<()> {
    let scores = [0.92, 0.85, 0.77, 0.70, 0.66, 0.58, 0.52, 0.41, 0.33, 0.20];
    let labels = [true, true, false, true, true, false, true, false, false, false];

    let curve = roc(&scores, &labels)?;
    let (e, tau) = eer(&curve);
    let (acc, t) = max_accuracy(&scores, &labels)?;
    println!("EER {e:.4} at {tau:.3} (1-EER {:.4})", 1.0 - e);
    println!("max accuracy {acc:.4} at {t:.3}");
    println!("AUC {:.4}", curve.auc());

    let pdf = class_densities(&scores, &labels)?;
    println!("density modes: high {:.3}, low {:.3}", pdf.high.mode(), pdf.low.mode());
    Ok(())
}
