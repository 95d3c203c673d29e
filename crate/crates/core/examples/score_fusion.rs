//! Weighted-sum fusion of calibrated module scores.

use attnfuse::fusion::{enumerate_combinations, fuse, subset_name, FusionConfig};
use attnfuse::ingest::ModuleId;

fn main() -> attnfuse::Result<()> {
    let sample = [(ModuleId::Eb, 0.81), (ModuleId::Hp, 0.40), (ModuleId::Expr, 0.65)].into_iter().collect();

    let equal = FusionConfig::equal(&[ModuleId::Eb, ModuleId::Hp, ModuleId::Expr])?;
    println!("{}: {:.4}", equal.name(), fuse(&sample, &equal)?);

    // Weights are normalized, so 2:1:1 is the same as 0.5:0.25:0.25.
    let weighted = FusionConfig::new([(ModuleId::Eb, 2.0), (ModuleId::Hp, 1.0), (ModuleId::Expr, 1.0)])?;
    println!("weighted: {:.4}", fuse(&sample, &weighted)?);

    for s in enumerate_combinations(&[ModuleId::Eb, ModuleId::Hp, ModuleId::Expr]) {
        println!("{}", subset_name(&s));
    }
    Ok(())
}
