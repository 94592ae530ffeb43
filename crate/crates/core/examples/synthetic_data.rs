//! Generating a planted dataset, writing it as CSV and loading it back.

use mmvfl::data::{load_csv, make_folds, synth_planted, write_dataset, SynthConfig};
use mmvfl::numerics::Seed;

fn main() -> mmvfl::Result<()> {
    let cfg = SynthConfig {
        num_classes: 4,
        num_samples: 80,
        dims: vec![10, 6],
        informative: 2,
        sigma: 0.25,
    };
    let planted = synth_planted(&cfg, Seed(21))?;
    println!("informative columns: {:?}", planted.informative);

    let dir = std::env::temp_dir().join("mmvfl-synthetic-example");
    let (views, labels) = write_dataset(&dir, &planted.dataset)?;
    println!(
        "wrote {} views and {} to {}",
        views.len(),
        labels.display(),
        dir.display()
    );

    let ds = load_csv(&views, &labels)?;
    println!("dims {:?}, class counts {:?}", ds.dims(), ds.class_counts());
    assert_eq!(ds.views, planted.dataset.views);

    let folds = make_folds(&ds.labels, ds.num_classes, 5, Seed(0))?;
    let (train, val) = folds.split(&ds, 0);
    println!(
        "fold 0: {} training, {} validation samples",
        train.num_samples(),
        val.num_samples()
    );
    Ok(())
}
