//! Ranking features by the row norms of a learned transformation matrix.

use mmvfl::data::{synth_planted, SynthConfig};
use mmvfl::eval::classify_eval;
use mmvfl::featsel::{score_features, select_top, selection_count};
use mmvfl::numerics::Seed;
use mmvfl::optimizer::{run_reference, Hyperparams};

fn main() -> mmvfl::Result<()> {
    let cfg = SynthConfig {
        dims: vec![40, 25],
        informative: 4,
        ..SynthConfig::default()
    };
    let planted = synth_planted(&cfg, Seed(5))?;
    let ds = &planted.dataset;
    let hyper = Hyperparams::uniform(2, 2.0, 1000.0, 1000.0);
    let run = run_reference(&ds.views, &ds.label_matrix()?, &hyper, Seed(0))?;

    let (train, val) = (
        ds.subset(&(0..240).collect::<Vec<_>>()),
        ds.subset(&(240..300).collect::<Vec<_>>()),
    );
    for (k, w) in run.weights().into_iter().enumerate() {
        let ranking = score_features(w);
        println!("participant {k}, planted {:?}", planted.informative[k]);
        for (rank, &j) in ranking.order.iter().take(6).enumerate() {
            println!("  #{rank} column {j:>2}  score {:.4}", ranking.scores[j]);
        }
        for p in [10.0, 50.0, 100.0] {
            let cols = select_top(&ranking, p)?;
            let acc = classify_eval(
                &train.views[k].select_columns(&cols),
                &train.labels,
                &val.views[k].select_columns(&cols),
                &val.labels,
                ds.num_classes,
            )?;
            println!(
                "  p = {p:>5}%  ({} columns)  accuracy {acc:.3}",
                selection_count(w.nrows(), p)?
            );
        }
    }
    Ok(())
}
