//! Five-fold grid search over `beta` and the selection percentage for all
//! three methods, reduced to accuracy curves and a difference table.

use mmvfl::data::{make_folds, synth_planted, SynthConfig};
use mmvfl::eval::{diff_table, format_table, grid_search, Method, TableRow};
use mmvfl::numerics::Seed;
use mmvfl::optimizer::Hyperparams;

fn main() -> mmvfl::Result<()> {
    let cfg = SynthConfig {
        num_samples: 150,
        dims: vec![20, 15, 25],
        informative: 2,
        sigma: 3.0,
        ..SynthConfig::default()
    };
    let ds = synth_planted(&cfg, Seed(9))?.dataset;
    let folds = make_folds(&ds.labels, ds.num_classes, 5, Seed(0))?;
    let betas = [1e-2, 1.0, 1e2];
    let ps = [10.0, 20.0, 50.0, 100.0];
    let hyper = Hyperparams::uniform(3, 0.1, 1000.0, 1000.0);

    let mut curves = Vec::new();
    for method in Method::ALL {
        let search = grid_search(method, &ds, &folds, &betas, &ps, &hyper, Seed(0))?;
        let c = search.curves();
        println!("{method}: mean accuracy {:.3}", c.mean());
        for (k, row) in c.accuracy.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|a| format!("{a:.3}")).collect();
            println!("  participant {}: {}", k + 1, cells.join(" "));
        }
        curves.push(c);
    }

    let rows = vec![
        TableRow::new(
            "synthetic",
            Method::Mmvfl,
            Method::Supfl,
            diff_table(&curves[0], &curves[1])?,
        ),
        TableRow::new(
            "synthetic",
            Method::Mmvfl,
            Method::Supmvlfl,
            diff_table(&curves[0], &curves[2])?,
        ),
    ];
    print!("{}", format_table(&rows));
    Ok(())
}
