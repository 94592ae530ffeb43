//! The same protocol over loopback TCP, wired up by hand: a hub accepts one
//! connection per participant and the coordinator drives the rounds.

use std::thread;
use std::time::Duration;

use mmvfl::data::{synth_planted, SynthConfig};
use mmvfl::federation::{
    coordinator_run, participant_run, FederationConfig, ParticipantOptions, TcpHub, TcpTransport,
    TransportKind,
};
use mmvfl::numerics::Seed;
use mmvfl::optimizer::{Hyperparams, ParticipantState, ProblemShape};

fn main() -> mmvfl::Result<()> {
    let cfg = SynthConfig {
        num_samples: 120,
        dims: vec![12, 20],
        informative: 3,
        ..SynthConfig::default()
    };
    let ds = synth_planted(&cfg, Seed(11))?.dataset;
    let y = ds.label_matrix()?;
    let hyper = Hyperparams::uniform(2, 0.5, 1000.0, 1000.0);
    let fed = FederationConfig::new(hyper.clone(), Seed(0), TransportKind::Tcp { port: 0 });
    let shape = ProblemShape::from_views(&ds.views, ds.num_classes)?;

    let hub = TcpHub::bind("127.0.0.1:0")?;
    let addr = hub.local_addr()?;
    println!("coordinator listening on {addr}");

    let outcome = thread::scope(|s| -> mmvfl::Result<_> {
        let mut handles = Vec::new();
        for (id, x) in ds.views.iter().enumerate() {
            let owner = id == 0;
            let state = ParticipantState::init(
                id,
                x.clone(),
                owner.then(|| y.clone()),
                hyper.local(id, owner),
                ds.num_classes,
                fed.seed,
            )?;
            handles.push(s.spawn(move || {
                let link = TcpTransport::connect(addr, Duration::from_secs(10))?;
                participant_run(state, link, &ParticipantOptions::default())
            }));
        }
        let links = hub.accept(2, Duration::from_secs(10))?;
        let outcome = coordinator_run(&fed.coordinator(&shape), links)?;
        for h in handles {
            let p = h.join().expect("participant thread")?;
            println!(
                "participant {} finished after {} rounds",
                p.state.id, p.rounds
            );
        }
        Ok(outcome)
    })?;

    let bytes: usize = outcome.trace.entries.iter().map(|e| e.bytes).sum();
    println!("{} rounds, {bytes} bytes on the wire", outcome.rounds);
    Ok(())
}
