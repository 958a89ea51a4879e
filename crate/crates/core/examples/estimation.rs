//! Reconstruct a silent node's pressure from the nodes that did transmit:
//! fit a linear model on past intervals and score it on the next one.

use hydrosched::estimation::{estimate_stream, fit, test_reliability};
use hydrosched::trace_gen::{generate_traces, FlowProfile, NetworkTopology, SamplingConfig};
use hydrosched::NodeId;

fn main() -> hydrosched::Result<()> {
    let sampling = SamplingConfig {
        sample_rate_hz: 8.0,
        interval_length_s: 100.0,
        ..SamplingConfig::default()
    };
    let spi = sampling.samples_per_interval();
    let window = 3;
    let traces = generate_traces(
        &NetworkTopology::case_study(),
        &FlowProfile::default(),
        sampling,
        window as u64 + 1,
        11,
    )?;
    let stream = |id: u32| traces.node(NodeId(id)).expect("node is in the topology");
    let (train, test) = (0..window * spi, window * spi..(window + 1) * spi);
    let target = 4;

    for set in [vec![1], vec![2, 3], vec![2, 3, 5, 6, 7]] {
        let train_preds: Vec<&[f64]> = set.iter().map(|&id| &stream(id)[train.clone()]).collect();
        let model = fit(&stream(target)[train.clone()], &train_preds, window)?;
        let test_preds: Vec<&[f64]> = set.iter().map(|&id| &stream(id)[test.clone()]).collect();
        let estimate = estimate_stream(&model, &test_preds)?;
        let rlb = test_reliability(&stream(target)[test.clone()], &estimate)?;
        println!(
            "node {target} from {set:?}: train R² {:.5}, test reliability {rlb:.5}, slopes {:?}{}",
            model.r_squared,
            model
                .slopes()
                .iter()
                .map(|b| (b * 1e3).round() / 1e3)
                .collect::<Vec<_>>(),
            if model.ridge { " (ridge)" } else { "" }
        );
    }
    Ok(())
}
