mod common;

use voi_core::model::ChannelSymbol;
use voi_core::policy::Scheduler;
use voi_core::simulate::{monte_carlo, rollout, PolicySpec, SimulationContext};

use common::*;

fn policies(ctx: &SimulationContext) -> Vec<PolicySpec> {
    vec![
        PolicySpec::new("voi", Scheduler::quadratic(&ctx.problem, &ctx.riccati), ctx.certainty_equivalent()),
        PolicySpec::new("periodic", Scheduler::periodic(2), ctx.certainty_equivalent()),
    ]
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ctx = SimulationContext::new(short_pendulum(60)).unwrap();
    let specs = policies(&ctx);
    let parallel = monte_carlo(&ctx, &specs, 64, 9).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| monte_carlo(&ctx, &specs, 64, 9).unwrap());
    assert_eq!(parallel.samples, serial.samples);
    for (a, b) in parallel.policies.iter().zip(&serial.policies) {
        assert_eq!(a.loss.mean.to_bits(), b.loss.mean.to_bits());
        assert_eq!(a.loss.se.to_bits(), b.loss.se.to_bits());
    }
}

#[test]
fn channel_and_accounting_invariants() {
    let ctx = SimulationContext::new(short_pendulum(80)).unwrap();
    for spec in policies(&ctx) {
        for seed in 0..10 {
            let trace = rollout(&ctx, &spec.scheduler, &spec.controller, seed);
            assert!(trace.stages[0].received.is_erasure());
            let mut sent = 0;
            for (k, s) in trace.stages.iter().enumerate() {
                let next = trace.stages.get(k + 1).map_or(&trace.terminal_received, |n| &n.received);
                match (s.transmit, next) {
                    (true, ChannelSymbol::Payload(p)) => assert_eq!(p, &s.encoder_estimate),
                    (false, ChannelSymbol::Erasure) => {}
                    _ => panic!("stage {k}: channel does not follow the schedule"),
                }
                sent += usize::from(s.transmit);
            }
            let m = trace.metrics;
            assert_eq!(m.transmissions, sent);
            let stages = (ctx.horizon() + 1) as f64;
            assert!((m.rate - sent as f64 / stages).abs() < 1e-15);
            let lambda = ctx.problem.costs().tradeoff;
            assert!((m.loss - (lambda * m.rate + m.regulation)).abs() < 1e-9 * m.loss.abs().max(1.0));
        }
    }
}
