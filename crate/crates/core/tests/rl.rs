use beliefrl::checkpoint::Checkpoint;
use beliefrl::config::RunConfig;
use beliefrl::diffmath::{Tensor, Var};
use beliefrl::envs::{DiscreteHmm, HmmEnv, VecEnv};
use beliefrl::metrics::MetricsRecord;
use beliefrl::rl::{
    a2c_losses, compute_targets, evaluate, joint_loss, Agent, AgentSpec, EncoderKind, LossWeights, RolloutSegment,
    TrainSettings, Trainer,
};
use beliefrl::run::Session;

fn small(encoder: &str, extra: &[&str]) -> RunConfig {
    let mut o: Vec<String> = vec![
        format!("encoder.kind={encoder}"),
        "encoder.particles=4".into(),
        "encoder.h_dim=12".into(),
        "encoder.z_dim=6".into(),
        "encoder.rnn_h_dim=16".into(),
        "train.n_e=3".into(),
    ];
    o.extend(extra.iter().map(|s| s.to_string()));
    RunConfig::parse("", &o).unwrap()
}

#[test]
fn default_batch_is_eighty_frames() {
    let cfg = RunConfig::parse("", &["encoder.kind=rnn".into(), "encoder.rnn_h_dim=8".into()]).unwrap();
    assert_eq!((cfg.n_e, cfg.train.n_s), (16, 5));
    let mut s = Session::new(cfg).unwrap();
    let r1 = s.trainer.run_segment().unwrap();
    let r2 = s.trainer.run_segment().unwrap();
    assert_eq!(r1.frames, 80);
    assert_eq!(r2.frames - r1.frames, 80);
}

fn probe_pattern(encoder: &str, n_s: usize, n_g: usize, segments: usize) -> Vec<Option<bool>> {
    let cfg = small(encoder, &[&format!("train.n_s={n_s}"), &format!("train.n_g={n_g}")]);
    let mut s = Session::new(cfg).unwrap();
    s.trainer.enable_probe();
    (0..segments).map(|_| s.trainer.run_segment().unwrap().probe_reached).collect()
}

#[test]
fn unit_window_never_reaches_the_previous_segment() {
    for enc in ["rnn", "dvrl"] {
        let p = probe_pattern(enc, 1, 1, 6);
        assert_eq!(p[0], Some(false));
        assert!(p.iter().all(|x| *x == Some(false)), "{enc}: {p:?}");
    }
}

#[test]
fn window_keeps_the_chain_until_it_is_full() {
    // n_s = 2, n_g = 6: three segments share a chain, then it is cut.
    for enc in ["rnn", "dvrl"] {
        let p = probe_pattern(enc, 2, 6, 7);
        let expected = [false, true, true, false, true, true, false].map(Some);
        assert_eq!(p, expected, "{enc}");
    }
}

#[test]
fn bootstrap_value_carries_no_gradient() {
    let boot = Var::leaf(Tensor::column(&[0.7]));
    let value = Var::leaf(Tensor::column(&[0.2]));
    let seg = RolloutSegment {
        rewards: vec![vec![1.0]],
        dones: vec![vec![false]],
        log_probs: vec![Var::leaf(Tensor::column(&[-0.3]))],
        values: vec![value.clone()],
        entropies: vec![Var::leaf(Tensor::column(&[0.1]))],
        aux: None,
        bootstrap_values: boot.value().data().to_vec(),
    };
    let q = compute_targets(&seg.rewards, &seg.dones, &seg.bootstrap_values, 0.99).unwrap();
    let l = a2c_losses(&seg, &q).unwrap();
    let g = l.value.backward();
    assert!(g.get(&value).is_some());
    assert!(g.get(&boot).is_none());
}

#[test]
fn zero_elbo_weight_drops_the_term() {
    let seg = RolloutSegment {
        rewards: vec![vec![1.0, -0.5]],
        dones: vec![vec![false, true]],
        log_probs: vec![Var::leaf(Tensor::column(&[-0.3, -1.0]))],
        values: vec![Var::leaf(Tensor::column(&[0.2, 0.4]))],
        entropies: vec![Var::leaf(Tensor::column(&[0.1, 0.3]))],
        aux: Some(vec![Var::leaf(Tensor::column(&[-4.0, -6.0]))]),
        bootstrap_values: vec![0.5, 0.5],
    };
    let q = compute_targets(&seg.rewards, &seg.dones, &seg.bootstrap_values, 0.9).unwrap();
    let l = a2c_losses(&seg, &q).unwrap();
    let elbo = beliefrl::rl::elbo_loss(&seg).unwrap();
    let w = LossWeights { entropy: 0.01, value: 0.5, elbo: 0.0 };
    assert_eq!(joint_loss(&l, Some(&elbo), w).item(), joint_loss(&l, None, w).item());
    let w1 = LossWeights { elbo: 1.0, ..w };
    assert_eq!(joint_loss(&l, Some(&elbo), w1).item(), joint_loss(&l, None, w).item() + 5.0);
}

fn records(s: &mut Session, n: usize) -> Vec<MetricsRecord> {
    (0..n)
        .map(|_| MetricsRecord::from_report(&s.trainer.run_segment().unwrap(), s.config.train.seed, None))
        .collect()
}

fn bits(r: &[MetricsRecord]) -> Vec<Vec<u64>> {
    r.iter()
        .map(|m| {
            [
                m.mean_return.unwrap_or(f64::NAN),
                m.loss_policy,
                m.loss_value,
                m.loss_entropy,
                m.loss_elbo.unwrap_or(f64::NAN),
                m.ess_mean.unwrap_or(f64::NAN),
                m.grad_norm,
            ]
            .iter()
            .map(|x| x.to_bits())
            .chain([m.frames, m.segment])
            .collect()
        })
        .collect()
}

#[test]
fn resume_from_checkpoint_is_exact() {
    for enc in ["rnn", "dvrl"] {
        let cfg = small(enc, &["train.n_s=5", "train.n_g=10"]);
        let mut a = Session::new(cfg).unwrap();
        // n_g = 2·n_s: every second update cuts the chain.
        records(&mut a, 30 / 5);
        assert_eq!(a.trainer.steps_since_cut(), 0);

        let bytes = a.checkpoint().encode();
        let ckpt = Checkpoint::decode(&bytes).unwrap();
        for (x, y) in ckpt.params.iter().zip(a.trainer.agent.store.entries()) {
            assert_eq!(x.name, y.name);
            assert!(x.value.data().iter().zip(y.value.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        let mut b = Session::resume(&ckpt).unwrap();

        let ra = records(&mut a, 5);
        let rb = records(&mut b, 5);
        assert_eq!(bits(&ra), bits(&rb), "{enc}");
        for (x, y) in a.trainer.agent.store.entries().iter().zip(b.trainer.agent.store.entries()) {
            assert!(x.value.data().iter().zip(y.value.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn same_seed_same_reports() {
    let cfg = small("dvrl", &["train.seed=9"]);
    let mut a = Session::new(cfg.clone()).unwrap();
    let mut b = Session::new(cfg).unwrap();
    assert_eq!(bits(&records(&mut a, 20)), bits(&records(&mut b, 20)));
}

fn silent_hmm_env() -> HmmEnv {
    let model = DiscreteHmm::uncontrolled(
        vec![vec![0.6, 0.4], vec![0.3, 0.7]],
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![0.5, 0.5],
        3,
    )
    .unwrap();
    HmmEnv::new(model, None, 10).unwrap()
}

#[test]
fn evaluation_of_reward_free_env_is_zero() {
    for kind in [EncoderKind::Rnn, EncoderKind::Dvrl] {
        let spec = AgentSpec { encoder: kind, particles: 3, h_dim: 8, z_dim: 4, rnn_h_dim: 8, recon_loss: false };
        let agent = Agent::new(spec, 2, beliefrl::envs::ActionSpace::Discrete(3), 0).unwrap();
        let r = evaluate(&agent, vec![silent_hmm_env(), silent_hmm_env()], 5, 1, true).unwrap();
        assert_eq!(r.returns, vec![0.0; 5]);
        assert_eq!((r.mean, r.std), (0.0, 0.0));
    }
}

#[test]
fn evaluation_is_repeatable_and_sums_constant_rewards() {
    // A flat surface with no action penalty pays the basin term every step.
    let cfg = small(
        "dvrl",
        &["env.ridge_slope=0.0", "env.ridge_basin=2.0", "env.action_penalty=0.0"],
    );
    let s = Session::new(cfg).unwrap();
    let a = s.evaluate(4, 3, true).unwrap();
    let b = s.evaluate(4, 3, true).unwrap();
    assert_eq!(a.returns, b.returns);
    for r in &a.returns {
        assert!((r - 75.0 * -2.0).abs() < 1e-9, "{r}");
    }
    let greedy = s.evaluate(2, 3, false).unwrap();
    assert_eq!(greedy.returns.len(), 2);
}

#[test]
fn trainer_rejects_mismatched_env() {
    let spec = AgentSpec { encoder: EncoderKind::Rnn, particles: 1, h_dim: 4, z_dim: 4, rnn_h_dim: 4, recon_loss: false };
    let agent = Agent::new(spec, 5, beliefrl::envs::ActionSpace::Discrete(3), 0).unwrap();
    let envs = VecEnv::new(vec![silent_hmm_env()], 0).unwrap();
    assert!(Trainer::new(agent, TrainSettings::default(), envs).is_err());
}
