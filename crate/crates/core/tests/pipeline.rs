use dllm_core::env::{caption_transition, transition_captions, Achievement, Action, MiniGrid};
use dllm_core::evalmetrics::GoalAssessor;
use dllm_core::goalsource::scripted_goal_texts;
use dllm_core::reward_engine::rollout_intrinsic_rewards;
use dllm_core::textembed::{cosine, Embedder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_episode(seed: u64) -> (Vec<String>, usize, f64) {
    let mut env = MiniGrid::default();
    env.reset(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut captions, mut ret) = (Vec::new(), 0.0);
    loop {
        let a = Action::from_index(rng.gen_range(0..Action::COUNT)).unwrap();
        let out = env.step(a).unwrap();
        captions.push(caption_transition(&out.event).to_string());
        ret += out.reward;
        if !out.cont {
            break;
        }
    }
    (captions, env.state().achievements.count(), ret)
}

#[test]
fn caption_matching_pays_once_per_unlocked_achievement() {
    let e = Embedder::default();
    let goals: Vec<_> = Achievement::ALL.iter().map(|a| e.embed(a.caption()).unwrap()).collect();
    let mut max_cross: f64 = 0.0;
    for (i, a) in goals.iter().enumerate() {
        for b in &goals[i + 1..] {
            max_cross = max_cross.max(cosine(a, b).unwrap());
        }
    }
    let m = (1.0 + max_cross) / 2.0;
    let vocab = transition_captions();
    for seed in 0..20 {
        let (captions, unlocked, ret) = random_episode(seed);
        assert!(captions.iter().all(|c| vocab.contains(c)));
        let u: Vec<_> = captions.iter().map(|c| e.embed(c).unwrap()).collect();
        let r = rollout_intrinsic_rewards(&u, &goals, &[1.0; 5], 1.0, m).unwrap();
        let paid = r.iter().filter(|&&x| x != 0.0).count();
        assert_eq!(paid, unlocked, "seed {seed}");
        assert!((r.iter().sum::<f64>() - ret).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn scripted_goals_are_context_sensitive_along_trajectories() {
    let assessor = GoalAssessor::new(Embedder::default(), dllm_core::evalmetrics::MAP_THRESHOLD).unwrap();
    let mut env = MiniGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut assessed = 0;
    for seed in 0..10 {
        env.reset(seed);
        loop {
            let s = env.state().summary();
            let goals = scripted_goal_texts(&s, 5);
            for g in goals.iter().filter(|g| assessor.map_goal(g).is_some()) {
                let a = assessor.assess(g, &s, &goals);
                assert!(a.correct && a.context && a.common_sense, "{g} in {s:?}");
                assert!(!a.novel || a.context);
                assessed += 1;
            }
            let a = Action::from_index(rng.gen_range(0..Action::COUNT)).unwrap();
            if !env.step(a).unwrap().cont {
                break;
            }
        }
    }
    assert!(assessed > 100);
}
