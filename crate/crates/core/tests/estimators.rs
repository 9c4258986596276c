mod common;

use std::sync::Arc;

use common::*;
use irl::domain::{
    softmax_policy_prob, ActionSets, DemonstrationSet, ExplicitFeatures, FeatureMap, TabularPolicy,
};
use irl::envs::{EnvTag, Environment};
use irl::estimators::*;
use irl::harness::ModelName;
use irl::lstdq::{LstdqOptions, LstdqSystem};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// Sum of per-step log probabilities computed one step at a time.
fn naive_log_likelihood(
    demos: &DemonstrationSet,
    actions: &ActionSets,
    features: &dyn FeatureMap,
    w_q: &[f64],
    beta: f64,
) -> f64 {
    demos
        .steps()
        .map(|st| {
            let legal = actions.legal(st.state);
            let p = softmax_policy_prob(w_q, beta, features, st.state, legal).unwrap();
            let k = legal.iter().position(|&a| a == st.action).unwrap();
            p[k].ln()
        })
        .sum()
}

#[test]
fn zero_weights_give_uniform_log_likelihood() {
    for tag in DOMAINS {
        let exp = experiment(tag);
        let demos = uniform_demos(&exp, 20, 1);
        let expected: f64 = -demos
            .steps()
            .map(|st| (exp.actions.legal(st.state).len() as f64).ln())
            .sum::<f64>();
        let (po, g) = po_objective_and_gradient(
            &vec![0.0; exp.features.value_dim()],
            &demos,
            &exp.actions,
            &exp.features,
            1.0,
        )
        .unwrap();
        assert!((po - expected).abs() <= 1e-9 * expected.abs());
        // gradient: Σ_t [φ(s_t,a_t) − mean over legal φ(s_t,·)]
        let mut oracle = vec![0.0; exp.features.value_dim()];
        for st in demos.steps() {
            let legal = exp.actions.legal(st.state);
            let chosen = exp.features.value_features(st.state, st.action);
            for (o, c) in oracle.iter_mut().zip(&chosen) {
                *o += c;
            }
            for &a in legal {
                for (o, x) in oracle
                    .iter_mut()
                    .zip(exp.features.value_features(st.state, a))
                {
                    *o -= x / legal.len() as f64;
                }
            }
        }
        assert!(max_abs_diff(&g, &oracle) <= 1e-9 * max_norm(&oracle).max(1.0));
        let sys = system(&exp, &demos);
        let (rp, _) = rp_objective_and_gradient(
            &vec![0.0; sys.reward_dim()],
            &demos,
            &exp.actions,
            &sys,
            &exp.features,
            1.0,
        )
        .unwrap();
        assert!((rp - expected).abs() <= 1e-9 * expected.abs());
    }
}

#[test]
fn objective_factorizes_over_steps() {
    let mut r = rng(2);
    for tag in DOMAINS {
        let exp = experiment(tag);
        for seed in 0..5 {
            let demos = uniform_demos(&exp, 15, seed);
            let sys = system(&exp, &demos);
            let w_q = normal_vec(&mut r, exp.features.value_dim(), 1.0);
            let (po, _) =
                po_objective_and_gradient(&w_q, &demos, &exp.actions, &exp.features, 1.3).unwrap();
            let naive = naive_log_likelihood(&demos, &exp.actions, &exp.features, &w_q, 1.3);
            assert!(
                (po - naive).abs() <= 1e-10 * naive.abs().max(1.0),
                "{tag}: {po} vs {naive}"
            );

            let w_r = normal_vec(
                &mut r,
                sys.reward_dim(),
                1.0 / max_norm(sys.c().unwrap().as_slice()).max(1.0),
            );
            let (rp, _) =
                rp_objective_and_gradient(&w_r, &demos, &exp.actions, &sys, &exp.features, 0.7)
                    .unwrap();
            let naive = naive_log_likelihood(
                &demos,
                &exp.actions,
                &exp.features,
                &sys.q_weights(&w_r).unwrap(),
                0.7,
            );
            assert!(
                (rp - naive).abs() <= 1e-10 * naive.abs().max(1.0),
                "{tag}: {rp} vs {naive}"
            );
        }
    }
}

#[test]
fn scale_equivalence_between_beta_and_weights() {
    let mut r = rng(3);
    for tag in DOMAINS {
        let exp = experiment(tag);
        let demos = uniform_demos(&exp, 10, 3);
        let w = normal_vec(&mut r, exp.features.value_dim(), 1.0);
        let (base, _) =
            po_objective_and_gradient(&w, &demos, &exp.actions, &exp.features, 1.0).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = w.iter().map(|x| x / c).collect();
            let (v, _) =
                po_objective_and_gradient(&scaled, &demos, &exp.actions, &exp.features, c).unwrap();
            assert!((v - base).abs() <= 1e-10 * base.abs().max(1.0));
        }
        let sys = system(&exp, &demos);
        let w_r = normal_vec(&mut r, sys.reward_dim(), 0.1);
        let (base, _) =
            rp_objective_and_gradient(&w_r, &demos, &exp.actions, &sys, &exp.features, 1.0)
                .unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = w_r.iter().map(|x| x / c).collect();
            let (v, _) =
                rp_objective_and_gradient(&scaled, &demos, &exp.actions, &sys, &exp.features, c)
                    .unwrap();
            assert!((v - base).abs() <= 1e-10 * base.abs().max(1.0));
        }
    }
}

#[test]
fn slope_is_non_increasing_along_segments() {
    let mut r = rng(4);
    for tag in DOMAINS {
        let exp = experiment(tag);
        let demos = uniform_demos(&exp, 20, 4);
        let choices = ChoiceSet::from_demos(&demos, &exp.actions).unwrap();
        let obj = ConditionalLogit::po(&choices, &exp.features, 1.0).unwrap();
        for _ in 0..10 {
            let u = normal_vec(&mut r, obj.dim(), 2.0);
            let v = normal_vec(&mut r, obj.dim(), 2.0);
            let dir: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a - b).collect();
            let slopes: Vec<f64> = (0..10)
                .map(|k| {
                    let t = k as f64 / 9.0;
                    let x: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                    let (_, g) = obj.value_and_gradient(&x);
                    g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let scale = max_norm(&slopes).max(1.0);
            for pair in slopes.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-10 * scale, "{tag}: {slopes:?}");
            }
        }
    }
}

#[test]
fn log_prior_is_added() {
    struct Ridge(f64);
    impl LogPrior for Ridge {
        fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
            (
                -0.5 * self.0 * w.iter().map(|x| x * x).sum::<f64>(),
                w.iter().map(|x| -self.0 * x).collect(),
            )
        }
    }
    let exp = experiment(EnvTag::Blackjack);
    let demos = uniform_demos(&exp, 30, 5);
    let choices = ChoiceSet::from_demos(&demos, &exp.actions).unwrap();
    let plain = ConditionalLogit::po(&choices, &exp.features, 1.0).unwrap();
    let with = plain.clone().with_prior(Arc::new(Ridge(2.0)));
    let w = vec![0.3; plain.dim()];
    let (a, ga) = plain.value_and_gradient(&w);
    let (b, gb) = with.value_and_gradient(&w);
    assert!((b - (a - 0.09 * plain.dim() as f64)).abs() < 1e-9);
    for (x, y) in ga.iter().zip(&gb) {
        assert!((y - (x - 0.6)).abs() < 1e-9);
    }
}

/// One state, two actions: the fitted probability of action 0 is the
/// empirical frequency `n_a / (n_a + n_b)`.
#[test]
fn logistic_mle_oracle() {
    let mut r = rng(6);
    for _ in 0..10 {
        let d: Vec<f64> = normal_vec(&mut r, 3, 1.0);
        let base: Vec<f64> = normal_vec(&mut r, 3, 1.0);
        let first: Vec<f64> = base.iter().zip(&d).map(|(b, x)| b + x).collect();
        let features = ExplicitFeatures::new(
            2,
            vec![vec![1.0], vec![0.0]],
            vec![first, base, vec![0.0; 3], vec![0.0; 3]],
        )
        .unwrap();
        let actions = ActionSets::new(2, vec![vec![0, 1], vec![]]);
        let n_a = r.gen_range(1..40);
        let n_b = r.gen_range(1..40);
        let trajs = (0..n_a)
            .map(|_| traj(&[(0, 0)]))
            .chain((0..n_b).map(|_| traj(&[(0, 1)])))
            .collect();
        let demos = demo_set(trajs);
        let (params, report) =
            fit_po(&demos, &features, &actions, 1.0, &FitOptions::default()).unwrap();
        assert!(report.converged);
        let p = softmax_policy_prob(&params.w_q, 1.0, &features, 0, &[0, 1]).unwrap();
        let target = n_a as f64 / (n_a + n_b) as f64;
        assert!((p[0] - target).abs() < 1e-6, "{} vs {target}", p[0]);
    }
}

/// Brute-force grid over a two-parameter problem cannot beat the optimiser
/// by more than 1e-4.
#[test]
fn grid_search_oracle() {
    let mut r = rng(7);
    let n_states = 3;
    let value: Vec<Vec<f64>> = (0..n_states * 3)
        .map(|_| normal_vec(&mut r, 2, 1.0))
        .collect();
    let features = ExplicitFeatures::new(3, vec![vec![0.0]; n_states], value).unwrap();
    let actions = ActionSets::new(3, vec![vec![0, 1, 2]; n_states]);
    let mut trajs = Vec::new();
    for s in 0..n_states {
        for a in 0..3 {
            for _ in 0..r.gen_range(1..6) {
                trajs.push(traj(&[(s, a)]));
            }
        }
    }
    let demos = demo_set(trajs);
    let (params, _) = fit_po(&demos, &features, &actions, 1.0, &FitOptions::default()).unwrap();
    let choices = ChoiceSet::from_demos(&demos, &actions).unwrap();
    let obj = ConditionalLogit::po(&choices, &features, 1.0).unwrap();
    let (best, _) = obj.value_and_gradient(&params.w_q);
    assert!(best >= obj.value_and_gradient(&[0.0, 0.0]).0);
    let mut grid_best = f64::NEG_INFINITY;
    for i in -500..=500 {
        for j in -500..=500 {
            let w = [
                params.w_q[0] + i as f64 * 0.01,
                params.w_q[1] + j as f64 * 0.01,
            ];
            grid_best = grid_best.max(obj.value_and_gradient(&w).0);
        }
    }
    assert!(grid_best <= best + 1e-4, "grid {grid_best} vs fit {best}");
}

/// A deterministic demonstrator on a tabular chain: the fitted RP policy
/// ranks the demonstrated action first in every visited state.
#[test]
fn separable_instance_recovers_demonstrated_actions() {
    let features = ExplicitFeatures::tabular(4, 2);
    let mut sets = vec![vec![0, 1]; 3];
    sets.push(vec![]);
    let actions = ActionSets::new(2, sets);
    let choice = [1usize, 0, 1];
    let trajs = (0..20)
        .map(|k| {
            let start = k % 3;
            traj(&(start..3).map(|s| (s, choice[s])).collect::<Vec<_>>())
        })
        .collect();
    let demos = demo_set(trajs);
    let lstdq = LstdqOptions {
        gamma: 0.9,
        ridge: None,
        include_terminal: true,
    };
    let (params, report) = fit_rp(
        &demos,
        &features,
        &actions,
        &lstdq,
        1.0,
        &FitOptions::default(),
    )
    .unwrap();
    assert!(report.objective > -20.0 * 2f64.ln());
    let model = FittedModel::Rp(params);
    let policy = extract_policy(&model, &features, &actions, PolicyMode::Softmax).unwrap();
    for (s, &c) in choice.iter().enumerate() {
        let p = policy.probs(s);
        assert!(p[c] > p[1 - c], "state {s}: {p:?}");
    }
    let greedy = extract_policy(&model, &features, &actions, PolicyMode::Greedy).unwrap();
    for (s, &c) in choice.iter().enumerate() {
        assert_eq!(greedy.prob(s, c), 1.0);
    }
}

#[test]
fn softmax_policies_are_normalized_and_greedy_is_scale_invariant() {
    let exp = experiment(EnvTag::TicTacToe(irl::envs::OpponentKind::Random));
    let demos = exp.demos(200, 8).unwrap();
    let (fitted, _) = exp.fit(ModelName::Po, &demos).unwrap();
    let soft = extract_policy(&fitted, &exp.features, &exp.actions, PolicyMode::Softmax).unwrap();
    soft.validate(&exp.actions).unwrap();
    for s in 0..exp.env.n_states() {
        if !exp.env.is_terminal(s) {
            let total: f64 = soft.probs(s).iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
    }
    let greedy = extract_policy(&fitted, &exp.features, &exp.actions, PolicyMode::Greedy).unwrap();
    let FittedModel::Po(p) = &fitted else {
        unreachable!()
    };
    for c in [0.01, 3.0, 1e4] {
        let scaled = FittedModel::Po(PoParams {
            w_q: p.w_q.iter().map(|x| c * x).collect(),
            beta: p.beta,
        });
        assert_eq!(
            extract_policy(&scaled, &exp.features, &exp.actions, PolicyMode::Greedy).unwrap(),
            greedy
        );
    }
}

#[test]
fn learned_reward_basics() {
    let exp = experiment(EnvTag::Blackjack);
    let demos = exp.demos(100, 9).unwrap();
    let sys = LstdqSystem::from_demos(&demos, &exp.features, &exp.lstdq_options()).unwrap();
    let n = exp.env.n_states();
    let model = |w_r: Vec<f64>| {
        FittedModel::Rp(RpParams {
            w_r,
            beta: 1.0,
            system: sys.clone(),
        })
    };
    assert!(learned_reward(&model(vec![0.0; 10]), &exp.features, n)
        .unwrap()
        .iter()
        .all(|&x| x == 0.0));
    let u: Vec<f64> = (0..10).map(|i| i as f64 - 4.5).collect();
    let v: Vec<f64> = (0..10).map(|i| (i * i) as f64 / 10.0).collect();
    let ru = learned_reward(&model(u.clone()), &exp.features, n).unwrap();
    let rv = learned_reward(&model(v.clone()), &exp.features, n).unwrap();
    let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let rm = learned_reward(&model(mix), &exp.features, n).unwrap();
    for s in 0..n {
        assert!((rm[s] - (2.0 * ru[s] - 0.5 * rv[s])).abs() < 1e-12);
    }
    let po = FittedModel::Po(PoParams {
        w_q: vec![0.0; 20],
        beta: 1.0,
    });
    let err = learned_reward(&po, &exp.features, n).unwrap_err();
    assert_eq!(err.to_string(), "PO model produces no reward function");
}

#[test]
fn gridworld_learned_reward_prefers_corners() {
    let exp = experiment(EnvTag::Gridworld32);
    let demos = exp.demos(10_000, 10).unwrap();
    let (fitted, _) = exp.fit(ModelName::Rp, &demos).unwrap();
    let reward = learned_reward(&fitted, &exp.features, exp.env.n_states()).unwrap();
    let irl::envs::AnyEnv::Gridworld(g) = &exp.env else {
        unreachable!()
    };
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for (s, r) in reward.iter().enumerate() {
        if g.in_corner(s) {
            inside.push(*r)
        } else {
            outside.push(*r)
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&inside) > mean(&outside),
        "{} vs {}",
        mean(&inside),
        mean(&outside)
    );
}

#[test]
fn params_file_round_trip() {
    let file = ParamsFile {
        kind: ModelKind::Rp,
        beta: 1.0,
        weights: vec![0.1, -2.5e-17, 3.0, f64::MIN_POSITIVE, 1.0 / 3.0],
    };
    let text = file.to_text();
    assert!(text.starts_with("model=rp beta=1.0 dim=5\n"));
    assert_eq!(ParamsFile::from_text(&text).unwrap(), file);
    assert!(ParamsFile::from_text("model=rp beta=1 dim=2\n0.5\n").is_err());
    assert!(ParamsFile::from_text("model=xx beta=1 dim=0\n").is_err());
    assert!(ParamsFile::from_text("model=po beta=1 dim=1\nabc\n").is_err());
}

#[test]
fn fitting_improves_on_start_point() {
    for tag in DOMAINS {
        let exp = experiment(tag);
        let demos = exp.demos(50, 11).unwrap();
        for model in [ModelName::Rp, ModelName::Po] {
            let (fitted, report) = exp.fit(model, &demos).unwrap();
            let choices = ChoiceSet::from_demos(&demos, &exp.actions).unwrap();
            let start = match &fitted {
                FittedModel::Po(_) => {
                    ConditionalLogit::po(&choices, &exp.features, 1.0)
                        .unwrap()
                        .value_and_gradient(&vec![0.0; exp.features.value_dim()])
                        .0
                }
                FittedModel::Rp(p) => {
                    ConditionalLogit::rp(&choices, &p.system, &exp.features, 1.0)
                        .unwrap()
                        .value_and_gradient(&vec![0.0; p.w_r.len()])
                        .0
                }
            };
            assert!(report.objective >= start, "{tag} {model}");
            assert!(report.iterations <= FitOptions::default().max_iter);
        }
    }
}

#[test]
fn empty_and_illegal_demonstrations_are_rejected() {
    let exp = experiment(EnvTag::Blackjack);
    let empty = DemonstrationSet::new("blackjack", vec![]).unwrap();
    let err = fit_po(
        &empty,
        &exp.features,
        &exp.actions,
        1.0,
        &FitOptions::default(),
    )
    .unwrap_err();
    assert_eq!(err.to_string(), "no demonstrations");
    let bad = demo_set(vec![traj(&[(500, 0)])]);
    assert!(fit_po(
        &bad,
        &exp.features,
        &exp.actions,
        1.0,
        &FitOptions::default()
    )
    .is_err());
    let _ = TabularPolicy::uniform(&exp.actions);
    let sys =
        LstdqSystem::from_matrices(DMatrix::identity(2, 2), DMatrix::identity(2, 2), 1.0).unwrap();
    assert!(sys.q_weights(&[1.0, 2.0]).is_err());
}
