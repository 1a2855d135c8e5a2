use exemplar_core::es::run_es_observed;
use exemplar_core::fixtures::multimodal_oracle;
use exemplar_core::instrument::{CountingGenerator, CountingOracle};
use exemplar_core::{
    rng_streams, run_es, run_gd, ConvergeOn, EsConfig, EsState, EsVariant, GdConfig, GdStart, IdentityGenerator,
};
use proptest::prelude::*;

fn es_config() -> impl Strategy<Value = EsConfig> {
    (
        1usize..40,
        1usize..5,
        0.05f64..2.0,
        0.0f64..0.95,
        0.3f64..0.97,
        0u64..400,
        any::<bool>(),
    )
        .prop_flat_map(|(t, m, s, alpha, threshold, extra, best)| {
            (1..=t).prop_map(move |k| EsConfig {
                t,
                k,
                m,
                s,
                alpha,
                threshold,
                max_calls: t as u64 + extra,
                latent_dim: 4,
                converge_on: if best { ConvergeOn::Best } else { ConvergeOn::Elite },
                ..EsConfig::default()
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn calls_and_batches_are_accounted_exactly(cfg in es_config(), seed in any::<u64>()) {
        let gen = CountingGenerator::new(IdentityGenerator::new(4));
        let oracle = CountingOracle::new(multimodal_oracle());
        let r = run_es(&cfg, &gen, &oracle, &mut rng_streams(seed, 0)).unwrap();
        let per_gen = (cfg.k * cfg.m) as u64;
        prop_assert_eq!(r.model_calls, cfg.t as u64 + r.generations * per_gen);
        prop_assert_eq!(oracle.calls(), r.model_calls);
        prop_assert_eq!(gen.decoded(), r.model_calls);
        let mut expected = vec![cfg.t];
        expected.extend(std::iter::repeat_n(cfg.k * cfg.m, r.generations as usize));
        prop_assert_eq!(oracle.batch_sizes(), expected);
        prop_assert!(r.converged || r.model_calls >= cfg.max_calls);
        if r.generations > 0 {
            // the loop only continues while there is budget left
            prop_assert!(r.model_calls - per_gen < cfg.max_calls);
        }
    }

    #[test]
    fn populations_stay_in_the_box_and_elites_never_worsen(cfg in es_config(), seed in any::<u64>()) {
        let gen = IdentityGenerator::new(4);
        let oracle = multimodal_oracle();
        let mut states: Vec<EsState> = Vec::new();
        let r = run_es_observed(&cfg, EsVariant::Momentum, &gen, &oracle, &mut rng_streams(seed, 1), |s| {
            states.push(s.clone())
        })
        .unwrap();
        prop_assert_eq!(states.len() as u64, r.generations + 1);
        prop_assert_eq!(states[0].population.len(), cfg.t);
        let top_k = |s: &EsState| {
            let mut f: Vec<f64> = s.population.iter().map(|p| p.fitness.unwrap()).collect();
            f.sort_by(|a, b| b.total_cmp(a));
            f.truncate(cfg.k);
            f
        };
        for (i, s) in states.iter().enumerate() {
            prop_assert!(s.population.iter().all(|p| p.latent.in_box(cfg.u) && p.is_scored()));
            if i > 0 {
                prop_assert_eq!(s.population.len(), cfg.k * (cfg.m + 1));
                let (before, after) = (top_k(&states[i - 1]), top_k(s));
                for (b, a) in before.iter().zip(&after) {
                    prop_assert!(a >= b, "elite fitness dropped from {} to {}", b, a);
                }
            }
        }
        let best = states.iter().flat_map(|s| &s.population).map(|p| p.fitness.unwrap()).fold(f64::MIN, f64::max);
        prop_assert_eq!(r.best_fitness(), best);
        prop_assert_eq!(r.final_elite.len(), cfg.k);
    }

    #[test]
    fn es_runs_are_reproducible(cfg in es_config(), seed in any::<u64>(), trial in 0u64..1000) {
        let gen = IdentityGenerator::new(4);
        let oracle = multimodal_oracle();
        let a = run_es(&cfg, &gen, &oracle, &mut rng_streams(seed, trial)).unwrap();
        let b = run_es(&cfg, &gen, &oracle, &mut rng_streams(seed, trial)).unwrap();
        prop_assert!(a.same_outcome(&b));
        prop_assert_eq!(serde_json::to_string(&a.best_specimen).unwrap(), serde_json::to_string(&b.best_specimen).unwrap());
    }

    #[test]
    fn gd_counts_one_call_per_step(
        lr in 0.01f64..1.0,
        momentum in 0.0f64..0.95,
        max_calls in 1u64..300,
        seed in any::<u64>(),
    ) {
        let cfg = GdConfig { learning_rate: lr, momentum, max_calls, latent_dim: 4, ..GdConfig::default() };
        let gen = IdentityGenerator::new(4);
        let oracle = CountingOracle::new(multimodal_oracle());
        let r = run_gd(&cfg, &gen, &oracle, GdStart::Random, &mut rng_streams(seed, 0)).unwrap();
        prop_assert_eq!(oracle.calls(), r.model_calls);
        prop_assert_eq!(r.generations, r.model_calls);
        prop_assert!(r.model_calls <= max_calls);
        prop_assert!(r.converged || r.model_calls == max_calls);
        prop_assert!(r.best_specimen.latent.in_box(cfg.u));
        let again = run_gd(&cfg, &gen, &multimodal_oracle(), GdStart::Random, &mut rng_streams(seed, 0)).unwrap();
        prop_assert!(r.same_outcome(&again));
    }
}
