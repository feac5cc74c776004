//! Law of the cluster shape `b` against direct draws of the limiting series.

use rayon::prelude::*;
use rwre_core::config::AcceptanceConfig;
use rwre_core::limit_laws::{sample_limit_b, SiteLaw};
use rwre_core::occupancy::compute_rho_with;
use rwre_core::seeds::walk_rng;
use rwre_core::stats::ks_two_sample;
use rwre_core::traps::{cluster_profile_options, env_seed, massive_b, sweep_point_process, SpanRule};
use rwre_core::{sample_environment, EnvironmentModel};

const N: usize = 100_000;
const ENVS: usize = 2000;
const DELTA: f64 = 0.0625;

fn setup() -> (EnvironmentModel, f64, usize) {
    let model = AcceptanceConfig::default().sub_model.build().unwrap();
    let s = model.tail_index().unwrap();
    let span = SpanRule::Separation.span(&model, s, N);
    (model, s, span)
}

fn direct(model: &EnvironmentModel, s: f64, span: usize, law: SiteLaw, seed: u64) -> Vec<f64> {
    let mut rng = walk_rng(seed);
    (0..20_000).map(|_| sample_limit_b(model, span, law, s, &mut rng)).collect()
}

#[test]
fn massive_site_b_matches_tilted_series() {
    let (model, s, span) = setup();
    let opts = cluster_profile_options(span, 1e-8);
    let observed: Vec<f64> = (0..ENVS)
        .into_par_iter()
        .flat_map_iter(|e| {
            let env = sample_environment(&model, 0, (N + span) as i64, env_seed(0xB1A5, e)).unwrap();
            massive_b(&compute_rho_with(&env, N, &opts).unwrap(), s, DELTA, span).unwrap()
        })
        .collect();
    assert!(observed.len() > 20_000, "{} massive sites", observed.len());
    let r = ks_two_sample(&observed, &direct(&model, s, span, SiteLaw::Tilted, 0xB1A6));
    assert!(r.p_value.unwrap() > 0.01, "KS {} p {:?}", r.statistic, r.p_value);
}

#[test]
#[ignore = "the untilted series misses the p^-s weighting of the peak site and marking shifts it further"]
fn detected_cluster_b_matches_untilted_series() {
    let (model, s, span) = setup();
    let envs = sweep_point_process(&model, s, &[DELTA], N, ENVS, SpanRule::Separation, 0xB1A5).unwrap();
    let observed: Vec<f64> = envs.iter().flat_map(|e| e.samples[0].clusters.iter().map(|c| c.b)).collect();
    let r = ks_two_sample(&observed, &direct(&model, s, span, SiteLaw::Plain, 0xB1A6));
    assert!(r.p_value.unwrap() > 0.01, "KS {} p {:?}", r.statistic, r.p_value);
}
