use templatefit::study::{run_study, summarize, Moments, PullRecord, StudyConfig};
use templatefit_core::{rng_stream, Method, ToyConfig};

fn config(n_mc: Vec<u64>, n_toys: u64, methods: Vec<Method>, jobs: usize) -> StudyConfig {
    StudyConfig {
        toy: ToyConfig {
            seed: 5,
            ..ToyConfig::default()
        },
        n_mc,
        n_toys,
        methods,
        jobs,
    }
}

#[test]
fn one_toy_one_record() {
    let r = run_study(&config(vec![100], 1, vec![Method::Approx], 1)).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(
        (r[0].method, r[0].n_mc, r[0].toy_index),
        (Method::Approx, 100, 0)
    );
}

#[test]
fn records_are_sorted_and_complete() {
    let r = run_study(&config(
        vec![500, 50],
        4,
        vec![Method::Exact, Method::Approx],
        2,
    ))
    .unwrap();
    assert_eq!(r.len(), 2 * 2 * 4);
    let keys: Vec<_> = r.iter().map(|x| (x.method, x.n_mc, x.toy_index)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn methods_see_identical_toys() {
    // the approx record must not depend on which other methods run
    let alone = run_study(&config(vec![200], 6, vec![Method::Approx], 1)).unwrap();
    let together = run_study(&config(vec![200], 6, Method::ALL.to_vec(), 1)).unwrap();
    let approx: Vec<&PullRecord> = together
        .iter()
        .filter(|r| r.method == Method::Approx)
        .collect();
    assert_eq!(alone.iter().collect::<Vec<_>>(), approx);
}

#[test]
fn pull_is_finite_iff_converged_with_error() {
    let r = run_study(&config(vec![50, 1000], 20, Method::ALL.to_vec(), 1)).unwrap();
    for x in &r {
        assert_eq!(
            x.pull.is_finite(),
            x.converged && x.signal_error > 0.0,
            "{x:?}"
        );
    }
}

#[test]
fn rejects_empty_ensembles() {
    assert!(run_study(&config(vec![100], 0, vec![Method::Approx], 1)).is_err());
    assert!(run_study(&config(vec![], 1, vec![Method::Approx], 1)).is_err());
    assert!(run_study(&config(vec![100], 1, vec![], 1)).is_err());
}

#[test]
fn standard_normal_pulls_are_recovered() {
    let mut s = rng_stream(31, 0);
    let z: Vec<f64> = (0..1000)
        .map(|_| {
            let (u, v) = (s.uniform(), s.uniform());
            (-2.0 * (1.0 - u).ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        })
        .collect();
    let m = Moments::of(&z).unwrap();
    assert!(m.mean_z.abs() < 3.0 / 1000f64.sqrt(), "{m:?}");
    assert!((m.std_z - 1.0).abs() < 3.0 / 2000f64.sqrt(), "{m:?}");

    let records: Vec<PullRecord> = z
        .iter()
        .enumerate()
        .map(|(i, &pull)| PullRecord {
            method: Method::Conway,
            n_mc: 10,
            toy_index: i as u64,
            signal_estimate: 250.0 + pull,
            signal_error: 1.0,
            pull,
            qmin: 1.0,
            ndof: 13,
            converged: true,
        })
        .collect();
    let stats = summarize(&records);
    assert_eq!(stats.len(), 1);
    assert_eq!(stats[0].moments, Some(m));
}
