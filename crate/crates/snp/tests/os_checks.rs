//! Scheduler fidelity on randomized batches: ordering, accounting, and
//! resource conservation as observed from outside.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snp::snpos::{run_os, Environment, OsConfig};
use snp_testkit::gen::random_batch;

#[test]
fn random_batches_keep_every_fidelity_promise() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05);
    for round in 0..10 {
        let (pool, jobs) = random_batch(&mut rng, 6);
        let priorities: std::collections::HashMap<String, u64> =
            jobs.iter().map(|j| (j.id.clone(), j.priority)).collect();
        let env = Environment::new(
            pool,
            OsConfig {
                vmax: 16,
                quantum: 4,
            },
        );
        let (env, trace) = run_os(env, jobs, 15).unwrap();

        for record in &trace.records {
            // The recorded order must equal the native priority-desc,
            // id-asc sort of exactly those jobs.
            let mut native = record.order.clone();
            native.sort_by(|x, y| priorities[y].cmp(&priorities[x]).then_with(|| x.cmp(y)));
            assert_eq!(record.order, native, "round {round} tick {}", record.tick);
            assert_eq!(record.chosen, record.order[0]);
        }
        // Accounting equals the native running sum at each tick.
        let mut running = 0u64;
        for record in &trace.records {
            running += record.steps;
            assert_eq!(record.total_after, running, "round {round}");
        }
        assert_eq!(env.account_total(), running);
        assert!(env.conservation_holds(), "round {round}");
    }
}

#[test]
fn traces_are_replayable() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x06);
    let (pool, jobs) = random_batch(&mut rng, 5);
    let build = |pool: std::collections::BTreeMap<String, u64>, jobs: Vec<snp::snpos::JobSpec>| {
        run_os(
            Environment::new(
                pool,
                OsConfig {
                    vmax: 16,
                    quantum: 3,
                },
            ),
            jobs,
            12,
        )
        .unwrap()
        .1
    };
    let first = build(pool.clone(), jobs.clone());
    let second = build(pool, jobs);
    assert_eq!(first, second);
}
